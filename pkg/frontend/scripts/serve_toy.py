#!/usr/bin/env python3
"""Serve a deterministic toy annotation run for frontend tests.

Builds a 12-tournament plan (3 systems x 4 HS, two dataset tags), a
feature plan (4 HS x one system, rated by two annotators), persists
everything in a run directory, and serves the annotation API.
"""

from __future__ import annotations

import argparse

import uvicorn

from cnrank.arena import Side, Tournament
from cnrank.service import ServiceState, build_app, plan_assignments, plan_feature_tasks
from cnrank.store import RunStore

SYSTEMS = ["zephyr-zs", "mistral-zs", "gold standard"]
TOKENS = {"tokA": "ann1", "tokB": "ann2", "tokC": "ann3"}


def cn_text(system: str, hs_id: str) -> str:
    # fixed per (system, hs) but phrased without naming the system
    flavor = {"zephyr-zs": "first", "mistral-zs": "second", "gold standard": "third"}[system]
    return f"{flavor} style counter reply for {hs_id} with calm factual framing"


def build_state(run_root: str) -> ServiceState:
    hs = [(f"h{i}", f"synthetic hostile claim number {i}") for i in range(4)]
    tournaments: list[Tournament] = []
    for i, (hs_id, hs_text) in enumerate(hs):
        for a_idx in range(len(SYSTEMS)):
            for b_idx in range(a_idx + 1, len(SYSTEMS)):
                side_a, side_b = SYSTEMS[a_idx], SYSTEMS[b_idx]
                tournaments.append(
                    Tournament(
                        id=f"t{len(tournaments):06d}",
                        hs_id=hs_id,
                        hs_text=hs_text,
                        side_a=Side(side_a, cn_text(side_a, hs_id)),
                        side_b=Side(side_b, cn_text(side_b, hs_id)),
                        presentation_order="as-is",
                        dataset="corpusA" if i < 2 else "corpusB",
                    )
                )
    assert len(tournaments) == 12

    store = RunStore(run_root, "toy")
    store.write_run_info({"purpose": "frontend session test"})
    existing = store.keys("plan")
    for tournament in tournaments:
        if (tournament.id,) not in existing:
            store.append("plan", tournament.to_record())

    plan = plan_assignments(tournaments, ["ann1", "ann2", "ann3"], 0.5, seed=77)
    store.write_doc("assignments.json", plan.to_dict())

    feature_pairs = [(hs_id, "zephyr-zs") for hs_id, _ in hs]
    feature_plan = plan_feature_tasks(feature_pairs, ["ann1", "ann2"], seed=78)
    store.write_doc("feature_plan.json", feature_plan)

    return ServiceState(
        store=store,
        plan=plan,
        tournaments={t.id: t for t in tournaments},
        tokens=TOKENS,
        feature_plan=feature_plan,
        guidelines_version="a1",
    )


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--dir", required=True, help="run root directory")
    parser.add_argument("--port", type=int, default=8791)
    args = parser.parse_args()
    app = build_app(build_state(args.dir))
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
