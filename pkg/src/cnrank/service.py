"""HTTP service backing human evaluation.

Annotators pull blind A-vs-B tasks and six-scale feature-rating tasks
from per-annotator queues, submit choices, and coordinators read IAA and
ranking reports. Every response shown to an annotator is built without
system identities; attribution only exists server-side.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict

from . import arena, stats
from .arena import JudgeVerdict, RankVector, ScoreBoard, Tournament
from .errors import DataError, SchemaError, UndefinedKappaError
from .store import RunStore

FEATURE_SCALES: dict[str, tuple[int, int]] = {
    "relatedness": (0, 5),
    "specificity": (0, 5),
    "richness": (0, 5),
    "coherence": (0, 5),
    "grammaticality": (0, 5),
    "overall": (1, 5),
}


# ---------------------------------------------------------------------------
# Assignment planning


@dataclass
class AssignmentPlan:
    """Which annotator sees which tournaments, and in what order."""

    seed: int
    shared: list[str]  # tournament ids every annotator answers
    partition: dict[str, list[str]]  # annotator -> exclusive tournament ids
    queues: dict[str, list[str]]  # annotator -> full ordered queue

    def assigned_to(self, annotator: str) -> list[str]:
        return self.queues[annotator]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "shared": self.shared,
            "partition": self.partition,
            "queues": self.queues,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssignmentPlan":
        return cls(
            seed=d["seed"], shared=list(d["shared"]),
            partition={k: list(v) for k, v in d["partition"].items()},
            queues={k: list(v) for k, v in d["queues"].items()},
        )


def _stratum_quotas(sizes: dict[str, int], total_shared: int) -> dict[str, int]:
    """Largest-remainder apportionment of the shared subset across strata."""
    total = sum(sizes.values())
    raw = {k: total_shared * n / total for k, n in sizes.items()}
    quotas = {k: int(v) for k, v in raw.items()}
    leftover = total_shared - sum(quotas.values())
    by_remainder = sorted(sizes, key=lambda k: (-(raw[k] - quotas[k]), k))
    for k in by_remainder[:leftover]:
        quotas[k] += 1
    return quotas


def plan_assignments(
    tournaments: list[Tournament],
    annotators: list[str],
    shared_fraction: float,
    seed: int,
) -> AssignmentPlan:
    """Split tournaments into a shared subset (seen by everyone, for IAA)
    and a remainder partitioned as evenly as possible.

    The shared subset is balanced across dataset tags by largest-remainder
    apportionment; per-annotator queue order is shuffled with a recorded
    seed.
    """
    if not annotators:
        raise SchemaError("need at least one annotator")
    if len(set(annotators)) != len(annotators):
        raise SchemaError("duplicate annotator ids")
    if not 0 <= shared_fraction <= 1:
        raise SchemaError("shared_fraction must lie in [0, 1]")

    by_stratum: dict[str, list[str]] = {}
    for t in tournaments:
        by_stratum.setdefault(t.dataset, []).append(t.id)

    total_shared = round(shared_fraction * len(tournaments))
    quotas = _stratum_quotas({k: len(v) for k, v in by_stratum.items()}, total_shared)

    shared: list[str] = []
    remainder: list[str] = []
    for stratum in sorted(by_stratum):
        ids = list(by_stratum[stratum])
        random.Random(f"{seed}:shared:{stratum}").shuffle(ids)
        shared.extend(ids[: quotas[stratum]])
        remainder.extend(ids[quotas[stratum] :])

    random.Random(f"{seed}:partition").shuffle(remainder)
    partition: dict[str, list[str]] = {a: [] for a in annotators}
    for i, tid in enumerate(remainder):
        partition[annotators[i % len(annotators)]].append(tid)

    queues = {}
    for annotator in annotators:
        queue = shared + partition[annotator]
        random.Random(f"{seed}:queue:{annotator}").shuffle(queue)
        queues[annotator] = queue
    return AssignmentPlan(seed=seed, shared=shared, partition=partition, queues=queues)


def plan_feature_tasks(
    tournaments_or_pairs: list[tuple[str, str]],
    annotators: list[str],
    seed: int,
) -> dict:
    """Feature-rating plan: every annotator rates every (hs, system) pair.

    Task ids are opaque (the pair's position in planning order) so client
    payloads cannot leak attribution.
    """
    tasks = {
        f"ft{i:04d}": {"hs_id": h, "system_id": s}
        for i, (h, s) in enumerate(tournaments_or_pairs)
    }
    queues = {}
    for annotator in annotators:
        order = sorted(tasks)
        random.Random(f"{seed}:features:{annotator}").shuffle(order)
        queues[annotator] = order
    return {"tasks": tasks, "queues": queues, "seed": seed}


# ---------------------------------------------------------------------------
# Reads over the annotation stream


def latest_choices(store: RunStore) -> dict[tuple[str, str], str]:
    """Latest-wins view of (tournament, annotator) -> choice."""
    choices: dict[tuple[str, str], str] = {}
    if store.exists("annotations"):
        for record in store.load("annotations"):
            choices[(record["tournament_id"], record["annotator_id"])] = record["choice"]
    return choices


def latest_features(store: RunStore) -> dict[tuple[str, str, str], dict]:
    ratings: dict[tuple[str, str, str], dict] = {}
    if store.exists("features"):
        for record in store.load("features"):
            ratings[(record["hs_id"], record["system_id"], record["annotator_id"])] = record
    return ratings


def human_scoreboard(
    store: RunStore,
    plan: AssignmentPlan,
    tournaments: dict[str, Tournament],
    partial: bool = False,
) -> tuple[ScoreBoard, RankVector]:
    """Resolve annotations into a scoreboard and ranking.

    Shared tournaments resolve by majority vote, single-annotator ones
    directly; the result feeds the same scoring/ranking path as the
    automatic arena.
    """
    choices = latest_choices(store)
    shared = set(plan.shared)
    annotators = sorted(plan.queues)

    verdicts: list[JudgeVerdict] = []
    unanswered = 0
    for tid, tournament in tournaments.items():
        if tid in shared:
            votes = [choices[(tid, a)] for a in annotators if (tid, a) in choices]
            expected = len(annotators)
        else:
            owner = next((a for a, ids in plan.partition.items() if tid in ids), None)
            votes = [choices[(tid, owner)]] if owner and (tid, owner) in choices else []
            expected = 1
        if len(votes) < expected:
            unanswered += 1
            if not votes:
                continue
        outcome = stats.majority_vote(votes)
        verdicts.append(
            JudgeVerdict(
                tournament_id=tid,
                system_a=tournament.side_a.system_id,
                system_b=tournament.side_b.system_id,
                outcome=outcome,
                parse_status="ok",
                judge_id="human",
                hs_id=tournament.hs_id,
            )
        )
    if unanswered and not partial:
        raise DataError(
            f"{unanswered} tournament(s) not fully answered; pass partial=True to rank anyway"
        )
    board = arena.score(verdicts)
    return board, arena.rank(board)


def iaa_report(
    store: RunStore,
    plan: AssignmentPlan,
    tournaments: dict[str, Tournament],
) -> dict:
    """Cohen's kappa per annotator pair over the shared subset only,
    split per dataset tag, with per-dataset and overall means."""
    choices = latest_choices(store)
    annotators = sorted(plan.queues)
    if len(annotators) < 2:
        raise DataError("IAA needs at least two annotators")

    datasets = sorted({tournaments[tid].dataset for tid in plan.shared})
    scopes: dict[str, list[str]] = {"all": list(plan.shared)}
    if len(datasets) > 1:
        for tag in datasets:
            scopes[tag] = [tid for tid in plan.shared if tournaments[tid].dataset == tag]

    out: dict = {}
    for scope, ids in scopes.items():
        pairs: list[dict] = []
        defined: list[float] = []
        for i in range(len(annotators)):
            for j in range(i + 1, len(annotators)):
                a, b = annotators[i], annotators[j]
                both = [
                    tid for tid in ids
                    if (tid, a) in choices and (tid, b) in choices
                ]
                if not both:
                    continue
                try:
                    report = stats.cohens_kappa(
                        [choices[(tid, a)] for tid in both],
                        [choices[(tid, b)] for tid in both],
                        annotator_a=a,
                        annotator_b=b,
                        categories=stats.OUTCOMES,
                    )
                except UndefinedKappaError as exc:
                    # both annotators constant and equal: record, exclude from mean
                    pairs.append({
                        "annotator_a": a, "annotator_b": b, "kappa": None,
                        "n_items": len(both), "undefined": str(exc),
                    })
                    continue
                pairs.append(report.to_dict())
                defined.append(report.kappa)
        if not pairs and scope == "all":
            raise DataError("no shared tournaments answered by two annotators yet")
        out[scope] = {
            "pairs": pairs,
            "mean_kappa": sum(defined) / len(defined) if defined else None,
        }
    return out


def next_task_payload(state: "ServiceState", annotator: str) -> dict:
    """Next unanswered tournament for this annotator, blind to systems."""
    answered = {
        tid for (tid, a) in latest_choices(state.store) if a == annotator
    }
    queue = state.plan.assigned_to(annotator)
    pending = [tid for tid in queue if tid not in answered]
    progress = {
        "assigned": len(queue),
        "answered": len(queue) - len(pending),
        "remaining": len(pending),
    }
    if not pending:
        return {"done": True, "task": None, "progress": progress}
    tournament = state.tournaments[pending[0]]
    return {
        "done": False,
        "task": {
            "tournament_id": tournament.id,
            "hs_text": tournament.hs_text,
            "cn_a": tournament.side_a.cn_text,
            "cn_b": tournament.side_b.cn_text,
            "guidelines_version": state.guidelines_version,
        },
        "progress": progress,
    }


def feature_report(store: RunStore) -> dict:
    """Per-system mean of each feature over all (hs, annotator) ratings."""
    ratings = latest_features(store)
    sums: dict[str, dict[str, float]] = {}
    counts: dict[str, int] = {}
    for (_, system_id, _), record in ratings.items():
        bucket = sums.setdefault(system_id, {f: 0.0 for f in FEATURE_SCALES})
        for feature in FEATURE_SCALES:
            bucket[feature] += record[feature]
        counts[system_id] = counts.get(system_id, 0) + 1
    return {
        system_id: {
            feature: sums[system_id][feature] / counts[system_id]
            for feature in FEATURE_SCALES
        }
        for system_id in sorted(sums)
    }


# ---------------------------------------------------------------------------
# HTTP layer


class ChoiceIn(BaseModel):
    model_config = ConfigDict(extra="forbid")
    tournament_id: str
    choice: str
    supersede: bool = False


class FeatureIn(BaseModel):
    model_config = ConfigDict(extra="forbid")
    task_id: str
    relatedness: int
    specificity: int
    richness: int
    coherence: int
    grammaticality: int
    overall: int
    supersede: bool = False


def validate_feature_values(payload: dict) -> None:
    for feature, (lo, hi) in FEATURE_SCALES.items():
        value = payload[feature]
        if not isinstance(value, int) or not lo <= value <= hi:
            raise SchemaError(
                f"{feature} must be an integer in [{lo}, {hi}]", field=feature
            )


@dataclass
class ServiceState:
    store: RunStore
    plan: AssignmentPlan
    tournaments: dict[str, Tournament]
    tokens: dict[str, str]  # token -> annotator id
    feature_plan: dict = field(default_factory=dict)
    guidelines_version: str = "a1"
    coordinator_token: str | None = None
    ui_dir: str | None = None


def build_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="cnrank annotation service")

    def annotator_from(request: Request) -> str:
        token = request.headers.get("X-Annotator-Token") or request.query_params.get("token")
        if not token or token not in state.tokens:
            raise HTTPException(status_code=401, detail="missing or unknown annotator token")
        return state.tokens[token]

    def check_coordinator(request: Request) -> None:
        if state.coordinator_token is None:
            return
        token = request.headers.get("X-Coordinator-Token") or request.query_params.get("token")
        if token != state.coordinator_token:
            raise HTTPException(status_code=401, detail="coordinator token required")

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "run_id": state.store.run_id}

    @app.get("/api/task")
    def get_task(request: Request, annotator: str | None = Query(default=None)) -> dict:
        resolved = annotator_from(request)
        if annotator is not None and annotator != resolved:
            raise HTTPException(status_code=403, detail="token does not match annotator")
        return next_task_payload(state, resolved)

    @app.post("/api/choice")
    def post_choice(body: ChoiceIn, request: Request) -> dict:
        annotator = annotator_from(request)
        if body.choice not in stats.OUTCOMES:
            raise HTTPException(status_code=422, detail="choice must be A, B, or Tie")
        if body.tournament_id not in state.plan.assigned_to(annotator):
            raise HTTPException(status_code=403, detail="task not assigned to this annotator")
        existing = latest_choices(state.store)
        if (body.tournament_id, annotator) in existing and not body.supersede:
            raise HTTPException(
                status_code=409, detail="already answered; resubmit with supersede=true"
            )
        record = {
            "tournament_id": body.tournament_id,
            "annotator_id": annotator,
            "choice": body.choice,
            "timestamp": time.time(),
            "guidelines_version": state.guidelines_version,
            "supersede": body.supersede,
        }
        state.store.append("annotations", record)
        return {"ok": True}

    @app.get("/api/feature-task")
    def get_feature_task(request: Request) -> dict:
        annotator = annotator_from(request)
        if not state.feature_plan:
            return {"done": True, "task": None, "progress": {"assigned": 0, "answered": 0}}
        tasks = state.feature_plan["tasks"]
        queue = state.feature_plan["queues"].get(annotator, [])
        rated = latest_features(state.store)
        pending = [
            tid for tid in queue
            if (tasks[tid]["hs_id"], tasks[tid]["system_id"], annotator) not in rated
        ]
        progress = {"assigned": len(queue), "answered": len(queue) - len(pending)}
        if not pending:
            return {"done": True, "task": None, "progress": progress}
        task_id = pending[0]
        hs_id = tasks[task_id]["hs_id"]
        system_id = tasks[task_id]["system_id"]
        cn_text = next(
            (
                t.side_a.cn_text if t.side_a.system_id == system_id else t.side_b.cn_text
                for t in state.tournaments.values()
                if t.hs_id == hs_id and system_id in (t.side_a.system_id, t.side_b.system_id)
            ),
            None,
        )
        hs_text = next(
            (t.hs_text for t in state.tournaments.values() if t.hs_id == hs_id), ""
        )
        return {
            "done": False,
            "task": {
                "task_id": task_id,
                "hs_text": hs_text,
                "cn_text": cn_text,
                "scales": {k: list(v) for k, v in FEATURE_SCALES.items()},
                "guidelines_version": state.guidelines_version,
            },
            "progress": progress,
        }

    @app.post("/api/feature")
    def post_feature(body: FeatureIn, request: Request) -> dict:
        annotator = annotator_from(request)
        tasks = state.feature_plan.get("tasks", {})
        if body.task_id not in tasks:
            raise HTTPException(status_code=404, detail="unknown feature task")
        if body.task_id not in state.feature_plan["queues"].get(annotator, []):
            raise HTTPException(status_code=403, detail="task not assigned to this annotator")
        payload = body.model_dump()
        try:
            validate_feature_values(payload)
        except SchemaError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        rated = latest_features(state.store)
        key = (tasks[body.task_id]["hs_id"], tasks[body.task_id]["system_id"], annotator)
        if key in rated and not body.supersede:
            raise HTTPException(
                status_code=409, detail="already rated; resubmit with supersede=true"
            )
        record = {
            "hs_id": tasks[body.task_id]["hs_id"],
            "system_id": tasks[body.task_id]["system_id"],
            "annotator_id": annotator,
            "timestamp": time.time(),
            "supersede": body.supersede,
            **{f: payload[f] for f in FEATURE_SCALES},
        }
        state.store.append("features", record)
        return {"ok": True}

    @app.get("/api/progress")
    def progress(request: Request) -> dict:
        check_coordinator(request)
        choices = latest_choices(state.store)
        per_annotator = {}
        for annotator, queue in state.plan.queues.items():
            answered = sum(1 for tid in queue if (tid, annotator) in choices)
            per_annotator[annotator] = {"assigned": len(queue), "answered": answered}
        features = latest_features(state.store)
        return {
            "tournaments": len(state.tournaments),
            "shared": len(state.plan.shared),
            "annotators": per_annotator,
            "feature_ratings": len(features),
        }

    @app.get("/api/reports/iaa")
    def reports_iaa(request: Request) -> dict:
        check_coordinator(request)
        try:
            return iaa_report(state.store, state.plan, state.tournaments)
        except DataError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/api/reports/human-rank")
    def reports_rank(request: Request, partial: bool = Query(default=False)) -> dict:
        check_coordinator(request)
        try:
            board, ranking = human_scoreboard(
                state.store, state.plan, state.tournaments, partial=partial
            )
        except DataError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {
            "scoreboard": board.to_dict(),
            "ranking": [r.__dict__ for r in ranking],
        }

    @app.get("/api/reports/features")
    def reports_features(request: Request) -> dict:
        check_coordinator(request)
        return feature_report(state.store)

    if state.ui_dir:
        app.mount("/", StaticFiles(directory=state.ui_dir, html=True), name="ui")
    return app
