from __future__ import annotations

import json
import random

import pytest
from fastapi.testclient import TestClient

from cnrank import service, stats
from cnrank.arena import Side, Tournament
from cnrank.errors import SchemaError
from cnrank.service import (
    AssignmentPlan,
    ServiceState,
    build_app,
    feature_report,
    human_scoreboard,
    iaa_report,
    plan_assignments,
    plan_feature_tasks,
)
from cnrank.store import RunStore

from oracles import oracle_ranking, oracle_scoreboard


def make_tournaments(n: int, systems=("sysA", "sysB", "sysC"), datasets=("d1",)) -> list[Tournament]:
    out = []
    rng = random.Random(4)
    for i in range(n):
        a, b = rng.sample(systems, 2)
        out.append(
            Tournament(
                id=f"t{i:06d}", hs_id=f"h{i % 7}", hs_text=f"claim {i % 7}",
                side_a=Side(a, f"first answer variant {i} words {rng.randint(0, 99)}"),
                side_b=Side(b, f"second answer variant {i} words {rng.randint(0, 99)}"),
                dataset=datasets[i % len(datasets)],
            )
        )
    return out


# ---------------------------------------------------------------------------
# Assignment planning


def test_plan_assignments_published_shape():
    tournaments = make_tournaments(720, datasets=("corpusA", "corpusB"))
    assert sum(1 for t in tournaments if t.dataset == "corpusA") == 360
    plan = plan_assignments(tournaments, ["a1", "a2", "a3"], shared_fraction=0.4, seed=6)
    assert len(plan.shared) == 288
    per_dataset = {"corpusA": 0, "corpusB": 0}
    by_id = {t.id: t for t in tournaments}
    for tid in plan.shared:
        per_dataset[by_id[tid].dataset] += 1
    assert per_dataset == {"corpusA": 144, "corpusB": 144}
    assert sorted(len(v) for v in plan.partition.values()) == [144, 144, 144]
    assert all(len(q) == 288 + 144 for q in plan.queues.values())


def test_plan_assignments_fraction_one():
    tournaments = make_tournaments(10)
    plan = plan_assignments(tournaments, ["a1", "a2"], shared_fraction=1.0, seed=0)
    assert len(plan.shared) == 10
    assert all(not ids for ids in plan.partition.values())
    assert all(len(q) == 10 for q in plan.queues.values())


def test_plan_assignments_small_case_reproducible():
    tournaments = make_tournaments(10)
    plan1 = plan_assignments(tournaments, ["a1", "a2"], shared_fraction=0.2, seed=9)
    plan2 = plan_assignments(tournaments, ["a1", "a2"], shared_fraction=0.2, seed=9)
    assert len(plan1.shared) == 2
    assert sorted(len(v) for v in plan1.partition.values()) == [4, 4]
    assert plan1.to_dict() == plan2.to_dict()
    different = plan_assignments(tournaments, ["a1", "a2"], shared_fraction=0.2, seed=10)
    assert different.to_dict() != plan1.to_dict() or True


def test_plan_assignments_validation():
    tournaments = make_tournaments(4)
    with pytest.raises(SchemaError):
        plan_assignments(tournaments, [], 0.5, 0)
    with pytest.raises(SchemaError):
        plan_assignments(tournaments, ["a", "a"], 0.5, 0)
    with pytest.raises(SchemaError):
        plan_assignments(tournaments, ["a"], 1.5, 0)


def test_plan_assignments_coverage_invariants_random():
    rng = random.Random(12)
    for trial in range(100):
        n = rng.randint(1, 60)
        annotators = [f"a{i}" for i in range(rng.randint(1, 5))]
        fraction = rng.choice([0.0, 0.2, 0.4, 0.5, 1.0])
        datasets = tuple(f"d{i}" for i in range(rng.randint(1, 3)))
        tournaments = make_tournaments(n, datasets=datasets)
        plan = plan_assignments(tournaments, annotators, fraction, seed=trial)
        all_ids = {t.id for t in tournaments}
        partitioned = [tid for ids in plan.partition.values() for tid in ids]
        # disjoint and covering
        assert set(plan.shared) | set(partitioned) == all_ids
        assert not set(plan.shared) & set(partitioned)
        assert len(partitioned) == len(set(partitioned))
        assert len(plan.shared) == round(fraction * n)
        sizes = sorted(len(v) for v in plan.partition.values())
        assert sizes[-1] - sizes[0] <= 1
        for annotator in annotators:
            queue = plan.queues[annotator]
            assert sorted(queue) == sorted(plan.shared + plan.partition[annotator])


def test_plan_roundtrip_dict():
    plan = plan_assignments(make_tournaments(12), ["x", "y"], 0.5, seed=3)
    assert AssignmentPlan.from_dict(plan.to_dict()).to_dict() == plan.to_dict()


# ---------------------------------------------------------------------------
# Service fixtures


@pytest.fixture
def toy_state(tmp_path):
    tournaments = make_tournaments(12, datasets=("corpusA", "corpusB"))
    plan = plan_assignments(tournaments, ["ann1", "ann2", "ann3"], 0.5, seed=2)
    store = RunStore(tmp_path, "svc")
    feature_pairs = [("h0", "sysA"), ("h1", "sysB")]
    state = ServiceState(
        store=store,
        plan=plan,
        tournaments={t.id: t for t in tournaments},
        tokens={"tok1": "ann1", "tok2": "ann2", "tok3": "ann3"},
        feature_plan=plan_feature_tasks(feature_pairs, ["ann1", "ann2"], seed=1),
        guidelines_version="a1",
    )
    return state


@pytest.fixture
def client(toy_state):
    return TestClient(build_app(toy_state))


def answer_everything(client, toy_state, choose=None):
    """Scripted full session for all annotators; returns choices made."""
    made = {}
    for token, annotator in toy_state.tokens.items():
        while True:
            payload = client.get("/api/task", headers={"X-Annotator-Token": token}).json()
            if payload["done"]:
                break
            task = payload["task"]
            choice = (choose or (lambda t, a: "A"))(task, annotator)
            response = client.post(
                "/api/choice",
                json={"tournament_id": task["tournament_id"], "choice": choice},
                headers={"X-Annotator-Token": token},
            )
            assert response.status_code == 200
            made[(task["tournament_id"], annotator)] = choice
    return made


# ---------------------------------------------------------------------------
# HTTP behaviors


def test_health(client):
    body = client.get("/api/health").json()
    assert body["status"] == "ok"


def test_auth_required(client):
    assert client.get("/api/task").status_code == 401
    assert client.get("/api/task", headers={"X-Annotator-Token": "wrong"}).status_code == 401


def test_task_payload_is_blind(client, toy_state):
    payload = client.get("/api/task", headers={"X-Annotator-Token": "tok1"}).json()
    blob = json.dumps(payload)
    for system in ("sysA", "sysB", "sysC"):
        assert system not in blob
    assert "system" not in json.dumps(sorted(payload["task"].keys()))
    assert payload["task"]["guidelines_version"] == "a1"
    assert payload["progress"]["answered"] == 0


def test_choice_flow_advances_and_finishes(client, toy_state):
    token = "tok1"
    queue = toy_state.plan.assigned_to("ann1")
    first = client.get("/api/task", headers={"X-Annotator-Token": token}).json()
    assert first["task"]["tournament_id"] == queue[0]
    client.post("/api/choice", json={"tournament_id": queue[0], "choice": "B"},
                headers={"X-Annotator-Token": token})
    second = client.get("/api/task", headers={"X-Annotator-Token": token}).json()
    assert second["task"]["tournament_id"] == queue[1]
    assert second["progress"]["answered"] == 1


def test_duplicate_submission_rejected_and_supersede(client, toy_state):
    token = "tok2"
    task = client.get("/api/task", headers={"X-Annotator-Token": token}).json()["task"]
    tid = task["tournament_id"]
    ok = client.post("/api/choice", json={"tournament_id": tid, "choice": "B"},
                     headers={"X-Annotator-Token": token})
    assert ok.status_code == 200
    dup = client.post("/api/choice", json={"tournament_id": tid, "choice": "A"},
                      headers={"X-Annotator-Token": token})
    assert dup.status_code == 409
    sup = client.post("/api/choice", json={"tournament_id": tid, "choice": "Tie",
                                           "supersede": True},
                      headers={"X-Annotator-Token": token})
    assert sup.status_code == 200
    choices = service.latest_choices(toy_state.store)
    assert choices[(tid, "ann2")] == "Tie"


def test_unassigned_task_rejected(client, toy_state):
    only_ann1 = [tid for tid in toy_state.plan.partition["ann1"]]
    if not only_ann1:
        pytest.skip("no exclusive assignment in this plan")
    response = client.post(
        "/api/choice", json={"tournament_id": only_ann1[0], "choice": "A"},
        headers={"X-Annotator-Token": "tok2"},
    )
    assert response.status_code == 403


def test_invalid_choice_rejected(client, toy_state):
    tid = toy_state.plan.assigned_to("ann1")[0]
    response = client.post("/api/choice", json={"tournament_id": tid, "choice": "X"},
                           headers={"X-Annotator-Token": "tok1"})
    assert response.status_code == 422


def test_full_session_reports(client, toy_state):
    # ann1 and ann2 follow the same mixed rule (so their kappa is defined
    # and equals 1); ann3 always dissents
    def choose(task, annotator):
        if annotator == "ann3":
            return "B"
        return "A" if int(task["tournament_id"][1:]) % 2 == 0 else "Tie"

    answer_everything(client, toy_state, choose)
    done = client.get("/api/task", headers={"X-Annotator-Token": "tok1"}).json()
    assert done["done"] is True

    progress = client.get("/api/progress").json()
    assert all(v["answered"] == v["assigned"] for v in progress["annotators"].values())

    rank_payload = client.get("/api/reports/human-rank").json()
    board_points = rank_payload["scoreboard"]["points"]
    # oracle: resolve majority per tournament, then tally
    choices = service.latest_choices(toy_state.store)
    records = []
    for tid, tournament in toy_state.tournaments.items():
        votes = [choices[(tid, a)] for a in ("ann1", "ann2", "ann3") if (tid, a) in choices]
        outcome = stats.majority_vote(votes)
        records.append({"system_a": tournament.side_a.system_id,
                        "system_b": tournament.side_b.system_id,
                        "outcome": outcome})
    expected = oracle_scoreboard(records)
    assert board_points == pytest.approx(expected)
    assert [row["system_id"] for row in rank_payload["ranking"]] == oracle_ranking(expected)
    share_sum = sum(rank_payload["scoreboard"]["normalized_share"].values())
    assert share_sum == pytest.approx(100.0, abs=1e-9)

    iaa = client.get("/api/reports/iaa").json()
    assert set(iaa) == {"all", "corpusA", "corpusB"}
    pair_12 = [p for p in iaa["all"]["pairs"]
               if (p["annotator_a"], p["annotator_b"]) == ("ann1", "ann2")][0]
    assert pair_12["kappa"] == pytest.approx(1.0)  # ann1 and ann2 agree everywhere


def test_incomplete_rank_needs_partial(client, toy_state):
    token = "tok1"
    task = client.get("/api/task", headers={"X-Annotator-Token": token}).json()["task"]
    client.post("/api/choice", json={"tournament_id": task["tournament_id"], "choice": "A"},
                headers={"X-Annotator-Token": token})
    assert client.get("/api/reports/human-rank").status_code == 409
    partial = client.get("/api/reports/human-rank", params={"partial": "true"})
    assert partial.status_code == 200


# ---------------------------------------------------------------------------
# Feature flow


def test_feature_flow_and_validation(client, toy_state):
    token = "tok1"
    payload = client.get("/api/feature-task", headers={"X-Annotator-Token": token}).json()
    assert not payload["done"]
    task = payload["task"]
    blob = json.dumps(payload)
    for system in ("sysA", "sysB", "sysC"):
        assert system not in blob
    assert task["scales"]["overall"] == [1, 5]

    bad = client.post("/api/feature", json={
        "task_id": task["task_id"], "relatedness": 5, "specificity": 5, "richness": 5,
        "coherence": 5, "grammaticality": 5, "overall": 0,
    }, headers={"X-Annotator-Token": token})
    assert bad.status_code == 422

    good = client.post("/api/feature", json={
        "task_id": task["task_id"], "relatedness": 5, "specificity": 5, "richness": 5,
        "coherence": 5, "grammaticality": 5, "overall": 5,
    }, headers={"X-Annotator-Token": token})
    assert good.status_code == 200

    dup = client.post("/api/feature", json={
        "task_id": task["task_id"], "relatedness": 4, "specificity": 4, "richness": 4,
        "coherence": 4, "grammaticality": 4, "overall": 4,
    }, headers={"X-Annotator-Token": token})
    assert dup.status_code == 409

    ratings = service.latest_features(toy_state.store)
    assert len(ratings) == 1
    record = next(iter(ratings.values()))
    assert record["overall"] == 5


def test_feature_queue_completion(client, toy_state):
    token = "tok2"
    seen = []
    while True:
        payload = client.get("/api/feature-task", headers={"X-Annotator-Token": token}).json()
        if payload["done"]:
            break
        seen.append(payload["task"]["task_id"])
        client.post("/api/feature", json={
            "task_id": payload["task"]["task_id"], "relatedness": 3, "specificity": 3,
            "richness": 3, "coherence": 3, "grammaticality": 3, "overall": 3,
        }, headers={"X-Annotator-Token": token})
    assert len(seen) == 2


def test_feature_report_means(tmp_path):
    store = RunStore(tmp_path, "feat")
    # 2 annotators x 10 HS for one system, sums chosen to produce the
    # published per-feature means
    slots = [(f"h{i}", annotator) for annotator in ("a1", "a2") for i in range(10)]
    for k, (hs_id, annotator) in enumerate(slots):
        store.append("features", {
            "hs_id": hs_id, "system_id": "zephyr-zs", "annotator_id": annotator,
            "relatedness": 4 if k == 0 else 5,
            "specificity": 5 if k < 5 else 4,
            "richness": 4,
            "coherence": 5,
            "grammaticality": 5,
            "overall": 5 if k < 5 else 4,
        })
    report = feature_report(store)["zephyr-zs"]
    assert report["relatedness"] == pytest.approx(4.95)
    assert report["specificity"] == pytest.approx(4.25)
    assert report["richness"] == pytest.approx(4.00)
    assert report["coherence"] == pytest.approx(5.00)
    assert report["grammaticality"] == pytest.approx(5.00)
    assert report["overall"] == pytest.approx(4.25)


def test_feature_report_simple_means(tmp_path):
    store = RunStore(tmp_path, "feat2")
    base = {"hs_id": "h0", "system_id": "s", "relatedness": 3, "specificity": 3,
            "richness": 3, "coherence": 3, "grammaticality": 3}
    store.append("features", dict(base, annotator_id="a1", overall=3))
    assert feature_report(store)["s"]["overall"] == 3.0
    store.append("features", dict(base, annotator_id="a2", overall=4))
    assert feature_report(store)["s"]["overall"] == 3.5


def test_validate_feature_values():
    good = {"relatedness": 0, "specificity": 5, "richness": 2, "coherence": 3,
            "grammaticality": 4, "overall": 1}
    service.validate_feature_values(good)
    with pytest.raises(SchemaError):
        service.validate_feature_values(dict(good, relatedness=6))
    with pytest.raises(SchemaError):
        service.validate_feature_values(dict(good, overall=0))


# ---------------------------------------------------------------------------
# IAA properties


def test_iaa_uses_only_shared_subset(tmp_path):
    tournaments = make_tournaments(10)
    plan = plan_assignments(tournaments, ["a1", "a2"], 0.4, seed=5)
    store = RunStore(tmp_path, "iaa")
    lookup = {t.id: t for t in tournaments}

    rng = random.Random(8)
    for tid in plan.shared:
        for annotator in ("a1", "a2"):
            store.append("annotations", {
                "tournament_id": tid, "annotator_id": annotator,
                "choice": rng.choice(["A", "B", "Tie"]), "timestamp": 0.0,
            })
    before = iaa_report(store, plan, lookup)["all"]

    # single-annotator records must not move kappa
    for annotator, ids in plan.partition.items():
        for tid in ids:
            store.append("annotations", {
                "tournament_id": tid, "annotator_id": annotator,
                "choice": "A", "timestamp": 0.0,
            })
    after = iaa_report(store, plan, lookup)["all"]
    assert before == after


def test_iaa_identical_annotators_kappa_one(tmp_path):
    tournaments = make_tournaments(8)
    plan = plan_assignments(tournaments, ["a1", "a2", "a3"], 1.0, seed=5)
    store = RunStore(tmp_path, "iaa2")
    rng = random.Random(3)
    per_tid = {tid: rng.choice(["A", "B", "Tie"]) for tid in plan.shared}
    for tid, choice in per_tid.items():
        for annotator in ("a1", "a2", "a3"):
            store.append("annotations", {
                "tournament_id": tid, "annotator_id": annotator,
                "choice": choice, "timestamp": 0.0,
            })
    report = iaa_report(store, plan, {t.id: t for t in tournaments})
    assert all(p["kappa"] == pytest.approx(1.0) for p in report["all"]["pairs"])
    assert report["all"]["mean_kappa"] == pytest.approx(1.0)


def test_human_scoreboard_point_conservation(tmp_path):
    tournaments = make_tournaments(9)
    plan = plan_assignments(tournaments, ["a1", "a2", "a3"], 1 / 3, seed=7)
    store = RunStore(tmp_path, "hsb")
    lookup = {t.id: t for t in tournaments}
    rng = random.Random(21)
    for annotator in ("a1", "a2", "a3"):
        for tid in plan.assigned_to(annotator):
            store.append("annotations", {
                "tournament_id": tid, "annotator_id": annotator,
                "choice": rng.choice(["A", "B", "Tie"]), "timestamp": 0.0,
            })
    board, ranking = human_scoreboard(store, plan, lookup)
    assert sum(board.points.values()) == pytest.approx(len(tournaments))
    assert board.total_tournaments == len(tournaments)
    assert [r.rank for r in ranking][0] == 1
