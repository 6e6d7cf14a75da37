from __future__ import annotations

import json
import threading

import pytest

from cnrank.errors import DuplicateKeyError, MissingStreamError, SchemaError, StoreError
from cnrank.store import RunStore, config_hash


def verdict(i: int, outcome: str = "A") -> dict:
    return {
        "tournament_id": f"t{i:06d}",
        "system_a": "sys-a",
        "system_b": "sys-b",
        "outcome": outcome,
        "parse_status": "ok",
    }


def test_append_then_load_roundtrip(tmp_path):
    store = RunStore(tmp_path, "r1")
    record = verdict(0)
    store.append("verdicts", record)
    assert store.load("verdicts") == [record]


def test_duplicate_key_rejected(tmp_path):
    store = RunStore(tmp_path, "r1")
    store.append("verdicts", verdict(1))
    with pytest.raises(DuplicateKeyError):
        store.append("verdicts", verdict(1, outcome="B"))
    assert store.count("verdicts") == 1


def test_duplicate_candidate_key_rejected(tmp_path):
    store = RunStore(tmp_path, "r1")
    record = {"id": "x", "hs_id": "h1", "system_id": "s1", "text": "t", "refusal_flag": False}
    store.append("candidates", record)
    with pytest.raises(DuplicateKeyError):
        store.append("candidates", dict(record, text="other"))


def test_schema_violation_names_field(tmp_path):
    store = RunStore(tmp_path, "r1")
    with pytest.raises(SchemaError) as err:
        store.append("verdicts", {"tournament_id": "t0"})
    assert err.value.field == "system_a"


def test_unknown_and_missing_streams(tmp_path):
    store = RunStore(tmp_path, "r1")
    with pytest.raises(MissingStreamError):
        store.append("nonsense", {})
    with pytest.raises(MissingStreamError):
        store.load("verdicts")


def test_append_order_stable_across_reloads(tmp_path):
    store = RunStore(tmp_path, "r1")
    for i in range(50):
        store.append("verdicts", verdict(i), durable=False)
    order1 = [r["tournament_id"] for r in store.load("verdicts")]
    order2 = [r["tournament_id"] for r in RunStore(tmp_path, "r1").load("verdicts")]
    assert order1 == order2 == [f"t{i:06d}" for i in range(50)]


def test_torn_trailing_line_excluded_with_warning(tmp_path, caplog):
    store = RunStore(tmp_path, "r1")
    for i in range(5):
        store.append("verdicts", verdict(i))
    store.close()
    path = tmp_path / "r1" / "verdicts.jsonl"
    with path.open("a", encoding="utf-8") as fh:
        fh.write('{"tournament_id": "t9999', )  # interrupted write, no newline
    fresh = RunStore(tmp_path, "r1")
    with caplog.at_level("WARNING"):
        records = fresh.load("verdicts")
    assert len(records) == 5
    assert any("torn" in message for message in caplog.messages)


def test_midfile_corruption_raises(tmp_path):
    store = RunStore(tmp_path, "r1")
    store.append("verdicts", verdict(0))
    store.close()
    path = tmp_path / "r1" / "verdicts.jsonl"
    with path.open("a", encoding="utf-8") as fh:
        fh.write("NOT JSON\n")
        fh.write(json.dumps(verdict(1)) + "\n")
    with pytest.raises(StoreError):
        RunStore(tmp_path, "r1").load("verdicts")


def test_resume_skips_existing_keys(tmp_path):
    store = RunStore(tmp_path, "r1")
    store.append("verdicts", verdict(0))
    store.close()
    fresh = RunStore(tmp_path, "r1")
    assert ("t000000",) in fresh.keys("verdicts")
    with pytest.raises(DuplicateKeyError):
        fresh.append("verdicts", verdict(0))


def test_concurrent_appends_all_acknowledged(tmp_path):
    store = RunStore(tmp_path, "r1")
    per_thread, threads = 100, 8
    errors: list[Exception] = []

    def worker(offset: int) -> None:
        for i in range(per_thread):
            try:
                store.append("verdicts", verdict(offset * per_thread + i), durable=False)
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

    pool = [threading.Thread(target=worker, args=(t,)) for t in range(threads)]
    for thread in pool:
        thread.start()
    for thread in pool:
        thread.join()
    assert not errors
    assert store.count("verdicts") == per_thread * threads


def test_bulk_append_count_at_plan_scale(tmp_path):
    # full-plan scale: 82008 verdict appends reload to exactly 82008 records
    store = RunStore(tmp_path, "big")
    for i in range(82008):
        store.append("verdicts", verdict(i), durable=False)
    store.close()
    assert RunStore(tmp_path, "big").count("verdicts") == 82008


def test_supersede_allows_correction(tmp_path):
    store = RunStore(tmp_path, "r1")
    base = {
        "tournament_id": "t1", "annotator_id": "ann1", "choice": "B", "timestamp": 1.0,
    }
    store.append("annotations", base)
    with pytest.raises(DuplicateKeyError):
        store.append("annotations", dict(base, choice="Tie"))
    store.append("annotations", dict(base, choice="Tie", supersede=True))
    records = store.load("annotations")
    assert [r["choice"] for r in records] == ["B", "Tie"]


def test_manifest_lifecycle(tmp_path):
    store = RunStore(tmp_path, "r1")
    store.write_run_info({"seed": 1}, dataset_fingerprint="abc")
    store.append("verdicts", verdict(0))
    manifest = store.finalize_manifest()
    assert manifest["artifacts"] == {"verdicts.jsonl": 1}
    assert manifest["config_hash"] == config_hash({"seed": 1})
    store.verify_manifest()

    # growth is fine
    store.append("verdicts", verdict(1))
    store.finalize_manifest()
    store.verify_manifest()

    # shrinking is not: simulate a manifest claiming more records than exist
    bigger = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    bigger["artifacts"]["verdicts.jsonl"] = 99
    (tmp_path / "r1" / "manifest.json").write_text(json.dumps(bigger))
    with pytest.raises(StoreError):
        store.finalize_manifest()
    with pytest.raises(StoreError):
        store.verify_manifest()


def test_reports_and_docs(tmp_path):
    store = RunStore(tmp_path, "r1")
    store.write_report("thing.json", {"x": 1})
    assert store.read_report("thing.json") == {"x": 1}
    store.write_doc("aux.json", {"y": 2})
    assert store.read_doc("aux.json") == {"y": 2}
    assert store.has_doc("aux.json")
    with pytest.raises(MissingStreamError):
        store.read_report("absent.json")
