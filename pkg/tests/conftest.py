from __future__ import annotations

import json
from pathlib import Path

import pytest

from cnrank.corpus import Dataset, HsInstance, ReferenceCn

DATA_DIR = Path(__file__).parent / "data"
PKG_DATA = Path(__file__).parent.parent / "src" / "cnrank" / "data"


def make_dataset(rows: list[tuple[str, str, str, str]], tag: str = "custom") -> Dataset:
    """rows: (hs_id, hs_text, cn_text, split)"""
    dataset = Dataset(tag=tag)
    for hs_id, hs_text, cn_text, split in rows:
        if hs_id not in dataset.instances:
            dataset.instances[hs_id] = HsInstance(
                id=hs_id, text=hs_text, dataset=tag, split=split
            )
        dataset.pairs.append(ReferenceCn(hs_id=hs_id, text=cn_text))
    return dataset


@pytest.fixture
def tiny_dataset() -> Dataset:
    return make_dataset(
        [
            ("h1", "claim one", "reply one a", "test"),
            ("h1", "claim one", "reply one b", "test"),
            ("h2", "claim two", "reply two", "test"),
            ("h3", "claim three", "reply three", "train"),
        ]
    )


@pytest.fixture
def golden_metric_cases() -> list[dict]:
    return json.loads((DATA_DIR / "metric_golden.json").read_text())


@pytest.fixture
def verdict_battery() -> list[dict]:
    return json.loads((DATA_DIR / "verdict_battery.json").read_text())


@pytest.fixture
def rankings_fixture_path() -> Path:
    return PKG_DATA / "human_vs_judge_rankings.json"
