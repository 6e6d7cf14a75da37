"""Loading, statistics, and deduplication of HS-CN pair datasets.

A dataset is a flat list of pairs: each pair joins a hate-speech instance
(by id) with one reference counter-narrative. The same HS instance may
appear in many pairs. Splits are read from the file, never invented;
`assign_splits` exists only for custom datasets that ship without them.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import EmptyDatasetError, SchemaError

VALID_SPLITS = ("train", "validation", "test")
VALID_FORMATS = ("csv", "jsonl")

_COLUMNS = ("hs_id", "hs_text", "cn_text", "target", "split")


@dataclass(frozen=True)
class HsInstance:
    """One hate-speech input utterance."""

    id: str
    text: str
    target: str | None = None
    dataset: str = "custom"
    split: str = "train"


@dataclass(frozen=True)
class ReferenceCn:
    """A reference counter-narrative answering one HS instance."""

    hs_id: str
    text: str


@dataclass(frozen=True)
class CorpusStats:
    pair_count: int
    unique_hs: int
    unique_cn: int
    avg_cn_per_hs: float
    avg_words_per_cn: float


@dataclass
class Dataset:
    """An ordered collection of (HsInstance, ReferenceCn) pairs."""

    tag: str = "custom"
    instances: dict[str, HsInstance] = field(default_factory=dict)
    pairs: list[ReferenceCn] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def hs_for(self, pair: ReferenceCn) -> HsInstance:
        return self.instances[pair.hs_id]

    def references_for(self, hs_id: str) -> list[ReferenceCn]:
        return [p for p in self.pairs if p.hs_id == hs_id]

    def split_subset(self, split: str) -> Dataset:
        """Pairs whose HS instance carries the given split label."""
        keep = [p for p in self.pairs if self.instances[p.hs_id].split == split]
        ids = {p.hs_id for p in keep}
        return Dataset(
            tag=self.tag,
            instances={i: h for i, h in self.instances.items() if i in ids},
            pairs=keep,
        )

    def split_sizes(self) -> dict[str, int]:
        sizes = {s: 0 for s in VALID_SPLITS}
        for pair in self.pairs:
            sizes[self.instances[pair.hs_id].split] += 1
        return sizes


def count_words(text: str) -> int:
    """Word count by Unicode-whitespace splitting after trimming."""
    return len(text.split())


def _validate_row(row: dict, line: int) -> dict:
    for col in ("hs_id", "hs_text", "cn_text", "split"):
        if row.get(col) is None:
            raise SchemaError("missing required field", field=col, line=line)
    hs_text = str(row["hs_text"]).strip()
    cn_text = str(row["cn_text"]).strip()
    if not hs_text:
        raise SchemaError("hs_text is empty", field="hs_text", line=line)
    if not cn_text:
        raise SchemaError("cn_text is empty", field="cn_text", line=line)
    split = str(row["split"]).strip()
    if split not in VALID_SPLITS:
        raise SchemaError(
            f"split must be one of {VALID_SPLITS}, got {split!r}", field="split", line=line
        )
    target = row.get("target")
    if target is not None:
        target = str(target).strip() or None
    return {
        "hs_id": str(row["hs_id"]).strip(),
        "hs_text": hs_text,
        "cn_text": cn_text,
        "target": target,
        "split": split,
    }


def _iter_rows(path: Path, format: str):
    if format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return
            missing = [c for c in ("hs_id", "hs_text", "cn_text", "split") if c not in reader.fieldnames]
            if missing:
                raise SchemaError("missing required column", field=missing[0], line=1)
            for i, row in enumerate(reader, start=2):
                yield i, row
    else:
        with path.open(encoding="utf-8") as fh:
            for i, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"invalid JSON: {exc.msg}", line=i) from exc
                if not isinstance(obj, dict):
                    raise SchemaError("record is not an object", line=i)
                yield i, obj


def load_dataset(path: str | Path, format: str, tag: str = "custom") -> Dataset:
    """Load a dataset of HS-CN pairs from a CSV or JSONL file.

    Duplicate (hs_text, cn_text) rows are retained as distinct pairs. The
    same hs_id may recur across rows but must always carry the same text,
    target, and split.
    """
    path = Path(path)
    if format not in VALID_FORMATS:
        raise SchemaError(f"unknown format {format!r}; expected one of {VALID_FORMATS}")
    if not path.exists():
        raise SchemaError(f"dataset file not found: {path}")

    dataset = Dataset(tag=tag)
    for line, raw in _iter_rows(path, format):
        row = _validate_row(raw, line)
        hs = HsInstance(
            id=row["hs_id"],
            text=row["hs_text"],
            target=row["target"],
            dataset=tag,
            split=row["split"],
        )
        seen = dataset.instances.get(hs.id)
        if seen is None:
            dataset.instances[hs.id] = hs
        elif seen != hs:
            raise SchemaError(
                f"hs_id {hs.id!r} redefined with conflicting fields", field="hs_id", line=line
            )
        dataset.pairs.append(ReferenceCn(hs_id=hs.id, text=row["cn_text"]))

    if not dataset.pairs:
        raise EmptyDatasetError(f"no records in {path}")
    return dataset


def save_dataset(dataset: Dataset, path: str | Path, format: str) -> None:
    """Write a dataset back out in the load_dataset schema."""
    path = Path(path)
    if format not in VALID_FORMATS:
        raise SchemaError(f"unknown format {format!r}; expected one of {VALID_FORMATS}")
    rows = []
    for pair in dataset.pairs:
        hs = dataset.instances[pair.hs_id]
        rows.append(
            {
                "hs_id": hs.id,
                "hs_text": hs.text,
                "cn_text": pair.text,
                "target": hs.target or "",
                "split": hs.split,
            }
        )
    if format == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(_COLUMNS))
            writer.writeheader()
            writer.writerows(rows)
    else:
        with path.open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def corpus_stats(dataset: Dataset) -> CorpusStats:
    """Corpus statistics over exact string identity of HS and CN texts.

    avg_words_per_cn averages whitespace word counts over all pairs of the
    full dataset (not a single split), counting repeated CN texts once per
    pair they appear in.
    """
    if not dataset.pairs:
        raise EmptyDatasetError("corpus_stats over empty dataset")
    hs_texts = {dataset.instances[p.hs_id].text for p in dataset.pairs}
    cn_texts = {p.text for p in dataset.pairs}
    pair_count = len(dataset.pairs)
    total_words = sum(count_words(p.text) for p in dataset.pairs)
    return CorpusStats(
        pair_count=pair_count,
        unique_hs=len(hs_texts),
        unique_cn=len(cn_texts),
        avg_cn_per_hs=pair_count / len(hs_texts),
        avg_words_per_cn=total_words / pair_count,
    )


def dedup(dataset: Dataset, seed: int) -> Dataset:
    """Keep exactly one pair per distinct HS text, chosen seeded-uniformly.

    The choice for each HS text is seeded independently from (seed, text),
    so it is deterministic given the seed and insensitive to pair order.
    """
    groups: dict[str, list[int]] = {}
    for idx, pair in enumerate(dataset.pairs):
        groups.setdefault(dataset.instances[pair.hs_id].text, []).append(idx)

    keep: set[int] = set()
    for text, indices in groups.items():
        if len(indices) == 1:
            keep.add(indices[0])
        else:
            rng = random.Random(f"{seed}:{text}")
            keep.add(rng.choice(indices))

    pairs = [p for i, p in enumerate(dataset.pairs) if i in keep]
    ids = {p.hs_id for p in pairs}
    return Dataset(
        tag=dataset.tag,
        instances={i: h for i, h in dataset.instances.items() if i in ids},
        pairs=pairs,
    )


def assign_splits(
    dataset: Dataset,
    seed: int,
    train_fraction: float = 0.8,
    validation_fraction: float = 0.1,
) -> Dataset:
    """Seeded splitter for custom datasets that ship without split labels.

    Splits at the HS-instance level so no HS text leaks across splits.
    """
    if not 0 < train_fraction < 1 or not 0 <= validation_fraction < 1:
        raise SchemaError("split fractions must lie in (0, 1)")
    if train_fraction + validation_fraction >= 1:
        raise SchemaError("train + validation fractions must leave room for test")

    ids = sorted(dataset.instances)
    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    n_train = round(n * train_fraction)
    n_val = round(n * validation_fraction)
    assignment: dict[str, str] = {}
    for pos, hs_id in enumerate(ids):
        if pos < n_train:
            assignment[hs_id] = "train"
        elif pos < n_train + n_val:
            assignment[hs_id] = "validation"
        else:
            assignment[hs_id] = "test"

    instances = {i: replace(h, split=assignment[i]) for i, h in dataset.instances.items()}
    return Dataset(tag=dataset.tag, instances=instances, pairs=list(dataset.pairs))
