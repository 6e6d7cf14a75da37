#!/usr/bin/env python3
"""Generate the packaged stand-in corpora.

The shipped files are synthetic: neutral placeholder sentences arranged so
that pair counts, unique HS/CN counts, per-split sizes, and mean CN word
counts match the published statistics of the two public HS-CN corpora the
toolkit is calibrated against. No real hate speech is included.

Writes src/cnrank/data/conan.csv and src/cnrank/data/mtconan.jsonl.
"""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT_DIR = ROOT / "src" / "cnrank" / "data"

VOCAB = (
    "the a this that community people group members respect dignity history "
    "culture facts evidence research shows contribute society neighbours many "
    "individuals diverse experiences stories values work support each other "
    "understanding empathy data studies report economic public local every "
    "person deserves equal treatment rights claims generalising unfair single "
    "example cannot define millions instead consider listen learn shared"
).split()


def _sentence(rng: random.Random, uid: str, words: int) -> str:
    assert words >= 2
    return " ".join([uid] + rng.choices(VOCAB, k=words - 1))


def _word_budget(rng: random.Random, n_unique: int, n_reused: int, target_total: int,
                 lo: int, hi: int) -> list[int]:
    """Word counts for the unique CN texts.

    The first `n_reused` texts appear twice in the corpus, the rest once;
    counts are drawn uniformly then nudged so the weighted total is exact.
    """
    counts = [rng.randint(lo, hi) for _ in range(n_unique)]
    total = 2 * sum(counts[:n_reused]) + sum(counts[n_reused:])
    idx = n_reused  # adjust single-weight entries first
    while total != target_total:
        step = 1 if total < target_total else -1
        i = n_reused + (idx - n_reused) % (n_unique - n_reused) if n_unique > n_reused else idx % n_unique
        weight = 2 if i < n_reused else 1
        new = counts[i] + step
        if 3 <= new <= hi + 30:
            counts[i] = new
            total += step * weight
        idx += 1
    return counts


def _build_rows(name: str, seed: int, hs_plan: list[tuple[str, int, int]],
                n_unique_cn: int, avg_words_cn: float,
                targets: list[str]) -> list[dict]:
    """hs_plan: (split, number of HS instances, pairs per HS) blocks."""
    rng = random.Random(seed)
    hs_list: list[tuple[str, str, str, int]] = []  # (hs_id, text, split, n_pairs)
    serial = 0
    for split, n_hs, per_hs in hs_plan:
        for _ in range(n_hs):
            uid = f"{name}-h{serial:05d}"
            text = _sentence(rng, f"h{serial:05d}", rng.randint(8, 18))
            hs_list.append((uid, text, split, per_hs))
            serial += 1

    n_pairs = sum(n for _, _, _, n in hs_list)
    n_reused = n_pairs - n_unique_cn
    target_total = round(avg_words_cn * n_pairs)
    counts = _word_budget(rng, n_unique_cn, n_reused, target_total, lo=10,
                          hi=max(12, int(avg_words_cn * 1.45)))
    cn_texts = [_sentence(rng, f"c{i:05d}", counts[i]) for i in range(n_unique_cn)]

    rows = []
    pair_idx = 0
    for i, (hs_id, hs_text, split, per_hs) in enumerate(hs_list):
        for _ in range(per_hs):
            if pair_idx < n_unique_cn:
                cn = cn_texts[pair_idx]
            else:
                cn = cn_texts[pair_idx - n_unique_cn]
            rows.append(
                {
                    "hs_id": hs_id,
                    "hs_text": hs_text,
                    "cn_text": cn,
                    "target": targets[i % len(targets)],
                    "split": split,
                }
            )
            pair_idx += 1
    return rows


def _check(rows: list[dict], pairs: int, uhs: int, ucn: int, avg_cnhs: float,
           avg_words: float, split_sizes: dict[str, int]) -> None:
    assert len(rows) == pairs, len(rows)
    hs = {r["hs_text"] for r in rows}
    cn = {r["cn_text"] for r in rows}
    assert len(hs) == uhs, len(hs)
    assert len(cn) == ucn, len(cn)
    assert round(len(rows) / len(hs), 2) == avg_cnhs
    mean_words = sum(len(r["cn_text"].split()) for r in rows) / len(rows)
    assert abs(mean_words - avg_words) < 0.01, mean_words
    got = {"train": 0, "validation": 0, "test": 0}
    for r in rows:
        got[r["split"]] += 1
    assert got == split_sizes, got
    # splits are HS-disjoint
    by_text: dict[str, set[str]] = {}
    for r in rows:
        by_text.setdefault(r["hs_text"], set()).add(r["split"])
    assert all(len(s) == 1 for s in by_text.values())
    # no duplicated (hs, cn) row
    assert len({(r["hs_text"], r["cn_text"]) for r in rows}) == pairs


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    conan_rows = _build_rows(
        "conan",
        seed=20240601,
        hs_plan=[
            ("train", 273, 13), ("train", 107, 12),
            ("validation", 21, 13), ("validation", 22, 12),
            ("test", 78, 13), ("test", 22, 12),
        ],
        n_unique_cn=4040,
        avg_words_cn=19.48,
        targets=["MUSLIMS"],
    )
    _check(conan_rows, 6648, 523, 4040, 12.71, 19.48,
           {"train": 4833, "validation": 537, "test": 1278})
    with (OUT_DIR / "conan.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["hs_id", "hs_text", "cn_text", "target", "split"])
        writer.writeheader()
        writer.writerows(conan_rows)

    mt_rows = _build_rows(
        "mtconan",
        seed=20240602,
        hs_plan=[
            ("train", 770, 2), ("train", 1463, 1),
            ("validation", 257, 2), ("validation", 486, 1),
            ("test", 258, 2), ("test", 484, 1),
        ],
        n_unique_cn=4997,
        avg_words_cn=24.77,
        targets=["DISABLED", "JEWS", "LGBT+", "MIGRANTS", "MUSLIMS", "POC", "WOMEN", "OTHER"],
    )
    _check(mt_rows, 5003, 3718, 4997, 1.35, 24.77,
           {"train": 3003, "validation": 1000, "test": 1000})
    with (OUT_DIR / "mtconan.jsonl").open("w", encoding="utf-8") as fh:
        for row in mt_rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    print(f"wrote {OUT_DIR / 'conan.csv'} ({len(conan_rows)} pairs)")
    print(f"wrote {OUT_DIR / 'mtconan.jsonl'} ({len(mt_rows)} pairs)")


if __name__ == "__main__":
    main()
