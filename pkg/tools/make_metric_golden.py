#!/usr/bin/env python3
"""Freeze the 20-case BLEU/ROUGE-L golden file from the brute-force oracle.

Run once; the output is committed at tests/data/metric_golden.json. Hand
cases cover the documented worked examples and edge behaviors; the rest
are seeded random sentences.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from oracles import oracle_bleu, oracle_rouge_l  # noqa: E402

HAND_CASES = [
    {"name": "identity", "candidate": "the cat sat", "references": ["the cat sat"], "max_n": 4},
    {"name": "worked-bp", "candidate": "the cat sat", "references": ["the cat sat down"], "max_n": 2},
    {"name": "disjoint", "candidate": "alpha beta gamma", "references": ["delta epsilon zeta"], "max_n": 4},
    {"name": "clipping", "candidate": "the the the", "references": ["the cat", "the the dog"], "max_n": 1},
    {"name": "punctuation", "candidate": "Hello, world!", "references": ["hello world"], "max_n": 2},
    {"name": "unicode", "candidate": "Café déjà vu", "references": ["café déjà vu encore"], "max_n": 2},
    {"name": "short-candidate-bp", "candidate": "the cat", "references": ["the cat sat down"], "max_n": 2},
    {"name": "long-candidate-bp1", "candidate": "the cat sat down now", "references": ["the cat"], "max_n": 2},
    {"name": "closest-ref-tie", "candidate": "a b c", "references": ["a b", "a b c d"], "max_n": 1},
    {"name": "eps-smoothing", "candidate": "x y z w", "references": ["x q y q z q w"], "max_n": 3},
    {"name": "rouge-worked", "candidate": "the cat sat", "references": ["the cat ran"], "max_n": 2},
]


def random_cases(rng: random.Random, count: int) -> list[dict]:
    vocab = "river stone light cloud path ember quiet field thorn gate wind harbor".split()
    cases = []
    for i in range(count):
        cand = " ".join(rng.choices(vocab, k=rng.randint(3, 14)))
        references = [
            " ".join(rng.choices(vocab, k=rng.randint(3, 14)))
            for _ in range(rng.randint(1, 3))
        ]
        cases.append(
            {
                "name": f"random-{i}",
                "candidate": cand,
                "references": references,
                "max_n": rng.choice([2, 3, 4]),
            }
        )
    return cases


def main() -> None:
    rng = random.Random(90125)
    cases = HAND_CASES + random_cases(rng, 20 - len(HAND_CASES))
    for case in cases:
        case["bleu"] = oracle_bleu(case["candidate"], case["references"], case["max_n"])
        p, r, f = oracle_rouge_l(case["candidate"], case["references"])
        case["rouge_l"] = [p, r, f]

    out = ROOT / "tests" / "data" / "metric_golden.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(cases, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {out} with {len(cases)} cases")


if __name__ == "__main__":
    main()
