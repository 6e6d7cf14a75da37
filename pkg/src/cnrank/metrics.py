"""Reference-based and reference-free text metrics.

All metrics share one tokenizer: lowercase, then split on Unicode
whitespace with punctuation characters kept as single-character tokens.
The tokenizer is deliberately simple so every score is reproducible from
the definition alone.

n-grams never cross text boundaries: each candidate or corpus entry is
tokenized on its own and its n-grams pooled where a metric needs
corpus-level counts.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

from .errors import UndefinedMetricError

logger = logging.getLogger(__name__)

DEFAULT_MAX_N = 4
DEFAULT_RR_WINDOW = 1000
BLEU_SMOOTH_EPS = 1e-9

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Deterministic metric tokenization: lowercase words and punctuation marks."""
    return _TOKEN.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


# ---------------------------------------------------------------------------
# BLEU


def _clipped_counts(candidate: Sequence[str], references: list[list[str]], n: int) -> tuple[int, int]:
    """(clipped matches, total candidate n-grams) for one order n."""
    cand_counts = Counter(_ngrams(candidate, n))
    total = sum(cand_counts.values())
    if total == 0:
        return 0, 0
    max_ref: Counter = Counter()
    for ref in references:
        for gram, count in Counter(_ngrams(ref, n)).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
    return clipped, total


def _closest_ref_length(cand_len: int, references: list[list[str]]) -> int:
    # best-match length: closest to the candidate, ties resolved to the shorter
    return min((abs(len(r) - cand_len), len(r)) for r in references)[1]


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len == 0:
        return 0.0
    if cand_len > ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def bleu(candidate: str, references: Sequence[str], max_n: int = DEFAULT_MAX_N) -> float:
    """Sentence BLEU with brevity penalty and multi-reference clipping.

    Orders the candidate is too short to produce are dropped from the
    geometric mean; zero precisions at the remaining orders are replaced
    by a tiny epsilon so short outputs still compare.
    """
    if not references:
        raise UndefinedMetricError("bleu requires at least one reference")
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    if not cand:
        logger.warning("bleu: empty candidate scored 0 by convention")
        return 0.0

    precisions = []
    for n in range(1, max_n + 1):
        clipped, total = _clipped_counts(cand, refs, n)
        if total == 0:
            continue
        precisions.append(clipped / total if clipped else BLEU_SMOOTH_EPS)
    if not precisions:
        return 0.0
    geo = math.exp(sum(math.log(p) for p in precisions) / len(precisions))
    bp = _brevity_penalty(len(cand), _closest_ref_length(len(cand), refs))
    return bp * geo


def corpus_bleu(
    candidates: Sequence[str],
    references_per_candidate: Sequence[Sequence[str]],
    max_n: int = DEFAULT_MAX_N,
) -> float:
    """Corpus-level BLEU: n-gram counts pooled over segments, no smoothing."""
    if len(candidates) != len(references_per_candidate):
        raise UndefinedMetricError("corpus_bleu requires one reference list per candidate")
    if not candidates:
        raise UndefinedMetricError("corpus_bleu over empty candidate list")

    clipped_total = [0] * max_n
    count_total = [0] * max_n
    cand_len_sum = 0
    ref_len_sum = 0
    for candidate, references in zip(candidates, references_per_candidate):
        if not references:
            raise UndefinedMetricError("corpus_bleu: candidate without references")
        cand = tokenize(candidate)
        refs = [tokenize(r) for r in references]
        if not cand:
            logger.warning("corpus_bleu: empty candidate contributes nothing")
            continue
        cand_len_sum += len(cand)
        ref_len_sum += _closest_ref_length(len(cand), refs)
        for n in range(1, max_n + 1):
            clipped, total = _clipped_counts(cand, refs, n)
            clipped_total[n - 1] += clipped
            count_total[n - 1] += total

    precisions = []
    for clipped, total in zip(clipped_total, count_total):
        if total == 0:
            continue
        if clipped == 0:
            return 0.0
        precisions.append(clipped / total)
    if not precisions:
        return 0.0
    geo = math.exp(sum(math.log(p) for p in precisions) / len(precisions))
    return _brevity_penalty(cand_len_sum, ref_len_sum) * geo


# ---------------------------------------------------------------------------
# ROUGE-L


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            curr.append(prev[j - 1] + 1 if x == y else max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: str, references: Sequence[str]) -> tuple[float, float, float]:
    """ROUGE-L (precision, recall, F1); multi-reference takes the best F1."""
    if not references:
        raise UndefinedMetricError("rouge_l requires at least one reference")
    cand = tokenize(candidate)
    if not cand:
        logger.warning("rouge_l: empty candidate scored 0 by convention")
        return 0.0, 0.0, 0.0

    best = (0.0, 0.0, 0.0)
    for reference in references:
        ref = tokenize(reference)
        if not ref:
            continue
        lcs = _lcs_length(cand, ref)
        p = lcs / len(cand)
        r = lcs / len(ref)
        f = 2 * p * r / (p + r) if p + r else 0.0
        if f > best[2]:
            best = (p, r, f)
    return best


# ---------------------------------------------------------------------------
# BERTScore


class EmbeddingProvider(Protocol):
    """Returns one unit-normalizable vector per token (or per text unit)."""

    def encode(self, text: str) -> list[list[float]]: ...


def _normalize(vec: Sequence[float]) -> list[float]:
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0:
        return [0.0] * len(vec)
    return [x / norm for x in vec]


def _greedy_f1(cand_vecs: list[list[float]], ref_vecs: list[list[float]]) -> float:
    cand = [_normalize(v) for v in cand_vecs]
    ref = [_normalize(v) for v in ref_vecs]
    sim = [[sum(a * b for a, b in zip(c, r)) for r in ref] for c in cand]
    precision = sum(max(row) for row in sim) / len(cand)
    recall = sum(max(sim[i][j] for i in range(len(cand))) for j in range(len(ref))) / len(ref)
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def bertscore_f1(candidate: str, references: Sequence[str], provider: EmbeddingProvider) -> float:
    """Greedy-matching embedding similarity F1; multi-reference max.

    No baseline rescaling is applied; scores live in [-1, 1]. Provider
    failures propagate so callers can mark the metric absent.
    """
    if not references:
        raise UndefinedMetricError("bertscore requires at least one reference")
    cand_vecs = provider.encode(candidate)
    if not cand_vecs:
        raise UndefinedMetricError("provider returned no vectors for candidate")
    best = -1.0
    for reference in references:
        ref_vecs = provider.encode(reference)
        if not ref_vecs:
            continue
        best = max(best, _greedy_f1(cand_vecs, ref_vecs))
    if best == -1.0:
        raise UndefinedMetricError("provider returned no vectors for any reference")
    return best


# ---------------------------------------------------------------------------
# Repetition Rate and Novelty


def _window_partition(token_lists: list[list[str]], window: int) -> list[list[list[str]]]:
    """Greedy partition of whole texts into windows of >= `window` tokens.

    Texts are never split, so n-grams stay within their text; a corpus
    shorter than the window yields a single whole-corpus window.
    """
    windows: list[list[list[str]]] = []
    current: list[list[str]] = []
    budget = 0
    for tokens in token_lists:
        current.append(tokens)
        budget += len(tokens)
        if budget >= window:
            windows.append(current)
            current = []
            budget = 0
    if current:
        if windows:
            windows[-1].extend(current)
        else:
            windows.append(current)
    return windows


def _nonsingleton_fraction(token_lists: list[list[str]], n: int) -> float:
    counts: Counter = Counter()
    for tokens in token_lists:
        counts.update(_ngrams(tokens, n))
    if not counts:
        return 0.0
    repeated = sum(1 for c in counts.values() if c > 1)
    return repeated / len(counts)


def repetition_rate(
    corpus: Sequence[str],
    max_n: int = DEFAULT_MAX_N,
    window: int = DEFAULT_RR_WINDOW,
) -> float:
    """Windowed repetition rate, scaled by 100.

    Per window: geometric mean over n = 1..max_n of the fraction of
    n-gram types occurring more than once (orders with no n-grams count
    as fraction 0). The result averages the window values.
    """
    if not corpus:
        raise UndefinedMetricError("repetition_rate over empty corpus")
    token_lists = [tokenize(t) for t in corpus]
    if sum(len(t) for t in token_lists) < max_n:
        raise UndefinedMetricError(f"corpus shorter than max_n={max_n} tokens")

    window_scores = []
    for bucket in _window_partition(token_lists, window):
        fractions = [_nonsingleton_fraction(bucket, n) for n in range(1, max_n + 1)]
        if any(f == 0.0 for f in fractions):
            window_scores.append(0.0)
        else:
            window_scores.append(math.exp(sum(math.log(f) for f in fractions) / max_n))
    return 100.0 * sum(window_scores) / len(window_scores)


def novelty(
    generated_corpus: Sequence[str],
    train_corpus: Sequence[str],
    max_n: int = DEFAULT_MAX_N,
) -> float:
    """Share of the generated corpus's repeated n-grams absent from training text.

    Per order n, takes the generated n-gram types occurring more than
    once and measures the fraction not present anywhere in the train
    corpus; orders with no repeated n-grams are skipped and the rest
    averaged. Higher means more novel.
    """
    if not generated_corpus or not train_corpus:
        raise UndefinedMetricError("novelty requires non-empty generated and train corpora")
    gen_lists = [tokenize(t) for t in generated_corpus]
    train_lists = [tokenize(t) for t in train_corpus]

    values = []
    for n in range(1, max_n + 1):
        counts: Counter = Counter()
        for tokens in gen_lists:
            counts.update(_ngrams(tokens, n))
        repeated = {gram for gram, c in counts.items() if c > 1}
        if not repeated:
            continue
        train_grams = set()
        for tokens in train_lists:
            train_grams.update(_ngrams(tokens, n))
        overlap = len(repeated & train_grams) / len(repeated)
        values.append(1.0 - overlap)
    if not values:
        raise UndefinedMetricError("generated corpus has no non-singleton n-gram")
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# Per-system report


@dataclass
class MetricReport:
    """All metric scores for one system over one candidate set."""

    system_id: str
    bleu: float
    rouge_l_f: float
    repetition_rate: float
    mean_generation_length: float
    novelty: float | None = None
    novelty_overlap: float | None = None
    bertscore_f1: float | None = None
    bleu_level: str = "corpus"

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def system_report(
    system_id: str,
    candidates: Sequence[str],
    references_per_candidate: Sequence[Sequence[str]],
    train_corpus: Sequence[str] | None = None,
    provider: EmbeddingProvider | None = None,
    max_n: int = DEFAULT_MAX_N,
    rr_window: int = DEFAULT_RR_WINDOW,
    bleu_level: str = "corpus",
) -> MetricReport:
    """Compute the full metric battery for one system.

    BLEU is corpus-level by default (sentence-level mean behind the
    `bleu_level` flag); ROUGE-L reports the mean best-F1 over candidates.
    BERTScore and Novelty are absent when no provider / train corpus is
    given, and Novelty is also absent when undefined for the corpus.
    """
    if bleu_level == "corpus":
        bleu_score = corpus_bleu(candidates, references_per_candidate, max_n=max_n)
    elif bleu_level == "sentence":
        scores = [bleu(c, r, max_n=max_n) for c, r in zip(candidates, references_per_candidate)]
        bleu_score = sum(scores) / len(scores)
    else:
        raise UndefinedMetricError(f"unknown bleu level {bleu_level!r}")

    rouge_scores = [rouge_l(c, r)[2] for c, r in zip(candidates, references_per_candidate)]
    rouge_mean = sum(rouge_scores) / len(rouge_scores)

    report = MetricReport(
        system_id=system_id,
        bleu=bleu_score,
        rouge_l_f=rouge_mean,
        repetition_rate=repetition_rate(candidates, max_n=max_n, window=rr_window),
        mean_generation_length=(
            sum(len(c.split()) for c in candidates) / len(candidates)
        ),
        bleu_level=bleu_level,
    )
    if train_corpus is not None:
        try:
            report.novelty = novelty(candidates, train_corpus, max_n=max_n)
            report.novelty_overlap = 1.0 - report.novelty
        except UndefinedMetricError as exc:
            logger.warning("novelty undefined for %s: %s", system_id, exc)
    if provider is not None:
        try:
            scores = [
                bertscore_f1(c, r, provider)
                for c, r in zip(candidates, references_per_candidate)
            ]
            report.bertscore_f1 = sum(scores) / len(scores)
        except Exception as exc:  # provider failures leave the metric absent
            logger.warning("bertscore provider failed for %s: %s", system_id, exc)
    return report
