"""Correlation and agreement statistics.

Spearman's rho (average fractional ranks), Pearson's r with a two-sided
t-distribution p-value, Cohen's kappa, majority voting, and the
method-by-method correlation matrix. Everything is implemented directly
from the definitions; the test suite cross-checks against independent
reference implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UndefinedCorrelationError, UndefinedKappaError

OUTCOMES = ("A", "B", "Tie")


# ---------------------------------------------------------------------------
# Rank helpers


def fractional_ranks(values: list[float]) -> list[float]:
    """Average fractional ranks (1-based); tied values share the mean rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _pearson_r(x: list[float], y: list[float]) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("zero variance input")
    return sxy / math.sqrt(sxx * syy)


# ---------------------------------------------------------------------------
# Student-t tail via the regularized incomplete beta function


def _betacf(a: float, b: float, x: float) -> float:
    # continued-fraction evaluation (modified Lentz)
    max_iter, eps, fpmin = 300, 3e-14, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, dof: int) -> float:
    """Two-sided tail probability of Student's t."""
    if math.isinf(t):
        return 0.0
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


# ---------------------------------------------------------------------------
# Operations


def spearman(scores_x: dict[str, float], scores_y: dict[str, float]) -> float:
    """Spearman's rank correlation over two system score maps.

    Equals 1 - 6*sum(d^2)/(n(n^2-1)) when there are no ties.
    """
    if set(scores_x) != set(scores_y):
        raise UndefinedCorrelationError("score maps must cover the same systems")
    keys = sorted(scores_x)
    if len(keys) < 3:
        raise UndefinedCorrelationError("spearman requires at least 3 systems")
    x = [float(scores_x[k]) for k in keys]
    y = [float(scores_y[k]) for k in keys]
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise UndefinedCorrelationError("all-equal values have no rank order")
    return _pearson_r(fractional_ranks(x), fractional_ranks(y))


def pearson(x: list[float], y: list[float]) -> tuple[float, float]:
    """Sample Pearson r and two-sided p-value (t distribution, n-2 dof)."""
    if len(x) != len(y):
        raise UndefinedCorrelationError("input lengths differ")
    n = len(x)
    if n < 3:
        raise UndefinedCorrelationError("pearson requires at least 3 points")
    r = _pearson_r([float(v) for v in x], [float(v) for v in y])
    if abs(r) >= 1.0:
        return (1.0 if r > 0 else -1.0), 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, t_sf_two_sided(t, n - 2)


@dataclass
class KappaReport:
    """Cohen's kappa between one annotator pair."""

    annotator_a: str
    annotator_b: str
    kappa: float
    n_items: int
    observed_agreement: float
    expected_agreement: float
    categories: tuple[str, ...]
    contingency: dict[tuple[str, str], int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "annotator_a": self.annotator_a,
            "annotator_b": self.annotator_b,
            "kappa": self.kappa,
            "n_items": self.n_items,
            "observed_agreement": self.observed_agreement,
            "expected_agreement": self.expected_agreement,
            "categories": list(self.categories),
            "contingency": {f"{a}|{b}": c for (a, b), c in sorted(self.contingency.items())},
        }


def cohens_kappa(
    labels_a: list[str],
    labels_b: list[str],
    annotator_a: str = "a",
    annotator_b: str = "b",
    categories: tuple[str, ...] | None = None,
) -> KappaReport:
    """Plain (unweighted) Cohen's kappa over a shared item set."""
    if len(labels_a) != len(labels_b):
        raise UndefinedKappaError("label lists must align item by item")
    n = len(labels_a)
    if n == 0:
        raise UndefinedKappaError("no shared items")
    cats = categories or tuple(sorted(set(labels_a) | set(labels_b)))

    contingency: dict[tuple[str, str], int] = {}
    for a, b in zip(labels_a, labels_b):
        contingency[(a, b)] = contingency.get((a, b), 0) + 1
    p_o = sum(c for (a, b), c in contingency.items() if a == b) / n
    p_e = sum(
        (labels_a.count(cat) / n) * (labels_b.count(cat) / n) for cat in cats
    )
    if p_e >= 1.0:
        raise UndefinedKappaError("expected agreement is 1 (both annotators constant)")
    return KappaReport(
        annotator_a=annotator_a,
        annotator_b=annotator_b,
        kappa=(p_o - p_e) / (1.0 - p_e),
        n_items=n,
        observed_agreement=p_o,
        expected_agreement=p_e,
        categories=cats,
        contingency=contingency,
    )


def majority_vote(choices: list[str]) -> str:
    """Plurality outcome; any tie in the top counts resolves to Tie."""
    if not choices:
        raise UndefinedKappaError("majority_vote requires at least one choice")
    for c in choices:
        if c not in OUTCOMES:
            raise UndefinedKappaError(f"unknown outcome {c!r}")
    counts = {o: choices.count(o) for o in OUTCOMES if o in choices}
    top = max(counts.values())
    winners = [o for o, c in counts.items() if c == top]
    return winners[0] if len(winners) == 1 else "Tie"


# ---------------------------------------------------------------------------
# Correlation matrix


@dataclass
class CorrelationReport:
    """Pairwise Spearman matrix over ranking methods, Human row last."""

    labels: list[str]
    spearman_matrix: list[list[float | None]]
    pearson_pairs: dict[tuple[str, str], tuple[float, float]] | None = None

    def to_dict(self) -> dict:
        out: dict = {"labels": self.labels, "spearman_matrix": self.spearman_matrix}
        if self.pearson_pairs is not None:
            out["pearson_pairs"] = {
                f"{a}|{b}": {"r": r, "p_value": p}
                for (a, b), (r, p) in sorted(self.pearson_pairs.items())
            }
        return out

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.labels)]
        for label, row in zip(self.labels, self.spearman_matrix):
            cells = ["" if v is None else f"{v:.4f}" for v in row]
            lines.append(label + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(lbl) for lbl in self.labels) + 2
        header = " " * width + "".join(f"{lbl:>{width}}" for lbl in self.labels)
        lines = [header]
        for label, row in zip(self.labels, self.spearman_matrix):
            cells = "".join(
                f"{'--':>{width}}" if v is None else f"{v:>{width}.2f}" for v in row
            )
            lines.append(f"{label:<{width}}" + cells)
        return "\n".join(lines) + "\n"


def correlation_matrix(
    rankings: dict[str, dict[str, float]],
    with_pearson: bool = False,
) -> CorrelationReport:
    """Pairwise Spearman over all ranking methods sharing one system set.

    Cells where the correlation is undefined (constant scores) are None.
    The "Human" method, when present, is ordered last so the final
    row/column reads as agreement with human preference.
    """
    if len(rankings) < 2:
        raise UndefinedCorrelationError("need at least two ranking methods")
    labels = [m for m in rankings if m != "Human"] + (["Human"] if "Human" in rankings else [])
    key_sets = {m: set(v) for m, v in rankings.items()}
    first = key_sets[labels[0]]
    for m, keys in key_sets.items():
        if keys != first:
            raise UndefinedCorrelationError(f"method {m!r} covers a different system set")

    matrix: list[list[float | None]] = []
    for a in labels:
        row: list[float | None] = []
        for b in labels:
            if a == b:
                row.append(1.0)
                continue
            try:
                row.append(spearman(rankings[a], rankings[b]))
            except UndefinedCorrelationError:
                row.append(None)
        matrix.append(row)

    pairs = None
    if with_pearson:
        pairs = {}
        keys = sorted(first)
        for i, a in enumerate(labels):
            for b in labels[i + 1 :]:
                try:
                    pairs[(a, b)] = pearson(
                        [rankings[a][k] for k in keys], [rankings[b][k] for k in keys]
                    )
                except UndefinedCorrelationError:
                    continue
    return CorrelationReport(labels=labels, spearman_matrix=matrix, pearson_pairs=pairs)
