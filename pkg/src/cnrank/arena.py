"""Pairwise tournament scheduling, adjudication, scoring, and ranking.

Every unordered pair of systems meets once per HS instance. The judge
sees the two answers in a per-tournament randomized presentation order
(recorded and undone before storing), the winner takes 1 point, the loser
0, and ties split 0.5/0.5. Normalized shares express points as a
percentage of all points disbursed.
"""

from __future__ import annotations

import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import httpx

from .corpus import HsInstance
from .errors import (
    EmptyScoreboardError,
    NetworkError,
    PlanError,
    SchemaError,
)
from .genclient import CnCandidate
from .promptkit import SystemDescriptor, TemplateRegistry, default_registry, render_judge_prompt
from .store import RunStore

logger = logging.getLogger(__name__)

SCORE_MIN, SCORE_MAX = 1.0, 10.0

ORDER_AS_IS = "as-is"
ORDER_SWAPPED = "swapped"


@dataclass(frozen=True)
class Side:
    system_id: str
    cn_text: str


@dataclass(frozen=True)
class Tournament:
    id: str
    hs_id: str
    hs_text: str
    side_a: Side
    side_b: Side
    presentation_order: str = ORDER_AS_IS
    dataset: str = "custom"

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "hs_id": self.hs_id,
            "hs_text": self.hs_text,
            "side_a": {"system_id": self.side_a.system_id, "cn_text": self.side_a.cn_text},
            "side_b": {"system_id": self.side_b.system_id, "cn_text": self.side_b.cn_text},
            "presentation_order": self.presentation_order,
            "dataset": self.dataset,
        }

    @classmethod
    def from_record(cls, r: dict) -> "Tournament":
        return cls(
            id=r["id"],
            hs_id=r["hs_id"],
            hs_text=r.get("hs_text", ""),
            side_a=Side(r["side_a"]["system_id"], r["side_a"]["cn_text"]),
            side_b=Side(r["side_b"]["system_id"], r["side_b"]["cn_text"]),
            presentation_order=r["presentation_order"],
            dataset=r.get("dataset", "custom"),
        )


@dataclass
class TournamentPlan:
    n_systems: int
    h_instances: int
    order_seed: int
    tournaments: list[Tournament] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tournaments)


@dataclass
class JudgeVerdict:
    tournament_id: str
    system_a: str
    system_b: str
    outcome: str  # A | B | Tie
    parse_status: str  # ok | recovered | failed
    score_a: float | None = None
    score_b: float | None = None
    judge_id: str = ""
    rationale: str | None = None
    raw_response: str = ""
    error: str | None = None  # transport failure; excluded from scoring
    hs_id: str = ""
    presentation_order: str = ORDER_AS_IS

    def to_record(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_record(cls, r: dict) -> "JudgeVerdict":
        return cls(**{k: r.get(k) for k in cls.__dataclass_fields__ if k in r})


@dataclass
class ScoreBoard:
    points: dict[str, float]
    total_tournaments: int

    @property
    def normalized_share(self) -> dict[str, float]:
        total = sum(self.points.values())
        if total == 0:
            return {s: 0.0 for s in self.points}
        return {s: 100.0 * p / total for s, p in self.points.items()}

    def to_dict(self) -> dict:
        return {
            "points": self.points,
            "total_tournaments": self.total_tournaments,
            "normalized_share": self.normalized_share,
        }


@dataclass(frozen=True)
class RankedSystem:
    rank: int
    system_id: str
    score: float


RankVector = list[RankedSystem]


# ---------------------------------------------------------------------------
# Scheduling


def schedule(
    systems: Sequence[SystemDescriptor | str],
    hs_set: Sequence[HsInstance],
    candidates: dict[tuple[str, str], CnCandidate],
    order_seed: int = 0,
    fixed_order: bool = False,
) -> TournamentPlan:
    """Build the full pairwise plan: C(n,2) tournaments per HS instance.

    Presentation order is decided by a seeded coin flip per tournament
    (all as-is under fixed_order) and recorded so adjudication can undo
    it. Missing candidates fail the plan up front, listing every absent
    (system, hs) pair.
    """
    system_ids = [s.id if isinstance(s, SystemDescriptor) else s for s in systems]
    if len(system_ids) < 2:
        raise PlanError("need at least two systems to schedule tournaments")
    if len(set(system_ids)) != len(system_ids):
        raise PlanError("duplicate system ids in roster")

    missing = [
        (sys_id, hs.id)
        for sys_id in system_ids
        for hs in hs_set
        if (hs.id, sys_id) not in candidates
    ]
    if missing:
        shown = ", ".join(f"({s}, {h})" for s, h in missing[:5])
        raise PlanError(
            f"{len(missing)} missing candidate(s), e.g. {shown}", missing=missing
        )

    # Opaque sequential ids: the id is handed to human annotators and must
    # not leak the system pairing.
    rng = random.Random(order_seed)
    tournaments = []
    for i in range(len(system_ids)):
        for j in range(i + 1, len(system_ids)):
            sys_a, sys_b = system_ids[i], system_ids[j]
            for hs in hs_set:
                order = ORDER_AS_IS if fixed_order or rng.random() < 0.5 else ORDER_SWAPPED
                tournaments.append(
                    Tournament(
                        id=f"t{len(tournaments):06d}",
                        hs_id=hs.id,
                        hs_text=hs.text,
                        side_a=Side(sys_a, candidates[(hs.id, sys_a)].text),
                        side_b=Side(sys_b, candidates[(hs.id, sys_b)].text),
                        presentation_order=order,
                        dataset=hs.dataset,
                    )
                )
    return TournamentPlan(
        n_systems=len(system_ids),
        h_instances=len(hs_set),
        order_seed=order_seed,
        tournaments=tournaments,
    )


# ---------------------------------------------------------------------------
# Verdict parsing


def _two_scores(line: str) -> tuple[float, float] | None:
    tokens = line.split()
    if len(tokens) != 2:
        return None
    try:
        a, b = float(tokens[0]), float(tokens[1])
    except ValueError:
        return None
    if not (SCORE_MIN <= a <= SCORE_MAX and SCORE_MIN <= b <= SCORE_MAX):
        return None
    return a, b


def parse_verdict(raw: str) -> tuple[float | None, float | None, str]:
    """Extract the two judge scores from a raw response.

    The contract asks for one line with exactly two numbers in [1, 10].
    A compliant first line parses as "ok"; otherwise the first later line
    with two such numbers is used and marked "recovered"; anything else
    is "failed". Never raises.
    """
    scores, status, _ = _parse_with_rationale(raw)
    if scores is None:
        return None, None, status
    return scores[0], scores[1], status


def _parse_with_rationale(raw: str) -> tuple[tuple[float, float] | None, str, str | None]:
    lines = raw.splitlines()
    if lines:
        scores = _two_scores(lines[0])
        if scores is not None:
            rest = "\n".join(lines[1:]).strip() or None
            return scores, "ok", rest
        for idx in range(1, len(lines)):
            scores = _two_scores(lines[idx])
            if scores is not None:
                rest = "\n".join(lines[idx + 1 :]).strip() or None
                return scores, "recovered", rest
    return None, "failed", None


def _outcome(score_a: float, score_b: float) -> str:
    if score_a > score_b:
        return "A"
    if score_b > score_a:
        return "B"
    return "Tie"


# ---------------------------------------------------------------------------
# Judges


class JudgeAdapter(Protocol):
    """Produces a raw response text for one A-vs-B matchup."""

    judge_id: str

    def judge(self, hs_text: str, answer_1: str, answer_2: str) -> str: ...


class LengthJudge:
    """Mock judge: longer answer wins.

    Scoring rule: a side's score is its whitespace word count clamped to
    [1, 10]; equal clamped counts tie. Order-insensitive by construction.
    """

    judge_id = "mock-length"

    def __init__(self, mode: str = "fast"):
        self.mode = mode

    def judge(self, hs_text: str, answer_1: str, answer_2: str) -> str:
        s1 = min(10, max(1, len(answer_1.split())))
        s2 = min(10, max(1, len(answer_2.split())))
        line = f"{s1} {s2}"
        if self.mode == "normal":
            line += "\nThe longer answer carries more detail."
        return line


class SeededJudge:
    """Mock judge with pseudo-random but reproducible per-side scores.

    Each side's score depends only on (seed, hs text, answer text), so
    presentation order cannot change the canonical result.
    """

    judge_id = "mock-seeded"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _score(self, hs_text: str, answer: str) -> int:
        return random.Random(f"{self.seed}:{hs_text}:{answer}").randint(1, 10)

    def judge(self, hs_text: str, answer_1: str, answer_2: str) -> str:
        return f"{self._score(hs_text, answer_1)} {self._score(hs_text, answer_2)}"


class ScriptedJudge:
    """Replays canned raw responses; for parse and failure testing."""

    judge_id = "mock-scripted"

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        self.calls = 0

    def judge(self, hs_text: str, answer_1: str, answer_2: str) -> str:
        raw = self.responses[self.calls % len(self.responses)]
        self.calls += 1
        if raw == "<transport-error>":
            raise NetworkError("scripted transport failure")
        return raw


class HttpJudge:
    """Remote judge over an OpenAI-compatible chat endpoint.

    Fast mode caps the response at the score line; normal mode leaves
    room for the explanation requested by the template.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "judge",
        mode: str = "fast",
        timeout: float = 120.0,
        temperature: float = 0.0,
        registry: TemplateRegistry | None = None,
        token_env: str = "CNRANK_JUDGE_TOKEN",
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.mode = mode
        self.temperature = temperature
        self.registry = registry or default_registry()
        self.judge_id = f"{model}-{mode}"
        self.token_env = token_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def judge(self, hs_text: str, answer_1: str, answer_2: str) -> str:
        prompt = render_judge_prompt(
            HsInstance(id="judge-input", text=hs_text), answer_1, answer_2,
            registry=self.registry,
        )
        import os

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": 16 if self.mode == "fast" else 512,
        }
        try:
            response = self._client.post(
                f"{self.endpoint}/chat/completions", json=payload, headers=headers
            )
            response.raise_for_status()
            return response.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise NetworkError(f"judge request failed: {exc}") from exc


# ---------------------------------------------------------------------------
# Adjudication


def adjudicate(tournament: Tournament, judge: JudgeAdapter, retries: int = 2) -> JudgeVerdict:
    """Judge one tournament and return the canonical verdict.

    The judge sees the answers in the tournament's presentation order;
    scores are swapped back to canonical sides before storing. Parse
    failures are retried, then stored as a flagged tie; transport
    failures are retried, then recorded with `error` set so scoring can
    exclude them.
    """
    if tournament.presentation_order == ORDER_SWAPPED:
        first, second = tournament.side_b.cn_text, tournament.side_a.cn_text
    else:
        first, second = tournament.side_a.cn_text, tournament.side_b.cn_text

    raw = ""
    scores = None
    status = "failed"
    rationale = None
    error: str | None = None
    for attempt in range(retries + 1):
        try:
            raw = judge.judge(tournament.hs_text, first, second)
        except NetworkError as exc:
            error = str(exc)
            if attempt < retries:
                time.sleep(0.05 * (2**attempt))
            continue
        error = None
        scores, status, rationale = _parse_with_rationale(raw)
        if status != "failed":
            break

    base = dict(
        tournament_id=tournament.id,
        system_a=tournament.side_a.system_id,
        system_b=tournament.side_b.system_id,
        judge_id=judge.judge_id,
        raw_response=raw,
        hs_id=tournament.hs_id,
        presentation_order=tournament.presentation_order,
    )
    if error is not None:
        return JudgeVerdict(outcome="Tie", parse_status="failed", error=error, **base)
    if scores is None:
        return JudgeVerdict(outcome="Tie", parse_status="failed", **base)

    s1, s2 = scores
    if tournament.presentation_order == ORDER_SWAPPED:
        score_a, score_b = s2, s1
    else:
        score_a, score_b = s1, s2
    return JudgeVerdict(
        outcome=_outcome(score_a, score_b),
        parse_status=status,
        score_a=score_a,
        score_b=score_b,
        rationale=rationale,
        **base,
    )


def adjudicate_plan(
    plan: TournamentPlan,
    judge: JudgeAdapter,
    store: RunStore,
    retries: int = 2,
    parallelism: int = 4,
    durable: bool = True,
) -> list[JudgeVerdict]:
    """Adjudicate every planned tournament, resumable and bounded-parallel."""
    if parallelism < 1:
        raise SchemaError("parallelism must be a positive integer")
    existing = store.keys("verdicts")
    todo = [t for t in plan.tournaments if (t.id,) not in existing]
    verdicts: list[JudgeVerdict] = []
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = {pool.submit(adjudicate, t, judge, retries): t for t in todo}
        for future in as_completed(futures):
            verdict = future.result()
            store.append("verdicts", verdict.to_record(), durable=durable)
            verdicts.append(verdict)
    return verdicts


# ---------------------------------------------------------------------------
# Scoring and ranking


def score(verdicts: Sequence[JudgeVerdict]) -> ScoreBoard:
    """Aggregate points: win 1, loss 0, tie 0.5 each.

    Verdicts flagged with a transport error are excluded from points (and
    from the tournament total); flagged parse failures count as ties so
    every judged tournament disburses exactly one point.
    """
    judged = [v for v in verdicts if v.error is None]
    if not judged:
        raise EmptyScoreboardError("no judged tournaments to score")
    points: dict[str, float] = {}
    for verdict in judged:
        points.setdefault(verdict.system_a, 0.0)
        points.setdefault(verdict.system_b, 0.0)
        if verdict.outcome == "A":
            points[verdict.system_a] += 1.0
        elif verdict.outcome == "B":
            points[verdict.system_b] += 1.0
        elif verdict.outcome == "Tie":
            points[verdict.system_a] += 0.5
            points[verdict.system_b] += 0.5
        else:
            raise SchemaError(f"unknown outcome {verdict.outcome!r}")
    return ScoreBoard(points=points, total_tournaments=len(judged))


def rank(board: ScoreBoard) -> RankVector:
    """Order systems by points, descending.

    The reported score is the normalized share. Exact point ties share
    the smaller rank and are listed in system-id order for determinism.
    """
    if not board.points:
        raise EmptyScoreboardError("cannot rank an empty scoreboard")
    shares = board.normalized_share
    ordered = sorted(board.points.items(), key=lambda kv: (-kv[1], kv[0]))
    ranked: RankVector = []
    for idx, (system_id, points) in enumerate(ordered):
        if idx > 0 and points == ordered[idx - 1][1]:
            rank_value = ranked[-1].rank
        else:
            rank_value = idx + 1
        ranked.append(RankedSystem(rank=rank_value, system_id=system_id, score=shares[system_id]))
    return ranked


def verdict_health(verdicts: Sequence[JudgeVerdict]) -> dict:
    """Run-health summary: parse failures, recoveries, transport errors."""
    total = len(verdicts)
    failed = sum(1 for v in verdicts if v.parse_status == "failed" and v.error is None)
    recovered = sum(1 for v in verdicts if v.parse_status == "recovered")
    errors = sum(1 for v in verdicts if v.error is not None)
    return {
        "total": total,
        "parse_ok": sum(1 for v in verdicts if v.parse_status == "ok"),
        "parse_recovered": recovered,
        "parse_failed": failed,
        "transport_errors": errors,
        "parse_failure_rate": failed / total if total else 0.0,
    }
