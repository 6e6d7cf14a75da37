"""Candidate counter-narrative generation.

One CN per (system, HS) pair, obtained from an OpenAI-compatible endpoint
or a deterministic mock. Generation is terminated at the first newline of
the completion; refusal-looking outputs are kept but flagged.
"""

from __future__ import annotations

import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import httpx

from .corpus import HsInstance, ReferenceCn
from .errors import GenerationError, MissingReferenceError, SchemaError
from .promptkit import (
    GOLD_SYSTEM_ID,
    SystemDescriptor,
    TemplateRegistry,
    default_registry,
    render_generation_prompt,
)
from .store import RunStore

logger = logging.getLogger(__name__)

# Outputs matching any of these substrings (case-insensitive) are flagged
# as refusals but still enter the tournament.
DEFAULT_REFUSAL_PATTERNS = (
    "i cannot fulfill your request",
    "i can't fulfill your request",
    "i cannot provide a response",
    "not within my programming or ethical guidelines",
)

TOKEN_ENV_VAR = "CNRANK_API_TOKEN"

# Families served through the plain-completions endpoint; everything else
# goes through chat-completions with the family wrapping applied
# client-side so the exact prompt bytes are preserved.
COMPLETION_FAMILIES = ("mistral",)


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    max_new_tokens: int = 256
    stop: tuple[str, ...] = ("\n",)


@dataclass
class CnCandidate:
    """One generated (or gold) counter-narrative for one HS instance."""

    id: str
    hs_id: str
    system_id: str
    text: str
    refusal_flag: bool = False
    meta: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "hs_id": self.hs_id,
            "system_id": self.system_id,
            "text": self.text,
            "refusal_flag": self.refusal_flag,
            "meta": self.meta,
        }

    @classmethod
    def from_record(cls, record: dict) -> "CnCandidate":
        return cls(
            id=record["id"],
            hs_id=record["hs_id"],
            system_id=record["system_id"],
            text=record["text"],
            refusal_flag=bool(record["refusal_flag"]),
            meta=record.get("meta", {}),
        )


@dataclass
class GenerationRun:
    run_id: str
    systems: list[str]
    hs_count: int
    completed: int
    failures: list[dict] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.completed == len(self.systems) * self.hs_count and not self.failures


class Generator(Protocol):
    """Returns the raw completion text for a rendered prompt."""

    def complete(self, system: SystemDescriptor, prompt: str, decoding: DecodingParams) -> str: ...


def is_refusal(text: str, patterns: Sequence[str] = DEFAULT_REFUSAL_PATTERNS) -> bool:
    lowered = text.lower()
    return any(p.lower() in lowered for p in patterns)


def truncate_at_newline(text: str) -> str:
    """Inference-time stopping rule: keep only text before the first newline."""
    return text.split("\n", 1)[0].strip()


class MockGenerator:
    """Deterministic offline generator for tests and dry runs.

    The completion is a pure function of (system id, prompt, seed), so
    re-runs and different parallelism degrees produce identical output.
    """

    WORDS = (
        "every community deserves respect and facts show a different story "
        "people contribute value history teaches understanding not fear"
    ).split()

    def __init__(self, seed: int = 0, refusal_every: int = 0):
        self.seed = seed
        self.refusal_every = refusal_every

    def complete(self, system: SystemDescriptor, prompt: str, decoding: DecodingParams) -> str:
        rng = random.Random(f"{self.seed}:{system.id}:{prompt}")
        if self.refusal_every and rng.randrange(self.refusal_every) == 0:
            return "I apologize, but I cannot fulfill your request."
        words = rng.choices(self.WORDS, k=rng.randint(8, 20))
        return " ".join(words) + "\nrole-play continuation that must be cut"


class HttpGenerator:
    """OpenAI-compatible chat/completions client with bounded retries."""

    def __init__(
        self,
        timeout: float = 60.0,
        retries: int = 2,
        backoff: float = 0.5,
        token_env: str = TOKEN_ENV_VAR,
        transport: httpx.BaseTransport | None = None,
    ):
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.token_env = token_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env) or os.environ.get("OPENAI_API_KEY")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, system: SystemDescriptor, prompt: str, decoding: DecodingParams) -> str:
        if not system.endpoint:
            raise SchemaError(f"system {system.id!r} has no endpoint and no mock is configured")
        base = system.endpoint.rstrip("/")
        if system.family in COMPLETION_FAMILIES:
            url = f"{base}/completions"
            payload = {
                "prompt": prompt,
                "temperature": decoding.temperature,
                "max_tokens": decoding.max_new_tokens,
                "stop": list(decoding.stop),
            }
        else:
            url = f"{base}/chat/completions"
            payload = {
                "messages": [{"role": "user", "content": prompt}],
                "temperature": decoding.temperature,
                "max_tokens": decoding.max_new_tokens,
                "stop": list(decoding.stop),
            }

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self._client.post(url, json=payload, headers=self._headers())
                response.raise_for_status()
                body = response.json()
                choice = body["choices"][0]
                if "message" in choice:
                    return choice["message"]["content"]
                return choice["text"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise GenerationError(
            f"generation failed for system {system.id!r}: {last_error}",
            attempts=self.retries + 1,
        )


def generate(
    system: SystemDescriptor,
    hs: HsInstance,
    generator: Generator,
    decoding: DecodingParams | None = None,
    refusal_patterns: Sequence[str] = DEFAULT_REFUSAL_PATTERNS,
    registry: TemplateRegistry | None = None,
) -> CnCandidate:
    """Generate one candidate CN, applying the newline-termination rule."""
    decoding = decoding or DecodingParams()
    registry = registry or default_registry()
    prompt = render_generation_prompt(system, hs, registry=registry)
    started = time.time()
    raw = generator.complete(system, prompt, decoding)
    text = truncate_at_newline(raw)
    if not text:
        raise GenerationError(f"empty completion for system {system.id!r}, hs {hs.id!r}")
    return CnCandidate(
        id=f"{system.id}::{hs.id}",
        hs_id=hs.id,
        system_id=system.id,
        text=text,
        refusal_flag=is_refusal(text, refusal_patterns),
        meta={
            "latency_s": round(time.time() - started, 4),
            "endpoint": system.endpoint or "mock",
            "template_version": "v1",
            "temperature": decoding.temperature,
            "max_new_tokens": decoding.max_new_tokens,
        },
    )


def gold_candidate(
    hs: HsInstance,
    references: Sequence[ReferenceCn],
    seed: int,
    system_id: str = GOLD_SYSTEM_ID,
) -> CnCandidate:
    """Enter one reference CN into the run as the gold pseudo-system.

    When several references exist, one is picked seeded-uniformly per HS
    id so the choice is stable across re-runs.
    """
    refs = [r for r in references if r.hs_id == hs.id]
    if not refs:
        raise MissingReferenceError(f"no reference CN for hs {hs.id!r}")
    rng = random.Random(f"{seed}:{hs.id}")
    chosen = refs[rng.randrange(len(refs))]
    text = truncate_at_newline(chosen.text)
    return CnCandidate(
        id=f"{system_id}::{hs.id}",
        hs_id=hs.id,
        system_id=system_id,
        text=text,
        refusal_flag=False,
        meta={"endpoint": "gold", "reference_count": len(refs)},
    )


def run_generation(
    systems: Sequence[SystemDescriptor],
    hs_set: Sequence[HsInstance],
    store: RunStore,
    generator: Generator,
    references: Sequence[ReferenceCn] = (),
    seed: int = 0,
    parallelism: int = 4,
    decoding: DecodingParams | None = None,
    refusal_patterns: Sequence[str] = DEFAULT_REFUSAL_PATTERNS,
    registry: TemplateRegistry | None = None,
) -> GenerationRun:
    """Produce one candidate per (system, hs), resumable and bounded-parallel.

    Already-stored (hs, system) candidates are skipped, so interrupting
    and re-running never duplicates records. Per-item failures are
    recorded and leave the run incomplete instead of aborting it.
    """
    if parallelism < 1:
        raise SchemaError("parallelism must be a positive integer")
    existing = store.keys("candidates")
    todo = [
        (system, hs)
        for system in systems
        for hs in hs_set
        if (hs.id, system.id) not in existing
    ]

    refs_by_hs: dict[str, list[ReferenceCn]] = {}
    for ref in references:
        refs_by_hs.setdefault(ref.hs_id, []).append(ref)

    def produce(system: SystemDescriptor, hs: HsInstance) -> CnCandidate:
        if system.mode == "gold":
            return gold_candidate(hs, refs_by_hs.get(hs.id, ()), seed, system_id=system.id)
        return generate(
            system, hs, generator,
            decoding=decoding, refusal_patterns=refusal_patterns, registry=registry,
        )

    failures: list[dict] = []
    done = 0
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = {pool.submit(produce, system, hs): (system, hs) for system, hs in todo}
        for future in as_completed(futures):
            system, hs = futures[future]
            try:
                candidate = future.result()
            except Exception as exc:
                logger.error("generation failed for (%s, %s): %s", system.id, hs.id, exc)
                failures.append({"system_id": system.id, "hs_id": hs.id, "error": str(exc)})
                continue
            store.append("candidates", candidate.to_record())
            done += 1

    wanted = {(hs.id, s.id) for s in systems for hs in hs_set}
    completed = len(wanted & store.keys("candidates"))
    run = GenerationRun(
        run_id=store.run_id,
        systems=[s.id for s in systems],
        hs_count=len(hs_set),
        completed=completed,
        failures=failures,
    )
    if not run.complete:
        logger.warning(
            "generation run incomplete: %d/%d candidates, %d failures",
            completed, len(systems) * len(hs_set), len(failures),
        )
    return run


def load_candidates(store: RunStore) -> dict[tuple[str, str], CnCandidate]:
    """Candidate lookup keyed by (hs_id, system_id)."""
    return {
        (r["hs_id"], r["system_id"]): CnCandidate.from_record(r)
        for r in store.load("candidates")
    }
