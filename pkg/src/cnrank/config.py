"""Run configuration: a YAML key-value document validated before any work.

Unknown keys are rejected so typos fail fast instead of silently using a
default. All randomness downstream derives from the single root seed.
"""

from __future__ import annotations

import random
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .promptkit import BUILTIN_FAMILIES


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetConfig(StrictModel):
    path: str
    format: str  # csv | jsonl
    tag: str = "custom"

    @model_validator(mode="after")
    def _check(self):
        if self.format not in ("csv", "jsonl"):
            raise ValueError(f"format must be csv or jsonl, got {self.format!r}")
        return self


class SystemConfig(StrictModel):
    id: str
    family: str
    mode: str  # zs | ft | gold
    endpoint: str | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.mode not in ("zs", "ft", "gold"):
            raise ValueError(f"mode must be zs, ft, or gold, got {self.mode!r}")
        if (self.family == "gold") != (self.mode == "gold"):
            raise ValueError("gold family and gold mode must be used together")
        return self


class GeneratorConfig(StrictModel):
    kind: str = "mock"  # mock | http
    mock_seed: int = 0
    mock_refusal_every: int = 0
    timeout_s: float = 60.0
    retries: int = 2
    temperature: float = 0.0
    max_new_tokens: int = 256

    @model_validator(mode="after")
    def _check(self):
        if self.kind not in ("mock", "http"):
            raise ValueError(f"generator kind must be mock or http, got {self.kind!r}")
        return self


class JudgeConfig(StrictModel):
    kind: str = "mock-length"  # mock-length | mock-seeded | http
    model: str = "judge"
    size_tag: str = ""
    mode: str = "fast"  # fast | normal
    retries: int = 2
    endpoint: str | None = None
    temperature: float = 0.0
    timeout_s: float = 120.0
    parse_failure_threshold: float = 0.2
    mock_seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.kind not in ("mock-length", "mock-seeded", "http"):
            raise ValueError(f"unknown judge kind {self.kind!r}")
        if self.mode not in ("fast", "normal"):
            raise ValueError("judge mode must be fast or normal")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http judge requires an endpoint")
        if not 0 <= self.parse_failure_threshold <= 1:
            raise ValueError("parse_failure_threshold must lie in [0, 1]")
        return self


class TournamentConfig(StrictModel):
    fixed_order: bool = False


class MetricsConfig(StrictModel):
    max_n: int = 4
    rr_window: int = 1000
    bleu_level: str = "corpus"  # corpus | sentence
    bertscore: bool = False
    embedding_endpoint: str | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.bleu_level not in ("corpus", "sentence"):
            raise ValueError("bleu_level must be corpus or sentence")
        if self.bertscore and not self.embedding_endpoint:
            raise ValueError("bertscore requires an embedding_endpoint")
        return self


class AnnotatorConfig(StrictModel):
    id: str
    token: str


class AnnotationConfig(StrictModel):
    annotators: list[AnnotatorConfig] = Field(default_factory=list)
    shared_fraction: float = 0.4
    feature_hs: int = 0  # HS instances entering the feature-rating queue
    feature_dataset: str | None = None
    guidelines_version: str = "a1"
    host: str = "127.0.0.1"
    port: int = 8777
    coordinator_token: str | None = None
    ui_dir: str | None = None

    @model_validator(mode="after")
    def _check(self):
        if not 0 <= self.shared_fraction <= 1:
            raise ValueError("shared_fraction must lie in [0, 1]")
        ids = [a.id for a in self.annotators]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate annotator ids")
        return self


class RunConfig(StrictModel):
    seed: int = 0
    parallelism: int = 4
    run_root: str = "runs"
    split: str = "test"  # which split feeds generation and tournaments
    datasets: list[DatasetConfig] = Field(default_factory=list)
    systems: list[SystemConfig] = Field(default_factory=list)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    judge: JudgeConfig = Field(default_factory=JudgeConfig)
    tournament: TournamentConfig = Field(default_factory=TournamentConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    annotation: AnnotationConfig = Field(default_factory=AnnotationConfig)
    templates: dict[str, str] = Field(default_factory=dict)  # family -> asset path

    @model_validator(mode="after")
    def _check(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be a positive integer")
        if self.split not in ("train", "validation", "test"):
            raise ValueError("split must be train, validation, or test")
        ids = [s.id for s in self.systems]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate system ids")
        known = set(BUILTIN_FAMILIES) | {"gold"} | set(self.templates)
        for system in self.systems:
            if system.family not in known:
                raise ValueError(
                    f"system {system.id!r} uses family {system.family!r} with no template"
                )
            if system.mode != "gold" and self.generator.kind == "http" and not system.endpoint:
                raise ValueError(f"system {system.id!r} needs an endpoint (http generator)")
        return self

    def stage_seed(self, stage: str) -> int:
        """Deterministic per-stage seed fanned out from the root seed."""
        return random.Random(f"{self.seed}:{stage}").randrange(2**31)

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a YAML run configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
