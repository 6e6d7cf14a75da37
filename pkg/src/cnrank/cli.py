"""Command-line pipeline: generate -> tournament -> metrics -> correlate -> serve.

Each stage reads only store artifacts, so a run can be replayed from any
point. Commands are idempotent with respect to completed work and hold a
per-run lock so only one command mutates a run directory at a time.

Exit codes: 0 success, 2 config, 3 data, 4 network, 5 health threshold.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import sys
from pathlib import Path

import click
from filelock import FileLock, Timeout

from . import arena, metrics as metrics_mod, service as service_mod
from .arena import HttpJudge, JudgeAdapter, LengthJudge, SeededJudge, Tournament, TournamentPlan
from .config import RunConfig, load_config
from .corpus import Dataset, HsInstance, ReferenceCn, load_dataset
from .embeddings import HttpEmbeddingProvider
from .errors import (
    CnRankError,
    ConfigError,
    DataError,
    HealthError,
    NetworkError,
)
from .genclient import (
    DecodingParams,
    GenerationRun,
    HttpGenerator,
    MockGenerator,
    load_candidates,
    run_generation,
)
from .promptkit import SystemDescriptor, TemplateRegistry, default_registry
from .service import AssignmentPlan, ServiceState, build_app, plan_assignments, plan_feature_tasks
from .store import RunStore

logger = logging.getLogger(__name__)

EXIT_CONFIG, EXIT_DATA, EXIT_NETWORK, EXIT_HEALTH = 2, 3, 4, 5


# ---------------------------------------------------------------------------
# Shared plumbing


def _load_datasets(config: RunConfig) -> list[Dataset]:
    if not config.datasets:
        raise ConfigError("config lists no datasets")
    return [load_dataset(d.path, d.format, tag=d.tag) for d in config.datasets]


def _split_instances(config: RunConfig, datasets: list[Dataset]) -> tuple[list[HsInstance], list[ReferenceCn]]:
    """HS instances and their references for the configured split, in
    stable dataset-then-file order."""
    hs_list: list[HsInstance] = []
    references: list[ReferenceCn] = []
    for dataset in datasets:
        subset = dataset.split_subset(config.split)
        hs_list.extend(subset.instances.values())
        references.extend(subset.pairs)
    if not hs_list:
        raise DataError(f"no HS instances in split {config.split!r}")
    return hs_list, references


def _train_corpus(datasets: list[Dataset]) -> list[str]:
    texts = []
    for dataset in datasets:
        texts.extend(p.text for p in dataset.split_subset("train").pairs)
    return texts


def _dataset_fingerprint(config: RunConfig) -> str:
    digest = hashlib.sha256()
    for d in config.datasets:
        digest.update(Path(d.path).read_bytes())
    return digest.hexdigest()


def _registry(config: RunConfig) -> TemplateRegistry:
    registry = default_registry()
    if config.templates:
        registry = TemplateRegistry.builtin()
        for family, path in config.templates.items():
            registry.register_file(family, path)
    return registry


def _systems(config: RunConfig) -> list[SystemDescriptor]:
    if not config.systems:
        raise ConfigError("config lists no systems")
    return [
        SystemDescriptor(id=s.id, family=s.family, mode=s.mode, endpoint=s.endpoint)
        for s in config.systems
    ]


def _generator(config: RunConfig):
    if config.generator.kind == "mock":
        return MockGenerator(
            seed=config.generator.mock_seed,
            refusal_every=config.generator.mock_refusal_every,
        )
    return HttpGenerator(timeout=config.generator.timeout_s, retries=config.generator.retries)


def _judge(config: RunConfig, registry: TemplateRegistry, mode: str | None = None) -> JudgeAdapter:
    judge_mode = mode or config.judge.mode
    if config.judge.kind == "mock-length":
        return LengthJudge(mode=judge_mode)
    if config.judge.kind == "mock-seeded":
        return SeededJudge(seed=config.judge.mock_seed)
    return HttpJudge(
        endpoint=config.judge.endpoint,
        model=config.judge.model,
        mode=judge_mode,
        timeout=config.judge.timeout_s,
        temperature=config.judge.temperature,
        registry=registry,
    )


def _open_store(config: RunConfig, run_id: str) -> RunStore:
    store = RunStore(config.run_root, run_id)
    store.write_run_info(
        config.snapshot(),
        dataset_fingerprint=_dataset_fingerprint(config),
        versions={"cnrank": _version(), "template": "v1"},
    )
    return store


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("cnrank")
    except Exception:
        return "unknown"


def _run_lock(config: RunConfig, run_id: str) -> FileLock:
    run_dir = Path(config.run_root) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    return FileLock(run_dir / ".lock", timeout=10)


# ---------------------------------------------------------------------------
# Pipeline stages (importable, CLI-independent)


def cmd_generate(config: RunConfig, run_id: str) -> GenerationRun:
    """Produce one candidate per (system, HS) for the configured split."""
    datasets = _load_datasets(config)
    hs_list, references = _split_instances(config, datasets)
    systems = _systems(config)
    registry = _registry(config)
    store = _open_store(config, run_id)
    with store:
        run = run_generation(
            systems,
            hs_list,
            store,
            _generator(config),
            references=references,
            seed=config.stage_seed("gold"),
            parallelism=config.parallelism,
            decoding=DecodingParams(
                temperature=config.generator.temperature,
                max_new_tokens=config.generator.max_new_tokens,
            ),
            registry=registry,
        )
        store.finalize_manifest()
    return run


def cmd_tournament(
    config: RunConfig,
    run_id: str,
    judge_mode: str | None = None,
    fixed_order: bool | None = None,
) -> dict:
    """Schedule all pairwise tournaments, adjudicate, score, and rank."""
    datasets = _load_datasets(config)
    hs_list, _ = _split_instances(config, datasets)
    systems = _systems(config)
    registry = _registry(config)
    store = _open_store(config, run_id)
    with store:
        candidates = load_candidates(store)
        plan = arena.schedule(
            systems,
            hs_list,
            candidates,
            order_seed=config.stage_seed("order"),
            fixed_order=config.tournament.fixed_order if fixed_order is None else fixed_order,
        )
        existing = store.keys("plan")
        for tournament in plan.tournaments:
            if (tournament.id,) not in existing:
                store.append("plan", tournament.to_record(), durable=False)

        judge = _judge(config, registry, mode=judge_mode)
        arena.adjudicate_plan(
            plan, judge, store,
            retries=config.judge.retries,
            parallelism=config.parallelism,
            durable=False,
        )
        verdicts = [arena.JudgeVerdict.from_record(r) for r in store.load("verdicts")]
        health = arena.verdict_health(verdicts)
        health["refusals_per_system"] = _refusal_counts(store)

        board = arena.score(verdicts)
        ranking = arena.rank(board)
        store.write_report("scoreboard.json", board.to_dict())
        store.write_report("rank.json", [r.__dict__ for r in ranking])
        store.write_report("health.json", health)
        store.finalize_manifest()

    if health["parse_failure_rate"] > config.judge.parse_failure_threshold:
        raise HealthError(
            f"judge parse-failure rate {health['parse_failure_rate']:.3f} exceeds "
            f"threshold {config.judge.parse_failure_threshold}"
        )
    return {"plan_size": len(plan), "scoreboard": board, "ranking": ranking, "health": health}


def _refusal_counts(store: RunStore) -> dict[str, int]:
    counts: dict[str, int] = {}
    for record in store.load("candidates"):
        if record.get("refusal_flag"):
            counts[record["system_id"]] = counts.get(record["system_id"], 0) + 1
    return counts


def cmd_metrics(config: RunConfig, run_id: str) -> list[metrics_mod.MetricReport]:
    """Reference-based and reference-free metric battery per system."""
    datasets = _load_datasets(config)
    hs_list, references = _split_instances(config, datasets)
    refs_by_hs: dict[str, list[str]] = {}
    for ref in references:
        refs_by_hs.setdefault(ref.hs_id, []).append(ref.text)
    train_corpus = _train_corpus(datasets)

    store = _open_store(config, run_id)
    with store:
        candidates = load_candidates(store)
        provider = None
        if config.metrics.bertscore and config.metrics.embedding_endpoint:
            provider = HttpEmbeddingProvider(config.metrics.embedding_endpoint)

        reports = []
        for system in _systems(config):
            texts, refs = [], []
            for hs in hs_list:
                candidate = candidates.get((hs.id, system.id))
                if candidate is None:
                    raise DataError(
                        f"no candidate for ({system.id}, {hs.id}); run generate first"
                    )
                texts.append(candidate.text)
                refs.append(refs_by_hs.get(hs.id, []))
            reports.append(
                metrics_mod.system_report(
                    system.id,
                    texts,
                    refs,
                    train_corpus=train_corpus or None,
                    provider=provider,
                    max_n=config.metrics.max_n,
                    rr_window=config.metrics.rr_window,
                    bleu_level=config.metrics.bleu_level,
                )
            )
        store.write_report(
            "metrics.jsonl",
            "\n".join(json.dumps(r.to_dict(), ensure_ascii=False) for r in reports) + "\n",
        )
        store.write_report("metrics.txt", _metrics_table(reports))
        store.finalize_manifest()
    return reports


def _metrics_table(reports: list[metrics_mod.MetricReport]) -> str:
    headers = ["system", "bleu", "rouge_l_f", "bertscore_f1", "rr", "novelty", "gen_len"]
    rows = [headers]
    for r in reports:
        rows.append([
            r.system_id,
            f"{r.bleu:.4f}",
            f"{r.rouge_l_f:.4f}",
            "-" if r.bertscore_f1 is None else f"{r.bertscore_f1:.4f}",
            f"{r.repetition_rate:.4f}",
            "-" if r.novelty is None else f"{r.novelty:.4f}",
            f"{r.mean_generation_length:.2f}",
        ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    return "\n".join(lines) + "\n"


def load_rankings_fixture(path: str | Path) -> dict[str, dict]:
    """Parse a rankings fixture: per method, explicit ranks and/or scores."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    methods = {}
    for method in raw["methods"]:
        column = method["column"]
        methods[method["name"]] = {
            "ranks": {row["system_id"]: row["rank"] for row in column if "rank" in row},
            "scores": {row["system_id"]: row["score"] for row in column if "score" in row},
        }
    return methods


def cmd_correlate(
    config: RunConfig,
    run_id: str | None = None,
    rankings_path: str | Path | None = None,
    with_pearson: bool = True,
) -> "stats.CorrelationReport":
    """Correlation matrix across ranking methods.

    Spearman runs on each method's rank ordering (explicit ranks when the
    source records them, otherwise the ordering its scores induce);
    Pearson pairs use the raw scores.
    """
    from . import stats

    if rankings_path is not None:
        methods = load_rankings_fixture(rankings_path)
    elif run_id is not None:
        methods = _methods_from_run(config, run_id)
    else:
        raise ConfigError("correlate needs a run id or a rankings fixture path")

    spearman_values: dict[str, dict[str, float]] = {}
    score_values: dict[str, dict[str, float]] = {}
    for name, data in methods.items():
        label = "Human" if name.lower() == "human" else name
        if data.get("ranks"):
            # negate so that rank 1 is the largest value, aligning with scores
            spearman_values[label] = {s: -float(r) for s, r in data["ranks"].items()}
        else:
            spearman_values[label] = dict(data["scores"])
        if data.get("scores"):
            score_values[label] = dict(data["scores"])

    report = stats.correlation_matrix(spearman_values, with_pearson=False)
    if with_pearson:
        pairs = {}
        keys = sorted(next(iter(spearman_values.values())))
        for i, a in enumerate(report.labels):
            for b in report.labels[i + 1 :]:
                if a in score_values and b in score_values:
                    try:
                        pairs[(a, b)] = stats.pearson(
                            [score_values[a][k] for k in keys],
                            [score_values[b][k] for k in keys],
                        )
                    except CnRankError:
                        continue
        report.pearson_pairs = pairs

    if run_id is not None:
        store = _open_store(config, run_id)
        with store:
            store.write_report("correlation.json", report.to_dict())
            store.write_report("correlation.csv", report.to_csv())
            store.write_report("correlation.txt", report.to_text())
    return report


def _methods_from_run(config: RunConfig, run_id: str) -> dict[str, dict]:
    """Ranking methods recoverable from a run's report artifacts."""
    store = RunStore(config.run_root, run_id)
    methods: dict[str, dict] = {}
    try:
        lines = store.read_report("metrics.jsonl").strip().splitlines()
        per_system = [json.loads(line) for line in lines]
        for metric in ("bleu", "rouge_l_f", "bertscore_f1", "repetition_rate", "novelty"):
            scores = {
                r["system_id"]: r[metric] for r in per_system if r.get(metric) is not None
            }
            if len(scores) == len(per_system):
                methods[metric] = {"ranks": {}, "scores": scores}
    except CnRankError:
        pass
    try:
        board = store.read_report("scoreboard.json")
        methods["judge"] = {"ranks": {}, "scores": board["normalized_share"]}
    except CnRankError:
        pass
    try:
        human = store.read_report("human_scoreboard.json")
        methods["Human"] = {"ranks": {}, "scores": human["normalized_share"]}
    except CnRankError:
        pass
    if len(methods) < 2:
        raise DataError(
            "correlate needs at least two ranking methods; run metrics/tournament first"
        )
    return methods


def build_service_state(config: RunConfig, run_id: str) -> ServiceState:
    """Assemble (or restore) the annotation-service state for one run."""
    if not config.annotation.annotators:
        raise ConfigError("config lists no annotators")
    store = _open_store(config, run_id)
    tournaments = {
        r["id"]: Tournament.from_record(r) for r in store.load("plan")
    }
    if not tournaments:
        raise DataError("empty tournament plan; run tournament scheduling first")

    annotator_ids = [a.id for a in config.annotation.annotators]
    if store.has_doc("assignments.json"):
        plan = AssignmentPlan.from_dict(store.read_doc("assignments.json"))
        if sorted(plan.queues) != sorted(annotator_ids):
            raise ConfigError("assignments.json was built for a different annotator roster")
    else:
        plan = plan_assignments(
            list(tournaments.values()),
            annotator_ids,
            config.annotation.shared_fraction,
            seed=config.stage_seed("assignments"),
        )
        store.write_doc("assignments.json", plan.to_dict())

    feature_plan: dict = {}
    if config.annotation.feature_hs > 0:
        if store.has_doc("feature_plan.json"):
            feature_plan = store.read_doc("feature_plan.json")
        else:
            tag = config.annotation.feature_dataset
            hs_ids = sorted({
                t.hs_id for t in tournaments.values()
                if tag is None or t.dataset == tag
            })
            rng = random.Random(config.stage_seed("features"))
            rng.shuffle(hs_ids)
            chosen = sorted(hs_ids[: config.annotation.feature_hs])
            systems = sorted({s.id for s in _systems(config)})
            pairs = [(h, s) for h in chosen for s in systems]
            feature_plan = plan_feature_tasks(
                pairs, annotator_ids, seed=config.stage_seed("feature-queues")
            )
            store.write_doc("feature_plan.json", feature_plan)

    return ServiceState(
        store=store,
        plan=plan,
        tournaments=tournaments,
        tokens={a.token: a.id for a in config.annotation.annotators},
        feature_plan=feature_plan,
        guidelines_version=config.annotation.guidelines_version,
        coordinator_token=config.annotation.coordinator_token,
        ui_dir=config.annotation.ui_dir,
    )


def cmd_serve(config: RunConfig, run_id: str) -> None:
    """Run the annotation service until interrupted."""
    import uvicorn

    state = build_service_state(config, run_id)
    app = build_app(state)
    uvicorn.run(app, host=config.annotation.host, port=config.annotation.port)


# ---------------------------------------------------------------------------
# Click wiring


def _fail(exc: CnRankError) -> None:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, ConfigError):
        sys.exit(EXIT_CONFIG)
    if isinstance(exc, HealthError):
        sys.exit(EXIT_HEALTH)
    if isinstance(exc, NetworkError):
        sys.exit(EXIT_NETWORK)
    sys.exit(EXIT_DATA)


def _common(func):
    func = click.option("--config", "config_path", required=True, type=click.Path(exists=True))(func)
    func = click.option("--run", "run_id", required=True)(func)
    func = click.option("--seed", type=int, default=None, help="override the root seed")(func)
    func = click.option("--parallelism", type=int, default=None)(func)
    return func


def _load(config_path: str, seed: int | None, parallelism: int | None) -> RunConfig:
    config = load_config(config_path)
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if parallelism is not None:
        updates["parallelism"] = parallelism
    if updates:
        config = config.model_copy(update=updates)
    return config


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool) -> None:
    """Tournament-based evaluation of counter-narrative generation systems."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@_common
def generate(config_path, run_id, seed, parallelism) -> None:
    """Generate one candidate CN per (system, HS)."""
    try:
        config = _load(config_path, seed, parallelism)
        with _run_lock(config, run_id):
            run = cmd_generate(config, run_id)
    except Timeout:
        _fail(DataError(f"run {run_id!r} is locked by another command"))
    except CnRankError as exc:
        _fail(exc)
    click.echo(
        f"run {run_id}: {run.completed}/{len(run.systems) * run.hs_count} candidates, "
        f"{len(run.failures)} failure(s)"
    )
    if not run.complete:
        sys.exit(EXIT_NETWORK)


@main.command()
@_common
@click.option("--judge-mode", type=click.Choice(["fast", "normal"]), default=None)
@click.option("--fixed-order", is_flag=True, default=None,
              help="disable A/B presentation randomization")
def tournament(config_path, run_id, seed, parallelism, judge_mode, fixed_order) -> None:
    """Schedule, adjudicate, score, and rank all pairwise tournaments."""
    try:
        config = _load(config_path, seed, parallelism)
        with _run_lock(config, run_id):
            result = cmd_tournament(config, run_id, judge_mode=judge_mode, fixed_order=fixed_order)
    except Timeout:
        _fail(DataError(f"run {run_id!r} is locked by another command"))
    except CnRankError as exc:
        _fail(exc)
    health = result["health"]
    click.echo(f"plan: {result['plan_size']} tournaments")
    click.echo(
        f"health: ok={health['parse_ok']} recovered={health['parse_recovered']} "
        f"failed={health['parse_failed']} transport={health['transport_errors']} "
        f"refusals={sum(health['refusals_per_system'].values())}"
    )
    for row in result["ranking"]:
        click.echo(f"{row.rank:>3}  {row.system_id:<24} {row.score:7.2f}")


@main.command("metrics")
@_common
@click.option("--export", type=click.Choice(["csv", "json"]), default=None)
def metrics_command(config_path, run_id, seed, parallelism, export) -> None:
    """Compute the reference-based and reference-free metric battery."""
    try:
        config = _load(config_path, seed, parallelism)
        with _run_lock(config, run_id):
            reports = cmd_metrics(config, run_id)
    except Timeout:
        _fail(DataError(f"run {run_id!r} is locked by another command"))
    except CnRankError as exc:
        _fail(exc)
    if export == "json":
        click.echo(json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        click.echo(_metrics_table(reports), nl=False)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--run", "run_id", default=None)
@click.option("--rankings", "rankings_path", type=click.Path(exists=True), default=None,
              help="correlate a standalone rankings fixture instead of run artifacts")
@click.option("--export", type=click.Choice(["csv", "json"]), default=None)
def correlate(config_path, run_id, rankings_path, export) -> None:
    """Correlation matrix between ranking methods."""
    try:
        config = load_config(config_path)
        report = cmd_correlate(config, run_id=run_id, rankings_path=rankings_path)
    except CnRankError as exc:
        _fail(exc)
    if export == "csv":
        click.echo(report.to_csv(), nl=False)
    elif export == "json":
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(report.to_text(), nl=False)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--run", "run_id", required=True)
def serve(config_path, run_id) -> None:
    """Serve the human-annotation API (and UI bundle, when configured)."""
    try:
        config = load_config(config_path)
        cmd_serve(config, run_id)
    except CnRankError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
