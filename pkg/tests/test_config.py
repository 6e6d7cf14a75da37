from __future__ import annotations

import pytest

from cnrank.config import RunConfig, load_config
from cnrank.errors import ConfigError

GOOD = """
seed: 42
parallelism: 2
run_root: runs
split: test
datasets:
  - {path: data/x.csv, format: csv, tag: CONAN}
systems:
  - {id: a-zs, family: zephyr, mode: zs}
  - {id: gold, family: gold, mode: gold}
generator:
  kind: mock
judge:
  kind: mock-length
  mode: fast
annotation:
  annotators:
    - {id: ann1, token: t1}
"""


def write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_valid_config(tmp_path):
    config = load_config(write(tmp_path, GOOD))
    assert config.seed == 42
    assert config.systems[1].mode == "gold"
    assert config.judge.parse_failure_threshold == 0.2


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, GOOD + "\nunknown_top_level: 1\n"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, GOOD.replace("kind: mock", "kind: mock\n  typo_key: 1")))


def test_bad_values_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, GOOD.replace("mode: fast", "mode: slow")))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, GOOD.replace("split: test", "split: dev")))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, GOOD.replace("family: gold, mode: gold", "family: gold, mode: zs")))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, GOOD.replace("parallelism: 2", "parallelism: 0")))


def test_duplicate_ids_rejected(tmp_path):
    duplicated = GOOD.replace(
        "- {id: a-zs, family: zephyr, mode: zs}",
        "- {id: a-zs, family: zephyr, mode: zs}\n  - {id: a-zs, family: mistral, mode: zs}",
    )
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, duplicated))


def test_unknown_family_needs_template(tmp_path):
    unknown = GOOD.replace("family: zephyr", "family: brand-new-model")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, unknown))
    registered = unknown + "\ntemplates:\n  brand-new-model: some/path.txt\n"
    config = load_config(write(tmp_path, registered))
    assert config.systems[0].family == "brand-new-model"


def test_http_generator_requires_endpoints(tmp_path):
    http = GOOD.replace("kind: mock", "kind: http")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, http))


def test_missing_file_and_bad_yaml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "a: [unclosed"))


def test_stage_seed_fanout_deterministic():
    config = RunConfig(seed=7)
    assert config.stage_seed("order") == RunConfig(seed=7).stage_seed("order")
    assert config.stage_seed("order") != config.stage_seed("gold")
    assert RunConfig(seed=8).stage_seed("order") != config.stage_seed("order")


def test_snapshot_is_json_ready():
    snapshot = RunConfig(seed=1).snapshot()
    assert snapshot["seed"] == 1
    assert isinstance(snapshot["judge"], dict)
