"""Configuration resolution: defaults, file, environment, explicit overrides."""

import json

import pytest

from maskfuse.config import ConfigError, RunConfig, load_config


def test_defaults_are_the_documented_ones():
    cfg = RunConfig()
    assert cfg.grid_n == 29
    assert cfg.window == 224
    assert cfg.stride == 112
    assert cfg.tile_cap == 1024
    assert cfg.clip_long_side == 448
    assert cfg.max_iters == 6
    assert cfg.tau == 0.98
    assert cfg.clicks_max == 6
    assert cfg.mode == "sample"
    assert cfg.uncovered == "background"
    assert cfg.probability_map_backend == "oracle"


def test_validation_rejects_bad_values():
    with pytest.raises(ConfigError, match="grid_n"):
        RunConfig(grid_n=0)
    with pytest.raises(ConfigError, match="stride"):
        RunConfig(window=8, stride=9)
    with pytest.raises(ConfigError, match="tau"):
        RunConfig(tau=0.0)
    with pytest.raises(ConfigError, match="mode"):
        RunConfig(mode="greedy")
    with pytest.raises(ConfigError, match="uncovered"):
        RunConfig(uncovered="leave")
    with pytest.raises(ConfigError, match="oracle_noise"):
        RunConfig(oracle_noise=0.5)
    with pytest.raises(ConfigError, match="endpoint"):
        RunConfig(segment_backend="http")
    # a backend with its endpoint is fine
    cfg = RunConfig(segment_backend="http", segment_endpoint="http://127.0.0.1:1/v1/segment")
    assert cfg.segment_endpoint.endswith("/segment")


def test_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"grid_n": 10, "tau": 0.9, "fail_fast": True}))
    cfg = load_config(path)
    assert (cfg.grid_n, cfg.tau, cfg.fail_fast) == (10, 0.9, True)
    # untouched keys keep their defaults
    assert cfg.window == 224


def test_env_overrides_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"grid_n": 10, "seed": 3}))
    cfg = load_config(path, env={"MF_GRID_N": "20", "MF_FAIL_FAST": "yes"})
    assert cfg.grid_n == 20  # env wins over file
    assert cfg.seed == 3  # file survives where env is silent
    assert cfg.fail_fast is True


def test_explicit_overrides_win_over_everything(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"grid_n": 10}))
    cfg = load_config(path, env={"MF_GRID_N": "20"}, overrides={"grid_n": 29, "seed": None})
    assert cfg.grid_n == 29
    assert cfg.seed == 0  # None means "not given on the command line"


def test_unknown_keys_are_errors(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"grid_size": 10}))
    with pytest.raises(ConfigError, match="grid_size"):
        load_config(path)
    with pytest.raises(ConfigError, match="bogus"):
        load_config(overrides={"bogus": 1})


def test_file_type_checking(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"grid_n": "29"}))
    with pytest.raises(ConfigError, match="grid_n"):
        load_config(path)
    path.write_text(json.dumps({"fail_fast": 1}))
    with pytest.raises(ConfigError, match="fail_fast"):
        load_config(path)
    path.write_text(json.dumps({"tau": 1}))  # ints are fine for float keys
    assert load_config(path).tau == 1.0


def test_env_casting_errors_name_the_variable():
    with pytest.raises(ConfigError, match="MF_WORKERS"):
        load_config(env={"MF_WORKERS": "many"})
    with pytest.raises(ConfigError, match="MF_FAIL_FAST"):
        load_config(env={"MF_FAIL_FAST": "maybe"})
    # empty string clears an optional endpoint
    cfg = load_config(env={"MF_HTTP_TOKEN": ""})
    assert cfg.http_token is None


def test_missing_or_malformed_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("grid_n = 29")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="flat JSON object"):
        load_config(arr)


def test_cross_field_validation_applies_after_merge(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"window": 64}))
    # file lowers window below the default stride -> invalid combination
    with pytest.raises(ConfigError, match="stride"):
        load_config(path)
    cfg = load_config(path, env={"MF_STRIDE": "32"})
    assert (cfg.window, cfg.stride) == (64, 32)


def test_echo_round_trips_through_the_constructor():
    cfg = RunConfig(grid_n=20, oracle_distractors=2)
    again = RunConfig(**cfg.echo())
    assert again == cfg
