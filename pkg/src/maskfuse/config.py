"""Run configuration: defaults, a flat JSON config file, MF_* environment
overrides, and explicit (command-line) overrides, in that precedence order."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

ENV_PREFIX = "MF_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; field names double as config-file keys.

    Environment variables override the file using the upper-cased field name
    behind the ``MF_`` prefix (``MF_GRID_N=20``); command-line flags override
    both.
    """

    # geometry
    grid_n: int = 29
    window: int = 224
    stride: int = 112
    tile_cap: int = 1024
    clip_long_side: int = 448
    # click generation
    max_iters: int = 6
    tau: float = 0.98
    clicks_max: int = 6
    mode: str = "sample"  # "sample" | "argmax"
    vote_ties_foreground: bool = True
    strict_clicks: bool = True
    # composition
    uncovered: str = "background"  # "background" | "pixel-argmax"
    debias_scale: float = 1.0
    # run control
    seed: int = 0
    workers: int = 4
    fail_fast: bool = False
    output_dir: str = "out"
    # oracle backend behaviour
    oracle_noise: float = 0.0
    oracle_distractors: int = 0
    oracle_behavior: str = "ideal"  # "ideal" | "erode1"
    oracle_click_format: str = "text"  # "text" | "json" | "json-think"
    # provider wiring
    probability_map_backend: str = "oracle"
    probability_map_endpoint: str | None = None
    mask_proposals_backend: str = "oracle"
    mask_proposals_endpoint: str | None = None
    segment_backend: str = "oracle"
    segment_endpoint: str | None = None
    clicks_backend: str = "oracle"
    clicks_endpoint: str | None = None
    http_timeout: float = 30.0
    http_concurrency: int = 4
    http_token: str | None = None
    http_retry_backoff: float = 0.25

    def __post_init__(self):
        def need(cond: bool, msg: str):
            if not cond:
                raise ConfigError(msg)

        need(self.grid_n >= 1, "grid_n must be at least 1")
        need(self.window >= 1, "window must be at least 1")
        need(1 <= self.stride <= self.window, "stride must lie in [1, window]")
        need(self.tile_cap >= 1, "tile_cap must be at least 1")
        need(self.clip_long_side >= 1, "clip_long_side must be at least 1")
        need(self.max_iters >= 1, "max_iters must be at least 1")
        need(0.0 < self.tau <= 1.0, "tau must lie in (0, 1]")
        need(self.clicks_max >= 1, "clicks_max must be at least 1")
        need(self.mode in ("sample", "argmax"), "mode must be 'sample' or 'argmax'")
        need(self.uncovered in ("background", "pixel-argmax"), "uncovered must be 'background' or 'pixel-argmax'")
        need(self.workers >= 1, "workers must be at least 1")
        need(0.0 <= self.oracle_noise < 0.5, "oracle_noise must lie in [0, 0.5)")
        need(self.oracle_distractors >= 0, "oracle_distractors must be non-negative")
        need(self.oracle_behavior in ("ideal", "erode1"), "oracle_behavior must be 'ideal' or 'erode1'")
        need(
            self.oracle_click_format in ("text", "json", "json-think"),
            "oracle_click_format must be 'text', 'json' or 'json-think'",
        )
        for cap in ("probability_map", "mask_proposals", "segment", "clicks"):
            backend = getattr(self, f"{cap}_backend")
            endpoint = getattr(self, f"{cap}_endpoint")
            need(backend in ("oracle", "http"), f"{cap}_backend must be 'oracle' or 'http'")
            if backend == "http":
                need(bool(endpoint), f"{cap}_backend=http requires {cap}_endpoint")
        need(self.http_timeout > 0, "http_timeout must be positive")
        need(self.http_concurrency >= 1, "http_concurrency must be at least 1")
        need(self.http_retry_backoff >= 0, "http_retry_backoff must be non-negative")

    def echo(self) -> dict:
        """The fully-resolved configuration, for embedding in reports."""
        return asdict(self)


_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")


def _cast_env(raw: str, annotation: str, name: str):
    annotation = annotation.replace("Optional[", "").rstrip("]")
    if annotation.startswith("bool"):
        low = raw.strip().lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{ENV_PREFIX}{name.upper()}: cannot read {raw!r} as a boolean")
    try:
        if annotation.startswith("int"):
            return int(raw)
        if annotation.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{ENV_PREFIX}{name.upper()}: {exc}") from exc
    if raw == "" and "None" in annotation:
        return None
    return raw


def _check_file_value(key: str, value, annotation: str):
    ok = True
    if annotation.startswith("bool"):
        ok = isinstance(value, bool)
    elif annotation.startswith("int"):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif annotation.startswith("float"):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif "None" in annotation:
        ok = value is None or isinstance(value, str)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"config key {key!r}: value {value!r} has the wrong type")
    return float(value) if annotation.startswith("float") else value


def load_config(
    path: str | os.PathLike | None = None,
    *,
    env: dict | None = None,
    overrides: dict | None = None,
) -> RunConfig:
    """Resolve a run configuration.

    Precedence, lowest to highest: built-in defaults, the JSON config file,
    ``MF_*`` environment variables, explicit overrides.  Unknown keys anywhere
    are an error.
    """
    annotations = {f.name: str(f.type) for f in fields(RunConfig)}
    data = asdict(RunConfig())

    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a flat JSON object")
        for key, value in raw.items():
            if key not in annotations:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            data[key] = _check_file_value(key, value, annotations[key])

    env = os.environ if env is None else env
    for name, annotation in annotations.items():
        var = ENV_PREFIX + name.upper()
        if var in env:
            data[name] = _cast_env(env[var], annotation, name)

    for key, value in (overrides or {}).items():
        if key not in annotations:
            raise ConfigError(f"unknown configuration override {key!r}")
        if value is not None:
            data[key] = value

    try:
        return RunConfig(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
