"""Experiment configuration: a flat key = value text file.

Grammar: one ``key = value`` pair per line; ``#`` starts a comment;
blank lines ignored. Dotted keys group settings (dataset.*, split.*,
model.*, train.*, eval.*). Ranges are ``start:stop`` half-open row
indices; ``split.test`` accepts a comma-separated list of ranges (one
per test season). CLI flags can override single keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import ModelConfig
from .trainer import TrainConfig

__all__ = ["ExperimentConfig", "ConfigError", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset_path: str
    target_column: str
    timestamp_column: str
    exog_columns: list[str] | None
    train_range: tuple[int, int]
    val_range: tuple[int, int]
    test_ranges: list[tuple[int, int]]
    model: ModelConfig
    train: TrainConfig
    eval_mode: str = "both"            # target-step | full-sequence | both
    instance_norm: bool = False
    weather_smape: bool = False
    baseline: str = "none"             # none | persistence | seasonal-persistence
    seasonal_period: int = 168
    output_dir: str = "out"
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        spans = [("train", self.train_range), ("val", self.val_range)] + [
            (f"test[{i}]", r) for i, r in enumerate(self.test_ranges)]
        for name, (lo, hi) in spans:
            if lo < 0 or hi <= lo:
                raise ConfigError(f"split.{name} range {lo}:{hi} is empty or negative")
        ordered = [self.train_range, self.val_range] + list(self.test_ranges)
        for (a_lo, a_hi), (b_lo, b_hi) in zip(ordered, ordered[1:]):
            if b_lo < a_hi:
                raise ConfigError(
                    "split ranges must be disjoint and ordered train < val < test")


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _parse_range(raw: str) -> tuple[int, int]:
    try:
        lo, hi = raw.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise ConfigError(f"bad range {raw!r}, expected start:stop") from exc


def parse_config_text(text: str, overrides: list[str] | None = None) -> ExperimentConfig:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = body.split("=", 1)
        pairs[key.strip()] = value.strip()
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must be key=value")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()

    def need(key):
        if key not in pairs:
            raise ConfigError(f"missing required key {key!r}")
        return pairs.pop(key)

    dataset_path = need("dataset.path")
    target_column = need("dataset.target")
    timestamp_column = pairs.pop("dataset.timestamp", "timestamp")
    exog_raw = pairs.pop("dataset.exog", "")
    exog_columns = [c.strip() for c in exog_raw.split(",") if c.strip()] or None

    train_range = _parse_range(need("split.train"))
    val_range = _parse_range(need("split.val"))
    test_ranges = [_parse_range(r) for r in need("split.test").split(",")]

    model_kwargs = {"lookback": int(need("model.lookback")),
                    "horizon": int(need("model.horizon")),
                    "n_exog": int(need("model.n_exog"))}
    for key in list(pairs):
        if key.startswith("model."):
            name = key[len("model."):]
            if name not in ModelConfig.__dataclass_fields__:
                raise ConfigError(f"unknown model option {name!r}")
            model_kwargs[name] = _parse_value(pairs.pop(key))
    train_kwargs = {}
    for key in list(pairs):
        if key.startswith("train."):
            name = key[len("train."):]
            if name not in TrainConfig.__dataclass_fields__:
                raise ConfigError(f"unknown train option {name!r}")
            train_kwargs[name] = _parse_value(pairs.pop(key))
    grid = {}
    for key in list(pairs):
        if key.startswith("grid."):
            name = key[len("grid."):]
            grid[name] = [_parse_value(v) for v in pairs.pop(key).split(",")]

    try:
        model_cfg = ModelConfig(**model_kwargs)
        train_cfg = TrainConfig(**train_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    cfg = ExperimentConfig(
        dataset_path=dataset_path,
        target_column=target_column,
        timestamp_column=timestamp_column,
        exog_columns=exog_columns,
        train_range=train_range,
        val_range=val_range,
        test_ranges=test_ranges,
        model=model_cfg,
        train=train_cfg,
        eval_mode=pairs.pop("eval.mode", "both"),
        instance_norm=bool(_parse_value(pairs.pop("eval.instance_norm", "false"))),
        weather_smape=bool(_parse_value(pairs.pop("eval.weather_smape", "false"))),
        baseline=pairs.pop("eval.baseline", "none"),
        seasonal_period=int(pairs.pop("eval.seasonal_period", "168")),
        output_dir=pairs.pop("output_dir", "out"),
        grid=grid,
    )
    if cfg.eval_mode not in ("target-step", "full-sequence", "both"):
        raise ConfigError(f"bad eval.mode {cfg.eval_mode!r}")
    if cfg.baseline not in ("none", "persistence", "seasonal-persistence"):
        raise ConfigError(f"bad eval.baseline {cfg.baseline!r}")
    if pairs:
        raise ConfigError(f"unknown configuration keys: {sorted(pairs)}")
    return cfg


def load_config(path, overrides: list[str] | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    return parse_config_text(text, overrides)
