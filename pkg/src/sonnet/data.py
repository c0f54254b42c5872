"""Dataset ingestion, rolling-window generation and normalization.

CSV in (header row, ISO-8601 timestamp column), interior gaps linearly
interpolated at load. Window instances pair an exogenous look-back block
with a delay-shifted endogenous look-back and the H-step target
sequence. Two normalization schemes: train-fitted z-score for every
column, and optional per-window standardization of the endogenous input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

__all__ = [
    "SeriesTable", "WindowInstance", "ZScoreParams", "DataError",
    "load_csv", "save_csv", "make_windows", "window_count",
    "windows_to_arrays", "zscore_fit", "zscore_apply_table",
    "instance_normalize", "instance_denormalize", "make_synthetic",
]

SCALE_FLOOR = 1e-8  # keeps constant columns/windows invertible


class DataError(ValueError):
    """Raised on schema or content problems in input data."""


@dataclass
class SeriesTable:
    timestamps: np.ndarray          # datetime64[ns], strictly increasing, uniform
    target: np.ndarray              # (N,)
    exogenous: np.ndarray           # (N, C)
    target_name: str
    exog_names: list[str]

    def __post_init__(self):
        if self.target.ndim != 1 or self.exogenous.ndim != 2:
            raise DataError("target must be 1-d and exogenous 2-d")
        if len(self.target) != len(self.timestamps) or len(self.target) != len(self.exogenous):
            raise DataError("column lengths disagree")

    def __len__(self):
        return len(self.target)

    @property
    def n_exog(self):
        return self.exogenous.shape[1]


@dataclass
class WindowInstance:
    anchor: int                     # index t of the last exogenous observation
    x: np.ndarray                   # (L, C), rows t-L+1 .. t
    y_lagged: np.ndarray            # (L,), rows t-delay-L+1 .. t-delay
    target: np.ndarray              # (H,), rows t+1 .. t+H


@dataclass
class ZScoreParams:
    target_mean: float
    target_std: float
    exog_mean: np.ndarray           # (C,)
    exog_std: np.ndarray            # (C,)


def load_csv(path, target_column: str, timestamp_column: str = "timestamp",
             exog_columns: list[str] | None = None,
             resample: str | None = None) -> SeriesTable:
    """Parse a CSV into a SeriesTable, interpolating interior gaps linearly."""
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # noqa: BLE001 - surface parser detail
        raise DataError(f"could not parse {path}: {exc}") from exc
    if timestamp_column not in df.columns:
        raise DataError(f"timestamp column {timestamp_column!r} missing in {path}")
    if target_column not in df.columns:
        raise DataError(f"target column {target_column!r} missing in {path}")
    ts = pd.to_datetime(df[timestamp_column])
    df = df.drop(columns=[timestamp_column]).set_index(ts)
    if resample:
        df = df.resample(resample).mean()
    if exog_columns is None:
        exog_columns = [c for c in df.columns if c != target_column]
    missing = [c for c in exog_columns if c not in df.columns]
    if missing:
        raise DataError(f"exogenous columns missing in {path}: {missing}")
    steps = np.diff(df.index.values.astype("int64"))
    if len(steps) and (steps <= 0).any():
        raise DataError("timestamps must be strictly increasing")
    if len(steps) and len(set(steps.tolist())) > 1:
        raise DataError("timestamps must have a uniform step")
    cols = [target_column] + list(exog_columns)
    values = df[cols].astype(float)
    values = values.interpolate(method="linear", limit_area="inside")
    if values.isna().any().any():
        bad = values.columns[values.isna().any()].tolist()
        raise DataError(f"missing values at series boundaries in columns {bad}")
    return SeriesTable(
        timestamps=df.index.values,
        target=values[target_column].to_numpy(),
        exogenous=values[exog_columns].to_numpy().reshape(len(values), -1),
        target_name=target_column,
        exog_names=list(exog_columns),
    )


def save_csv(table: SeriesTable, path, timestamp_column: str = "timestamp"):
    df = pd.DataFrame({timestamp_column: pd.to_datetime(table.timestamps)})
    df[table.target_name] = table.target
    for i, name in enumerate(table.exog_names):
        df[name] = table.exogenous[:, i]
    df.to_csv(path, index=False)


def window_count(n: int, lookback: int, horizon: int, delay: int) -> int:
    return max(0, n - horizon - lookback - delay + 1)


def make_windows(table: SeriesTable, lookback: int, horizon: int, delay: int = 0,
                 anchor_range: tuple[int, int] | None = None) -> list[WindowInstance]:
    """One instance per admissible anchor t, stride 1.

    Admissible anchors satisfy t - delay - lookback + 1 >= 0 and
    t + horizon <= N - 1; anchor_range further restricts t to
    [start, stop).
    """
    n = len(table)
    lo = lookback + delay - 1
    hi = n - 1 - horizon
    if anchor_range is not None:
        lo = max(lo, anchor_range[0])
        hi = min(hi, anchor_range[1] - 1)
    out = []
    for t in range(lo, hi + 1):
        out.append(WindowInstance(
            anchor=t,
            x=table.exogenous[t - lookback + 1: t + 1],
            y_lagged=table.target[t - delay - lookback + 1: t - delay + 1],
            target=table.target[t + 1: t + horizon + 1],
        ))
    return out


def windows_to_arrays(windows: list[WindowInstance]):
    """Stack instances into (N,L,C), (N,L), (N,H) batch arrays."""
    if not windows:
        raise DataError("empty window set")
    x = np.stack([w.x for w in windows])
    y = np.stack([w.y_lagged for w in windows])
    t = np.stack([w.target for w in windows])
    return x, y, t


# --------------------------------------------------------------------------
# normalization
# --------------------------------------------------------------------------

def zscore_fit(table: SeriesTable, train_range: tuple[int, int]) -> ZScoreParams:
    lo, hi = train_range
    if hi <= lo:
        raise DataError("empty training range")
    y = table.target[lo:hi]
    x = table.exogenous[lo:hi]
    return ZScoreParams(
        target_mean=float(y.mean()),
        target_std=float(max(y.std(), SCALE_FLOOR)),
        exog_mean=x.mean(axis=0),
        exog_std=np.maximum(x.std(axis=0), SCALE_FLOOR),
    )


def zscore_apply_table(table: SeriesTable, params: ZScoreParams) -> SeriesTable:
    return SeriesTable(
        timestamps=table.timestamps,
        target=(table.target - params.target_mean) / params.target_std,
        exogenous=(table.exogenous - params.exog_mean) / params.exog_std,
        target_name=table.target_name,
        exog_names=table.exog_names,
    )


def zscore_apply(y: np.ndarray, params: ZScoreParams) -> np.ndarray:
    return (y - params.target_mean) / params.target_std


def zscore_invert(y: np.ndarray, params: ZScoreParams) -> np.ndarray:
    return y * params.target_std + params.target_mean


def instance_normalize(y_lagged: np.ndarray):
    """Per-window standardization over the last axis.

    Returns (normalized, shift, scale) with shift/scale broadcastable so a
    batch of windows normalizes in one call.
    """
    shift = y_lagged.mean(axis=-1, keepdims=True)
    scale = np.maximum(y_lagged.std(axis=-1, keepdims=True), SCALE_FLOOR)
    return (y_lagged - shift) / scale, shift, scale


def instance_denormalize(pred: np.ndarray, shift, scale) -> np.ndarray:
    return pred * scale + shift


# --------------------------------------------------------------------------
# synthetic series for desk-scale runs
# --------------------------------------------------------------------------

def make_synthetic(kind: str, n: int, seed: int, lead: int = 4,
                   period: int = 24) -> SeriesTable:
    """Deterministic toy series: 'sinusoid', 'seasonal-walk' or
    'leading-indicator' (exogenous channels equal the target shifted
    ``lead`` steps into the future)."""
    rng = np.random.default_rng(seed)
    ts = np.arange(n).astype("datetime64[h]").astype("datetime64[ns]")
    if kind == "sinusoid":
        t = np.arange(n)
        y = np.sin(2 * np.pi * t / period) + 0.5 * np.sin(2 * np.pi * t / (period * 7))
        x = np.stack([np.cos(2 * np.pi * t / period),
                      np.sin(2 * np.pi * t / (period / 2))], axis=1)
    elif kind == "seasonal-walk":
        t = np.arange(n)
        season = np.sin(2 * np.pi * t / period)
        walk = np.cumsum(rng.normal(0, 0.1, n))
        y = season + walk
        x = np.stack([season, np.roll(walk, 1)], axis=1)
    elif kind == "leading-indicator":
        # stationary smooth process: persistence has sizable error once the
        # signal decorrelates over the lead, but the level never drifts
        white = rng.normal(0, 1.0, n + lead + 16)
        kernel = np.hanning(9)
        kernel /= kernel.sum()
        smooth = np.convolve(white, kernel, mode="valid")
        smooth = smooth / smooth.std()
        y = smooth[:n]
        future = smooth[lead: n + lead]       # y shifted 'lead' steps forward
        noise = rng.normal(0, 0.01, n)
        x = np.stack([future, future + noise], axis=1)
    else:
        raise DataError(f"unknown synthetic kind {kind!r}")
    return SeriesTable(
        timestamps=ts,
        target=y,
        exogenous=x,
        target_name="y",
        exog_names=[f"x{i}" for i in range(x.shape[1])],
    )
