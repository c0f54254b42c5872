"""Forecast scoring and naive baselines.

sMAPE uses the factor-2 form with the 0/0 convention mapped to 0, so
scores lie in [0, 200]. The weather variant offsets both series by the
test-set minimum and a constant a=30 to suit Kelvin-scaled data.
Evaluation supports two modes: scoring only the final step of each
predicted sequence, or averaging over the whole output sequence.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "mae", "smape", "smape_weather", "pearson_r",
    "persistence", "seasonal_persistence", "EvalReport",
]


def _check_pair(y, y_hat):
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("empty inputs")
    return y, y_hat


def mae(y, y_hat) -> float:
    y, y_hat = _check_pair(y, y_hat)
    return float(np.abs(y - y_hat).mean())


def smape(y, y_hat) -> float:
    y, y_hat = _check_pair(y, y_hat)
    num = 2.0 * np.abs(y - y_hat)
    den = np.abs(y) + np.abs(y_hat)
    terms = np.where(den == 0.0, 0.0, num / np.where(den == 0.0, 1.0, den))
    return float(100.0 * terms.mean())


def smape_weather(y, y_hat, xi: float | None = None, a: float = 30.0) -> float:
    """sMAPE offset by the test-set minimum xi (default: min of y) plus 2a."""
    y, y_hat = _check_pair(y, y_hat)
    if xi is None:
        xi = float(y.min())
    num = 2.0 * np.abs(y - y_hat)
    den = np.abs(y - xi) + np.abs(y_hat - xi) + 2.0 * a
    return float(100.0 * (num / den).mean())


def pearson_r(y, y_hat) -> float | None:
    """Sample correlation; None when either series has zero variance."""
    y, y_hat = _check_pair(y, y_hat)
    sy, sh = y.std(), y_hat.std()
    if sy == 0.0 or sh == 0.0:
        return None
    return float(((y - y.mean()) * (y_hat - y_hat.mean())).mean() / (sy * sh))


def persistence(y_history, horizon: int) -> np.ndarray:
    """Constant forecast equal to the last observed value."""
    y_history = np.asarray(y_history, dtype=float)
    if y_history.size < 1:
        raise ValueError("persistence needs at least one observation")
    return np.full(horizon, y_history[-1])


def seasonal_persistence(y_history, horizon: int, period: int) -> np.ndarray:
    """Forecast for step t+h is the observation at t+h-period."""
    y_history = np.asarray(y_history, dtype=float)
    if y_history.size < period:
        raise ValueError(f"need at least {period} observations, got {y_history.size}")
    n = y_history.size
    idx = np.arange(1, horizon + 1) + n - 1 - period  # position of t+h-period
    if idx.max() >= n:
        raise ValueError("horizon reaches past available history for this period")
    return y_history[idx]


@dataclass
class EvalReport:
    """Per-season, per-mode metric rows plus raw prediction pairs."""

    rows: list = field(default_factory=list)

    def add(self, season: str, mode: str, model: str, y, y_hat,
            weather_smape: bool = False, xi: float | None = None):
        if mode not in ("target-step", "full-sequence"):
            raise ValueError(f"unknown evaluation mode {mode!r}")
        row = {
            "season": season,
            "mode": mode,
            "model": model,
            "mae": mae(y, y_hat),
            "smape": smape_weather(y, y_hat, xi=xi) if weather_smape else smape(y, y_hat),
            "r": pearson_r(y, y_hat),
            "n": int(np.asarray(y).size),
        }
        self.rows.append(row)
        return row

    def to_csv(self, path):
        cols = ["season", "mode", "model", "mae", "smape", "r", "n"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            for row in self.rows:
                out = dict(row)
                out["r"] = "" if row["r"] is None else repr(row["r"])
                out["mae"] = repr(row["mae"])
                out["smape"] = repr(row["smape"])
                writer.writerow(out)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"schema": "eval-report/v1", "rows": self.rows}, fh, indent=2)
