"""Experiment orchestration: wiring data splits, training, evaluation and
the ablation sweep behind the command-line interface.

All file outputs are deterministic given config + seed: CSV floats are
written with repr (shortest round-trip form) and no timestamps are
embedded.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import replace

import numpy as np

from . import autodiff as ad
from . import data as D
from . import metrics as M
from . import trainer as T
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .model import SonnetModel

__all__ = [
    "load_table", "split_windows", "prepare_arrays",
    "run_train", "run_evaluate", "run_forecast", "run_grid", "run_ablate",
    "ABLATION_VARIANTS",
]

ABLATION_VARIANTS = ("no_coher", "no_mlp", "no_mvca", "no_embed", "no_koop")


def load_table(cfg: ExperimentConfig) -> D.SeriesTable:
    return D.load_csv(cfg.dataset_path, cfg.target_column,
                      timestamp_column=cfg.timestamp_column,
                      exog_columns=cfg.exog_columns)


def split_windows(cfg: ExperimentConfig, table: D.SeriesTable):
    """Rolling windows per split, anchored inside each split's row range."""
    m = cfg.model
    mk = lambda rng: D.make_windows(table, m.lookback, m.horizon, m.delay,
                                    anchor_range=rng)
    train_w = mk(cfg.train_range)
    val_w = mk(cfg.val_range)
    test_w = [mk(r) for r in cfg.test_ranges]
    return train_w, val_w, test_w


def prepare_arrays(windows, instance_norm: bool):
    """Stack windows and optionally standardize the endogenous side per
    window; returns (x, y, target, shift, scale)."""
    x, y, t = D.windows_to_arrays(windows)
    if instance_norm:
        y, shift, scale = D.instance_normalize(y)
        t = (t - shift) / scale
    else:
        shift = np.zeros((len(y), 1))
        scale = np.ones((len(y), 1))
    return x, y, t, shift, scale


def _predict(model: SonnetModel, x, y, batch_size=256) -> np.ndarray:
    outs = []
    with ad.no_grad():
        for lo in range(0, len(x), batch_size):
            outs.append(model.forward(x[lo:lo + batch_size],
                                      y[lo:lo + batch_size]).data)
    return np.concatenate(outs)


def predict_original_scale(model: SonnetModel, windows, zparams, instance_norm):
    """Forecasts for a window list, inverted back to original units."""
    x, y, t = D.windows_to_arrays(windows)
    xn = (x - zparams.exog_mean) / zparams.exog_std
    yn = (y - zparams.target_mean) / zparams.target_std
    if instance_norm:
        yn, shift, scale = D.instance_normalize(yn)
        pred = D.instance_denormalize(_predict(model, xn, yn), shift, scale)
    else:
        pred = _predict(model, xn, yn)
    return D.zscore_invert(pred, zparams), t


def _baseline_predictions(cfg: ExperimentConfig, table, windows) -> np.ndarray | None:
    if cfg.baseline == "none":
        return None
    H = cfg.model.horizon
    preds = np.empty((len(windows), H))
    for i, w in enumerate(windows):
        if cfg.baseline == "persistence":
            preds[i] = M.persistence(w.y_lagged, H)
        else:
            history = table.target[: w.anchor + 1]
            preds[i] = M.seasonal_persistence(history, H, cfg.seasonal_period)
    return preds


def _season_report(report: M.EvalReport, cfg, season, name, truth, pred):
    """Add rows for the requested evaluation modes; returns the xi offset
    used by the weather-style sMAPE (min of the season's truth)."""
    modes = (["target-step", "full-sequence"] if cfg.eval_mode == "both"
             else [cfg.eval_mode])
    xi = float(truth.min()) if cfg.weather_smape else None
    for mode in modes:
        if mode == "target-step":
            report.add(season, mode, name, truth[:, -1], pred[:, -1],
                       weather_smape=cfg.weather_smape, xi=xi)
        else:
            report.add(season, mode, name, truth.ravel(), pred.ravel(),
                       weather_smape=cfg.weather_smape, xi=xi)


def _write_predictions(path, table, cfg, seasons):
    """Predictions CSV: one row per (window, horizon step)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "y_true", "y_pred", "season", "horizon"])
        for season, windows, truth, pred in seasons:
            for win, yt, yp in zip(windows, truth, pred):
                for h in range(len(yt)):
                    ts = table.timestamps[win.anchor + 1 + h]
                    w.writerow([np.datetime_as_string(ts, unit="s"),
                                repr(float(yt[h])), repr(float(yp[h])),
                                season, h + 1])


def _resolved_config_snapshot(cfg: ExperimentConfig, path):
    doc = dataclasses.asdict(cfg)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=str)


def run_train(cfg: ExperimentConfig, progress=None):
    os.makedirs(cfg.output_dir, exist_ok=True)
    table = load_table(cfg)
    if table.n_exog != cfg.model.n_exog:
        raise D.DataError(
            f"dataset has {table.n_exog} exogenous columns, model.n_exog is "
            f"{cfg.model.n_exog}")
    zparams = D.zscore_fit(table, cfg.train_range)
    norm = D.zscore_apply_table(table, zparams)
    train_w, val_w, _ = split_windows(cfg, norm)
    xt, yt, tt, _, _ = prepare_arrays(train_w, cfg.instance_norm)
    xv, yv, tv, _, _ = prepare_arrays(val_w, cfg.instance_norm)
    model = SonnetModel(cfg.model)
    model, history = T.train(model, (xt, yt, tt), (xv, yv, tv), cfg.train,
                             progress=progress)
    ckpt = os.path.join(cfg.output_dir, "model.ckpt")
    save_checkpoint(ckpt, model)
    history.to_csv(os.path.join(cfg.output_dir, "history.csv"))
    _resolved_config_snapshot(cfg, os.path.join(cfg.output_dir, "config.json"))
    return ckpt, history


def run_evaluate(cfg: ExperimentConfig, checkpoint_path, tag=""):
    os.makedirs(cfg.output_dir, exist_ok=True)
    model = load_checkpoint(checkpoint_path)
    for fld in ("lookback", "horizon", "n_exog", "delay"):
        want, got = getattr(cfg.model, fld), getattr(model.cfg, fld)
        if want != got:
            raise ValueError(
                f"checkpoint/config mismatch on {fld}: checkpoint={got}, config={want}")
    table = load_table(cfg)
    zparams = D.zscore_fit(table, cfg.train_range)
    _, _, test_seasons = split_windows(cfg, table)
    report = M.EvalReport()
    rows_for_csv = []
    for i, windows in enumerate(test_seasons):
        if not windows:
            continue
        season = f"season{i + 1}"
        pred, truth = predict_original_scale(model, windows, zparams,
                                             cfg.instance_norm)
        _season_report(report, cfg, season, "model", truth, pred)
        rows_for_csv.append((season, windows, truth, pred))
        base = _baseline_predictions(cfg, table, windows)
        if base is not None:
            _season_report(report, cfg, season, cfg.baseline, truth, base)
    suffix = f"_{tag}" if tag else ""
    report.to_csv(os.path.join(cfg.output_dir, f"report{suffix}.csv"))
    report.to_json(os.path.join(cfg.output_dir, f"report{suffix}.json"))
    _write_predictions(os.path.join(cfg.output_dir, f"predictions{suffix}.csv"),
                       table, cfg, rows_for_csv)
    return report


def run_forecast(cfg: ExperimentConfig, checkpoint_path):
    """Emit predictions for the test ranges without metric rows."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    model = load_checkpoint(checkpoint_path)
    table = load_table(cfg)
    zparams = D.zscore_fit(table, cfg.train_range)
    _, _, test_seasons = split_windows(cfg, table)
    seasons = []
    for i, windows in enumerate(test_seasons):
        if not windows:
            continue
        pred, truth = predict_original_scale(model, windows, zparams,
                                             cfg.instance_norm)
        seasons.append((f"season{i + 1}", windows, truth, pred))
    out = os.path.join(cfg.output_dir, "forecast.csv")
    _write_predictions(out, table, cfg, seasons)
    return out


def run_grid(cfg: ExperimentConfig):
    os.makedirs(cfg.output_dir, exist_ok=True)
    table = load_table(cfg)
    zparams = D.zscore_fit(table, cfg.train_range)
    norm = D.zscore_apply_table(table, zparams)
    train_w, val_w, _ = split_windows(cfg, norm)
    xt, yt, tt, _, _ = prepare_arrays(train_w, cfg.instance_norm)
    xv, yv, tv, _, _ = prepare_arrays(val_w, cfg.instance_norm)
    grids = cfg.grid or T.DEFAULT_GRIDS
    best_m, best_t, board = T.grid_search(cfg.model, cfg.train, grids,
                                          (xt, yt, tt), (xv, yv, tv))
    path = os.path.join(cfg.output_dir, "leaderboard.csv")
    cols = sorted(grids) + ["val_loss"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in board:
            w.writerow({k: repr(v) if isinstance(v, float) else v
                        for k, v in row.items()})
    return best_m, best_t, board


def run_ablate(cfg: ExperimentConfig):
    """Train and evaluate the full model plus the five single-module
    removals under identical seeds and splits; emit a delta table."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    results = {}
    for variant in ("full",) + ABLATION_VARIANTS:
        mcfg = cfg.model if variant == "full" else replace(cfg.model,
                                                           **{variant: True})
        vdir = os.path.join(cfg.output_dir, variant)
        vcfg = dataclasses.replace(cfg, model=mcfg, output_dir=vdir)
        ckpt, _ = run_train(vcfg)
        report = run_evaluate(vcfg, ckpt)
        maes = [r["mae"] for r in report.rows
                if r["model"] == "model" and r["mode"] == "target-step"]
        results[variant] = float(np.mean(maes))
    full_mae = results["full"]
    path = os.path.join(cfg.output_dir, "ablation.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "mae", "delta_pct"])
        for variant, value in results.items():
            delta = 0.0 if variant == "full" else (value - full_mae) / full_mae * 100.0
            w.writerow([variant, repr(value), repr(delta)])
    return results
