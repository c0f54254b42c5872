"""Training loop: MSE on all output steps, Adam, linear LR decay to zero,
early stopping on validation loss, and exhaustive grid search.

All stochastic pieces (parameter init, shuffling, dropout) derive from a
single root seed, so identical seeds and inputs reproduce histories
bit-for-bit.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tensor, adam_step, backward
from .model import ModelConfig, SonnetModel

__all__ = [
    "TrainConfig", "TrainHistory", "EarlyStopper", "train", "grid_search",
    "set_seed", "DEFAULT_GRIDS",
]

# grids used for hyperparameter selection
DEFAULT_GRIDS = {
    "alpha": [0.0, 0.1, 0.25, 0.75],
    "num_atoms": [8, 16, 32],
    "dropout_rate": [0.0, 0.1, 0.2],
    "lr": [2e-3, 1e-3, 5e-4, 2e-4, 1e-4, 5e-5],
}


@dataclass
class TrainConfig:
    lr: float = 1e-3
    max_epochs: int = 100
    patience: int = 5
    batch_size: int = 64
    seed: int = 42

    def __post_init__(self):
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")
        if self.lr <= 0 or self.batch_size < 1:
            raise ValueError("lr and batch_size must be positive")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = 0             # 1-indexed
    stop_reason: str = ""

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss", "lr"])
            for i, (tl, vl, lr) in enumerate(
                    zip(self.train_loss, self.val_loss, self.lr), start=1):
                w.writerow([i, repr(tl), repr(vl), repr(lr)])
            w.writerow(["best_epoch", self.best_epoch, "stop_reason", self.stop_reason])


class EarlyStopper:
    """Strict-improvement patience automaton over a validation-loss stream."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch (1-indexed); returns True when training should stop."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def set_seed(seed: int) -> dict[str, np.random.Generator]:
    """Named generator roots all derived from one seed."""
    ss = np.random.SeedSequence(seed)
    init, shuffle, synth = ss.spawn(3)
    return {
        "init": np.random.default_rng(init),
        "shuffle": np.random.default_rng(shuffle),
        "synth": np.random.default_rng(synth),
    }


def _shuffle_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[epoch, 0, 0, 1]))


def _eval_loss(model: SonnetModel, x, y, target, batch_size: int) -> float:
    total, n = 0.0, 0
    with ad.no_grad():
        for lo in range(0, len(x), batch_size):
            sl = slice(lo, lo + batch_size)
            out = model.forward(x[sl], y[sl], training=False)
            total += float(((out.data - target[sl]) ** 2).sum())
            n += target[sl].size
    return total / n


def train(model: SonnetModel, train_arrays, val_arrays, cfg: TrainConfig,
          progress=None):
    """Fit the model; returns (model restored to its best epoch, history).

    train_arrays / val_arrays are (X, y, target) stacks of shape
    (N, L, C), (N, L), (N, H) in whatever normalization the caller uses;
    the loss is the MSE over all H output steps.
    """
    xt, yt, tt = train_arrays
    xv, yv, tv = val_arrays
    if len(xt) == 0 or len(xv) == 0:
        raise ValueError("empty training or validation window set")

    params = model.parameters()
    state = AdamState()
    history = TrainHistory()
    stopper = EarlyStopper(cfg.patience)
    best_snapshot = None
    step = 0

    for epoch in range(cfg.max_epochs):
        lr = cfg.lr * (1.0 - epoch / cfg.max_epochs)
        order = _shuffle_rng(cfg.seed, epoch).permutation(len(xt))
        epoch_loss, seen = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo: lo + cfg.batch_size]
            tape = ad.Tape()
            with ad.use_tape(tape):
                out = model.forward(xt[idx], yt[idx], training=True, step=step)
                loss = ad.tmean(ad.square(out - Tensor(tt[idx])))
                if not np.isfinite(loss.data):
                    raise FloatingPointError(
                        f"training loss diverged at epoch {epoch + 1}")
                model.zero_grad()
                backward(loss, tape)
            adam_step(params, state, lr)
            epoch_loss += float(loss.data) * len(idx)
            seen += len(idx)
            step += 1
        val_loss = _eval_loss(model, xv, yv, tv, cfg.batch_size)
        history.train_loss.append(epoch_loss / seen)
        history.val_loss.append(val_loss)
        history.lr.append(lr)
        if progress is not None:
            progress(epoch + 1, epoch_loss / seen, val_loss)
        improved = val_loss < stopper.best
        stop = stopper.update(epoch + 1, val_loss)
        if improved:
            best_snapshot = {k: p.data.copy() for k, p in params.items()}
        if stop:
            history.stop_reason = "early_stopping"
            break
    else:
        history.stop_reason = "max_epochs"

    history.best_epoch = stopper.best_epoch
    if best_snapshot is not None:
        for k, p in params.items():
            p.data = best_snapshot[k]
    return model, history


def grid_search(base_model_cfg: ModelConfig, base_train_cfg: TrainConfig,
                grids: dict[str, list], train_arrays, val_arrays,
                run_trial=None):
    """Exhaustive product over grid axes, selected by lowest validation loss.

    ``run_trial(model_cfg, train_cfg)`` must return a validation loss; the
    default builds and trains a fresh model. Ties break toward the earlier
    config in product order. Returns (best_model_cfg, best_train_cfg,
    leaderboard) where the leaderboard lists one dict per grid point.
    """
    model_fields = set(ModelConfig.__dataclass_fields__)
    train_fields = set(TrainConfig.__dataclass_fields__)
    for axis, values in grids.items():
        if not values:
            raise ValueError(f"empty grid axis {axis!r}")
        if axis not in model_fields and axis not in train_fields:
            raise ValueError(f"unknown grid axis {axis!r}")

    if run_trial is None:
        def run_trial(mcfg, tcfg):
            model = SonnetModel(mcfg)
            _, hist = train(model, train_arrays, val_arrays, tcfg)
            return hist.best_val_loss

    axes = sorted(grids)
    leaderboard = []
    best = None
    for combo in itertools.product(*(grids[a] for a in axes)):
        point = dict(zip(axes, combo))
        mcfg = replace(base_model_cfg,
                       **{k: v for k, v in point.items() if k in model_fields})
        tcfg = replace(base_train_cfg,
                       **{k: v for k, v in point.items() if k in train_fields})
        val = run_trial(mcfg, tcfg)
        leaderboard.append({**point, "val_loss": val})
        if best is None or val < best[0]:
            best = (val, mcfg, tcfg)
    return best[1], best[2], leaderboard
