#!/usr/bin/env python3
"""Module-removal ablation sweep on a synthetic seasonal series.

Trains the full model and the five single-module removals under the same
seed and splits, then prints the MAE delta table (also written to
<workdir>/ablation.csv).

Usage: python3 scripts/ablation_sweep.py [--workdir out/ablation] [--epochs 15]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sonnet import data as D  # noqa: E402
from sonnet import experiment as E  # noqa: E402
from sonnet.config import parse_config_text  # noqa: E402

CONFIG_TEMPLATE = """\
dataset.path = {data}
dataset.target = y
split.train = 0:900
split.val = 900:1100
split.test = 1100:1400

model.lookback = 24
model.horizon = 4
model.n_exog = 2
model.width = 16
model.num_atoms = 4
model.seed = 42

train.lr = 0.002
train.max_epochs = {epochs}
train.patience = 5
train.seed = 42

eval.mode = target-step
output_dir = {out}
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="out/ablation")
    ap.add_argument("--epochs", type=int, default=15)
    args = ap.parse_args()

    os.makedirs(args.workdir, exist_ok=True)
    data_path = os.path.join(args.workdir, "sinusoid.csv")
    D.save_csv(D.make_synthetic("sinusoid", 1400, seed=7), data_path)

    cfg = parse_config_text(CONFIG_TEMPLATE.format(
        data=data_path, epochs=args.epochs, out=args.workdir))
    results = E.run_ablate(cfg)

    full = results["full"]
    print(f"\n{'variant':<10} {'mae':>8} {'delta':>8}")
    for variant, value in results.items():
        delta = 0.0 if variant == "full" else (value - full) / full * 100
        print(f"{variant:<10} {value:8.4f} {delta:+7.2f}%")


if __name__ == "__main__":
    main()
