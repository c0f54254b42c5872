"""Command-line surface: train / evaluate / forecast / grid-search /
ablate / synth, all driven by a key = value configuration file.

Exit statuses: 0 success, 1 runtime failure, 2 configuration or usage
error.
"""

from __future__ import annotations

import argparse
import sys

from . import data as D
from . import experiment as E
from .checkpoint import CheckpointError
from .config import ConfigError, load_config

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonnet",
        description="Spectral multivariable time-series forecasting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="experiment configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key")
        return p

    p = with_config(sub.add_parser("train", help="fit a model, write checkpoint + history"))
    p = with_config(sub.add_parser("evaluate", help="score a checkpoint on the test seasons"))
    p.add_argument("checkpoint", help="model checkpoint file")
    p = with_config(sub.add_parser("forecast", help="emit predictions without metrics"))
    p.add_argument("checkpoint", help="model checkpoint file")
    with_config(sub.add_parser("grid-search", help="exhaustive hyperparameter search"))
    with_config(sub.add_parser("ablate", help="train and compare module-removal variants"))

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("kind", choices=["sinusoid", "seasonal-walk", "leading-indicator"])
    p.add_argument("out", help="output CSV path")
    p.add_argument("-n", type=int, default=2000, help="number of rows")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--lead", type=int, default=4,
                   help="leading-indicator shift (steps into the future)")
    p.add_argument("--period", type=int, default=24, help="seasonal period")
    return parser


def _progress(epoch, train_loss, val_loss):
    print(f"epoch {epoch:3d}  train {train_loss:.6f}  val {val_loss:.6f}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            table = D.make_synthetic(args.kind, args.n, args.seed,
                                     lead=args.lead, period=args.period)
            D.save_csv(table, args.out)
            print(f"wrote {args.out} ({len(table)} rows, {table.n_exog} exogenous)")
            return 0

        cfg = load_config(args.config, overrides=args.set)
        if args.command == "train":
            ckpt, history = E.run_train(cfg, progress=_progress)
            print(f"checkpoint: {ckpt}  best epoch {history.best_epoch} "
                  f"({history.stop_reason})")
        elif args.command == "evaluate":
            report = E.run_evaluate(cfg, args.checkpoint)
            for row in report.rows:
                r = "n/a" if row["r"] is None else f"{row['r']:.4f}"
                print(f"{row['season']:<10} {row['mode']:<14} {row['model']:<22} "
                      f"mae {row['mae']:.4f}  smape {row['smape']:.4f}  r {r}")
        elif args.command == "forecast":
            out = E.run_forecast(cfg, args.checkpoint)
            print(f"wrote {out}")
        elif args.command == "grid-search":
            best_m, best_t, board = E.run_grid(cfg)
            print(f"evaluated {len(board)} grid points")
            print(f"best: alpha={best_m.alpha} K={best_m.num_atoms} "
                  f"dropout={best_m.dropout_rate} lr={best_t.lr}")
        elif args.command == "ablate":
            results = E.run_ablate(cfg)
            full = results["full"]
            for variant, value in results.items():
                delta = 0.0 if variant == "full" else (value - full) / full * 100
                print(f"{variant:<10} mae {value:.4f}  delta {delta:+.2f}%")
        return 0
    except (ConfigError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except D.DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
