"""Command-line entry point.

    gminmax --config experiment.toml [--experiment NAME] [--seed N]
            [--out DIR] [--trials N] [--jobs N]

Flags override the corresponding config keys.  Exit codes: 0 success,
2 check violation, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .harness import EXIT_SOLVER_FAILURE, ExperimentConfig, load_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gminmax",
        description="Run regression/classification sweeps and verification checks",
    )
    parser.add_argument("--config", help="TOML experiment config")
    parser.add_argument(
        "--experiment",
        choices=["regression_sweep", "classification_sweep", "checks"],
        help="override the config's experiment",
    )
    parser.add_argument("--seed", type=int, help="override master_seed")
    parser.add_argument("--out", help="override output_dir")
    parser.add_argument("--trials", type=int, help="override trials")
    parser.add_argument("--jobs", type=int, help="worker pool size for sweep points")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.experiment:
            cfg = ExperimentConfig(experiment=args.experiment, lambda_grid=[1.0])
        else:
            print("either --config or --experiment is required", file=sys.stderr)
            return EXIT_SOLVER_FAILURE
        overrides = {
            "experiment": args.experiment,
            "master_seed": args.seed,
            "output_dir": args.out,
            "trials": args.trials,
            "jobs": args.jobs,
        }
        updates = {key: val for key, val in overrides.items() if val is not None}
        if updates:
            cfg = dataclasses.replace(cfg, **updates)
    except Exception as exc:  # noqa: BLE001
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    return run_experiment(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
