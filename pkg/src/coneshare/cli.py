"""Command line interface.

Subcommands:
    run      execute an experiment config, writing CSVs and figures
    validate check the configured step sizes against their certificate
    bound    resolve and print the multiplier-norm bound B

Exit codes: 0 success, 2 configuration error, 3 step-size validation
failure, 4 numerical failure during solving.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, apply_overrides, bound_experiment, \
    parse_config, run_experiment, validate_experiment
from .solver import NumericalError, StepSizeError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STEPS = 3
EXIT_NUMERICAL = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="coneshare",
        description="Distributed primal-dual solvers for conically coupled "
                    "resource sharing",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the INI config file")
    p_run.add_argument("--reps", type=int, default=None,
                       help="override the number of replications")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
    p_run.add_argument("--out-dir", default=None,
                       help="override the output directory")
    p_val = sub.add_parser("validate", help="check step-size certificates")
    p_val.add_argument("config")
    p_val.add_argument("--seed", type=int, default=None)
    p_bound = sub.add_parser("bound", help="print the dual-norm bound B")
    p_bound.add_argument("config")
    p_bound.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        cfg = apply_overrides(cfg, reps=getattr(args, "reps", None),
                              seed=args.seed,
                              out_dir=getattr(args, "out_dir", None))
        if args.command == "run":
            paths = run_experiment(cfg)
            print(f"wrote {paths['runs']}")
            print(f"wrote {paths['aggregate']}")
            print(f"wrote {paths['manifest']}")
            for fig in paths["figures"]:
                print(f"wrote {fig}")
            return EXIT_OK
        if args.command == "validate":
            ok, lines = validate_experiment(cfg)
            print("\n".join(lines))
            return EXIT_OK if ok else EXIT_STEPS
        b = bound_experiment(cfg)
        print(repr(b))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepSizeError as exc:
        print(f"step-size validation failed: {exc}", file=sys.stderr)
        return EXIT_STEPS
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
