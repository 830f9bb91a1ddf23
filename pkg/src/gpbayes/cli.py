"""Command-line experiment driver.

Usage: ``gpbayes <kind> --config <file> [--out <dir>] [--seed <u64>]
[--threads <n>]``. The config's ``experiment.kind`` must match the
subcommand. Exit codes: 0 success, 1 config/validation failure (the
message names the offending key), 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import SCHEMAS, ConfigError, parse_config
from .experiments import RUNNERS


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpbayes",
        description="Config-driven experiments: GP sample paths, regression, "
        "surrogate-accelerated Bayesian inversion, and design studies.",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in SCHEMAS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory (default: <config stem>_out)")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument(
            "--threads", type=int, default=None,
            help="cap the numba threading layer (current kernels are "
            "single-threaded, so results never depend on this)",
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, seed_override=args.seed,
                           threads_override=args.threads)
        if cfg.kind != args.kind:
            raise ConfigError(
                f"experiment.kind is {cfg.kind!r} but the {args.kind!r} "
                "subcommand was invoked"
            )
        if cfg.get("experiment", "threads") < 1:
            raise ConfigError("experiment.threads must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    threads = cfg.get("experiment", "threads")
    if threads > 1:
        try:
            from ._accel import USE_NUMBA

            if USE_NUMBA:
                import numba

                numba.set_num_threads(threads)
        except ValueError:
            pass  # thread cap above hardware count; harmless

    out_dir = Path(args.out) if args.out else Path(args.config).with_suffix("").parent / (
        Path(args.config).stem + "_out"
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved.cfg").write_text(cfg.resolved_text())

    try:
        RUNNERS[cfg.kind](cfg, out_dir)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure in {cfg.kind}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
