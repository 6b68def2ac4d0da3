#!/usr/bin/env python3
"""
matchlab: Monte Carlo experiments on optimal matching of random points on the flat torus

Usage:
    python matchlab.py trace-check
    python matchlab.py cost-rate --n 64,256,1024 --replicas 16 --threads 4
    python matchlab.py all --config runs/desk.conf --out results/desk
"""

import argparse
import sys

from dotenv import load_dotenv

from experiments.config import build_settings, load_config_file
from experiments.suites import SUITES, SuiteContext
from models.errors import AccuracyError, ConfigError, ConvergenceError, InvalidArgumentError
from replica_runner import create_replica_runner
from run_recorder import RunRecorder


# Load environment variables
load_dotenv()

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SUBCOMMANDS = [*SUITES, "all"]


def parse_n_list(text: str) -> list[int]:
    """Comma-separated sample sizes, e.g. '64,256,1024'"""
    try:
        values = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e
    if not values:
        raise argparse.ArgumentTypeError("expected at least one sample size")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchlab",
        description="Optimal matching on the flat torus: kernels, transport and rate experiments",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Experiment to run")
    parser.add_argument("--config", metavar="PATH", help="Flat 'key = value' config file")
    parser.add_argument("--out", metavar="DIR", help="Output directory (default: results)")
    parser.add_argument("--seed", type=int, metavar="U64", help="Base seed")
    parser.add_argument("--replicas", type=int, metavar="N", help="Replicas per estimate")
    parser.add_argument("--n", type=parse_n_list, metavar="LIST", help="Sample sizes, comma separated")
    parser.add_argument("--grid-m", type=int, metavar="N", help="Pixels per side (default: 16 sqrt(n))")
    parser.add_argument(
        "--threads", type=int, metavar="N", help="Worker threads (fallback: MATCHLAB_THREADS)"
    )
    parser.add_argument(
        "--keep-replicas",
        action="store_true",
        default=None,
        help="Store per-replica values in the JSONL output",
    )
    parser.add_argument("--quiet", action="store_true", help="Suppress status lines")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, object]:
    """Command-line values keyed by config name; None means 'not given'"""
    return {
        "out_dir": args.out,
        "seed": args.seed,
        "replicas": args.replicas,
        "n_list": args.n,
        "grid_m": args.grid_m,
        "threads": args.threads,
        "keep_replicas": args.keep_replicas,
    }


def run_suite(name: str, ctx: SuiteContext) -> int:
    """Run one subcommand and map its outcome to an exit code"""
    if not ctx.quiet:
        print(f"\n📊 {name}")
        print("-" * 40)
    try:
        passed = SUITES[name](ctx)
    except (ConfigError, InvalidArgumentError) as e:
        print(f"✗ {name}: invalid argument: {e}", file=sys.stderr)
        ctx.recorder.record_error(name, e)
        return EXIT_CONFIG
    except (ConvergenceError, AccuracyError) as e:
        print(f"✗ {name}: numerical failure: {e}", file=sys.stderr)
        ctx.recorder.record_error(name, e)
        return EXIT_NUMERICAL
    if not passed:
        print(f"✗ {name}: acceptance checks failed")
        return EXIT_CHECK_FAILED
    if not ctx.quiet:
        print(f"✓ {name} completed")
    return EXIT_OK


def run(
    subcommand: str,
    config_path: str | None = None,
    overrides: dict[str, object] | None = None,
    quiet: bool = False,
) -> int:
    """
    Execute a subcommand (or all of them) and write CSV/JSONL results plus manifest.json

    Args:
        subcommand: One of SUBCOMMANDS
        config_path: Optional config file
        overrides: Command-line values; they win over file values
        quiet: Suppress status lines

    Returns:
        0 success, 1 failed acceptance check, 2 configuration error, 3 numerical failure
    """
    if subcommand not in SUBCOMMANDS:
        print(f"✗ Unknown subcommand '{subcommand}'", file=sys.stderr)
        return EXIT_CONFIG
    try:
        settings = build_settings(load_config_file(config_path), overrides or {})
        runner = create_replica_runner(settings.threads, quiet)
    except ConfigError as e:
        key = f" (key '{e.key}')" if e.key else ""
        print(f"✗ Configuration error{key}: {e}", file=sys.stderr)
        return EXIT_CONFIG

    recorder = RunRecorder(
        out_dir=settings.out_dir,
        seed=settings.seed,
        config=settings.echo(),
        config_path=config_path,
        keep_replicas=settings.keep_replicas,
        quiet=quiet,
    )
    ctx = SuiteContext(settings=settings, recorder=recorder, runner=runner, quiet=quiet)
    names = list(SUITES) if subcommand == "all" else [subcommand]
    exit_code = EXIT_OK
    try:
        for name in names:
            code = run_suite(name, ctx)
            recorder.finish_subcommand(name, code)
            exit_code = max(exit_code, code)
    finally:
        recorder.write_manifest()
        recorder.print_summary()
    return exit_code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, overrides_from_args(args), args.quiet)


if __name__ == "__main__":
    sys.exit(main())
