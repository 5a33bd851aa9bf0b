"""
Command-line entry point.

    python src/main.py run configs/vortex_entropy.json --threads 4
    python src/main.py run --preset freestream
    python src/main.py sweep configs/vortex_convergence.json --grids 4,8,16
    python src/main.py presets
"""

import argparse
import sys
import time

from constants import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, VERSION
from errors import ConfigError, SolverError
from logic import apply_overrides, convergence_sweep, load_config, preset_config, run_case
from presets import get_preset_names


def make_logger(quiet=False, stream=None):
    """Log callback prefixing messages with elapsed wall time; --quiet silences it."""
    started = time.perf_counter()

    def log_callback(msg):
        if quiet:
            return
        print(f"[{time.perf_counter() - started:9.2f}s] {msg}", file=stream or sys.stdout, flush=True)

    return log_callback


def parse_grids(text):
    try:
        grids = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"grids must be comma-separated integers, got '{text}'") from e
    if not grids or any(n < 1 for n in grids):
        raise argparse.ArgumentTypeError(f"grids must be positive integers, got '{text}'")
    return grids


def build_parser():
    parser = argparse.ArgumentParser(
        prog="esbp",
        description="Entropy-stable curvilinear SBP solver for the Euler, Burgers and linear convection equations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_options(p):
        p.add_argument("config", nargs="?", help="JSON run configuration")
        p.add_argument("--preset", choices=get_preset_names(), help="run a named preset instead of a file")
        p.add_argument("--threads", type=int, help="worker threads (0 = all cores)")
        p.add_argument("--seed", type=int, help="degree assignment seed")
        p.add_argument("--no-dissipation", action="store_true", help="entropy-conservative interface coupling only")
        p.add_argument("--output", help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")

    add_run_options(sub.add_parser("run", help="run one configured case"))
    sweep = sub.add_parser("sweep", help="convergence study on nested grids")
    add_run_options(sweep)
    sweep.add_argument("--grids", type=parse_grids, required=True, help="elements per axis, e.g. 4,8,16")
    sub.add_parser("presets", help="list the named presets")
    return parser


def resolve_from_args(args):
    """
    Resolved configuration from a file or preset plus command-line overrides.

    Raises:
        ConfigError: neither or both of config and --preset, or invalid values.
    """
    if (args.config is None) == (args.preset is None):
        raise ConfigError("give exactly one of a configuration file or --preset")
    config = load_config(args.config) if args.config else preset_config(args.preset)
    return apply_overrides(config, threads=args.threads, seed=args.seed,
                           dissipation=False if args.no_dissipation else None, output=args.output)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name in get_preset_names():
            print(name)
        return EXIT_OK

    log_callback = make_logger(args.quiet)
    try:
        config = resolve_from_args(args)
        if args.command == "run":
            _, summary = run_case(config, log_callback=log_callback)
            return summary["exit_code"]
        _, result = convergence_sweep(config, args.grids, log_callback=log_callback)
        return result["exit_code"]
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:  # pylint: disable=broad-exception-caught
        print(f"Unexpected error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
