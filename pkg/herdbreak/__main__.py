from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

try:
    from herdbreak import config, pipeline
except ImportError:
    traceback.print_exc()
    print()
    print("You need to create a venv and install the dependencies into it with pip.")
    print("See README.md for instructions.")
    sys.exit(1)


def _parse_bool(text: str) -> bool:
    if text.lower() in {"1", "true", "yes", "on"}:
        return True
    if text.lower() in {"0", "false", "no", "off"}:
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, not {text!r}")


# (flag, config key, type, help)
_OVERRIDES = [
    ("--epsilon", "epsilon", float, "probability that the product quality flips"),
    ("--p", "p", float, "crossover probability of the private signal"),
    ("--cost", "c", float, "cost of writing a review"),
    ("--initial-belief", "initial_belief", float, "P(product is good) at the start"),
    ("--grid-size", "grid_size", int, "number of belief grid points"),
    ("--vi-tol", "vi_tol", float, "stop value iteration when the span is below this"),
    ("--max-iters", "max_iters", int, "give up value iteration after this many steps"),
    ("--horizon", "horizon", int, "periods averaged in each simulation"),
    ("--burn-in", "burn_in", int, "periods discarded before averaging"),
    ("--replications", "num_replications", int, "independent simulation runs"),
    ("--seed", "seed", int, "seed of all random draws"),
    (
        "--pay-on-difference-set",
        "pay_on_difference_set",
        _parse_bool,
        "pay where team and strategic policies differ (true) or agree (false)",
    ),
    ("--extra-bonus-delta", "extra_bonus_delta", float, "paid on top of the cost"),
    ("--bins", "occupancy_bins", int, "bins of the belief occupancy histogram"),
    ("--out", "out_dir", str, "output directory"),
]


def main() -> int:
    parser = argparse.ArgumentParser(
        prog="herdbreak",
        description="Solve, compare and simulate buyers who can review a product.",
    )
    parser.add_argument(
        "command",
        nargs="?",
        default="all",
        choices=list(pipeline.SUBCOMMANDS),
        help="which stages to run (default: all)",
    )
    parser.add_argument("--config", type=Path, help="read settings from this JSON file")
    parser.add_argument(
        "--no-config", action="store_true", help="do not read any config file"
    )
    for flag, key, type_, help_text in _OVERRIDES:
        parser.add_argument(flag, dest=key, type=type_, default=None, help=help_text)
    parser.add_argument(
        "--include-dominated",
        action="store_true",
        default=None,
        help="let the planner choose all 16 gamma functions",
    )
    parser.add_argument(
        "--snap-to-grid",
        action="store_true",
        default=None,
        help="simulate with grid policy lookups instead of exact recomputation",
    )
    args = parser.parse_args()

    run_config = config.default_config()
    if not args.no_config:
        path = config.default_config_path() if args.config is None else args.config
        file_config = config.load_from_file(path)
        if file_config is None and args.config is not None:
            print(f"config file not found: {path}")
            return pipeline.EXIT_BAD_CONFIG
        if file_config is not None:
            run_config = file_config

    keys = [key for flag, key, type_, help_text in _OVERRIDES]
    for key in keys + ["include_dominated", "snap_to_grid"]:
        value = getattr(args, key)
        if value is not None:
            run_config[key] = value  # type: ignore[literal-required]

    return pipeline.run_pipeline(run_config, args.command)


if __name__ == "__main__":
    sys.exit(main())
