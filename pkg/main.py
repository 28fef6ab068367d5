# filename: main.py
import argparse
import os
import sys
from typing import List, Optional

from config import (
    EXIT_CONFIG_ERROR, EXIT_NUMERICAL_GUARD, EXIT_OK, LOG_FILE_NAME, OUTPUT_DIR,
)
from logger import enable_file_logging, get_logger, set_level
from parsers.config_parser import load_config
from services.experiment_service import cmd_bound, cmd_estimate, cmd_plot_data, cmd_select, cmd_sweep
from state.models import EstimationMethod, ModelDims
from utils.errors import RlctLabError

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlct-lab",
        description="RLCT bounds and Bayesian learning-curve experiments for stochastic matrix factorization.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--out", default=None, help=f"output directory (default {OUTPUT_DIR})")
    common.add_argument("--threads", type=int, default=None, help="worker threads")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    bound = sub.add_parser("bound", parents=[common], help="closed-form RLCT bound table")
    bound.add_argument("dims", nargs="*", type=int, metavar="M N H H0")
    bound.add_argument("--grid", nargs="+", default=None, metavar="NAME=LOW..HIGH",
                       help="e.g. M=2..4 N=2..4 H0=1..2 H=H0..3")
    bound.add_argument("--csv", default=None, help="write the table as CSV")

    estimate = sub.add_parser("estimate", parents=[common], help="estimate the RLCT numerically")
    estimate.add_argument("--config", required=True)
    estimate.add_argument("--method", choices=[m.value for m in EstimationMethod], default=None)

    sweep = sub.add_parser("sweep", parents=[common], help="learning-curve sweep over n_grid")
    sweep.add_argument("--config", required=True)

    select = sub.add_parser("select", parents=[common], help="choose the number of topics")
    select.add_argument("--dataset", nargs="+", default=None, help="count-table files in matrix text format")
    select.add_argument("--config", default=None, help="generate the dataset from this config instead")
    select.add_argument("--h-range", required=True, help="candidate H values, e.g. 1..4 or 1,2,3")
    select.add_argument("--json", default=None, help="write the selection table as JSON")

    plot = sub.add_parser("plot-data", parents=[common], help="emit .dat learning-curve files from sweeps")
    plot.add_argument("sweep_dir", nargs="?", default=None)
    return parser


def parse_h_range(text: str) -> List[int]:
    text = text.strip()
    try:
        if ".." in text:
            low, high = (int(x) for x in text.split("..", 1))
            return list(range(low, high + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Cannot parse H range '{text}'") from None


def _load(args: argparse.Namespace, method: Optional[str] = None):
    config = load_config(args.config)
    return config.with_overrides(seed=args.seed, output_dir=args.out, workers=args.threads, method=method)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_level("DEBUG")
    out_dir = args.out or OUTPUT_DIR
    try:
        if args.command == "bound":
            dims = None
            if args.dims:
                if len(args.dims) != 4:
                    parser.error("bound takes exactly four integers: M N H H0")
                dims = ModelDims(*args.dims)
            cmd_bound(dims=dims, grid_tokens=args.grid, csv_path=args.csv)
            return EXIT_OK

        os.makedirs(out_dir, exist_ok=True)
        enable_file_logging(os.path.join(out_dir, LOG_FILE_NAME))
        if args.command == "estimate":
            config = _load(args, args.method)
            cmd_estimate(config)
        elif args.command == "sweep":
            cmd_sweep(_load(args))
        elif args.command == "select":
            config = _load(args) if args.config else None
            cmd_select(parse_h_range(args.h_range), dataset_paths=args.dataset, config=config,
                       seed=args.seed or 0, out_path=args.json)
        elif args.command == "plot-data":
            cmd_plot_data(args.sweep_dir or out_dir)
        return EXIT_OK
    except argparse.ArgumentTypeError as e:
        logger.error(str(e))
        return EXIT_CONFIG_ERROR
    except RlctLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG_ERROR
    except ArithmeticError as e:
        logger.exception(f"Numerical failure: {e}")
        return EXIT_NUMERICAL_GUARD


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
