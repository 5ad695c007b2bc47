import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from .config import DEFAULT_SEED
from .errors import CestError
from .models import ModelKind
from .pipeline import NETWORK, CestPipeline

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130

SOLVER_CHOICES = ["nelder-mead", "powell", "lbfgsb", NETWORK]


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--json", action="store_true", help="print the full result as JSON")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true")
    verbosity.add_argument("--quiet", "-q", action="store_true")


def _model_flags(parser: argparse.ArgumentParser, multiple: bool = False):
    kinds = [k.value for k in ModelKind]
    if multiple:
        parser.add_argument("--model", nargs="+", choices=kinds, dest="models")
    else:
        parser.add_argument("--model", choices=kinds, default=ModelKind.ANALYTICAL_Z.value)
    parser.add_argument("--bounds", help="model/bounds config (JSON or YAML)")
    parser.add_argument("--gamma-preset", choices=["standard", "narrow"], default="standard",
                        help="Lorentzian Γ² range when no bounds file is given")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cestfit", description="CEST Z-spectrum quantification")
    sub = parser.add_subparsers(dest="action", required=True)

    p = sub.add_parser("synth", help="generate a synthetic phantom dataset")
    p.add_argument("--spec", help="phantom spec (JSON or YAML); defaults to the nine-phantom design")
    p.add_argument("--b0-shift", type=float, default=0.0, help="inject a B0 shift (ppm)")
    p.add_argument("--b0-jitter", type=float, default=0.0)
    _common(p)

    p = sub.add_parser("preprocess", help="B0-correct every spectrum of a dataset")
    p.add_argument("data")
    p.add_argument("--search-window", type=float, default=1.0)
    p.add_argument("--strict", action="store_true", help="fail instead of clamping at the grid edges")
    _common(p)

    p = sub.add_parser("fit", help="fit every spectrum set with a solver")
    p.add_argument("data")
    _model_flags(p)
    p.add_argument("--solver", choices=SOLVER_CHOICES, default="lbfgsb")
    p.add_argument("--solver-config", help="solver settings (JSON or YAML)")
    p.add_argument("--init", choices=["center", "random"])
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--preset", choices=["paper", "desk"], default="desk")
    p.add_argument("--epochs", type=int)
    p.add_argument("--folds", type=int)
    _common(p)

    p = sub.add_parser("train", help="k-fold self-supervised network training")
    p.add_argument("data")
    _model_flags(p)
    p.add_argument("--preset", choices=["paper", "desk"], default="desk")
    p.add_argument("--epochs", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    _common(p)

    p = sub.add_parser("predict", help="held-out predictions from fold checkpoints")
    p.add_argument("data")
    p.add_argument("--checkpoints", required=True)
    _common(p)

    p = sub.add_parser("eval", help="zero-intercept regression R² against the dataset labels")
    p.add_argument("data")
    p.add_argument("--results", required=True, help="output directory of fit or predict")
    p.add_argument("--grouping", choices=["pixel", "phantom"], default="pixel")
    p.add_argument("--std", choices=["sample", "population"], default="sample")
    p.add_argument("--contrast", choices=["amplitude", "auc"], default="amplitude")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--plot", action="store_true", help="write SVG scatter plots")
    _common(p)

    p = sub.add_parser("bench", help="per-datapoint runtime of solvers and the network")
    p.add_argument("data")
    _model_flags(p, multiple=True)
    p.add_argument("--solver", nargs="+", choices=SOLVER_CHOICES, dest="solvers")
    p.add_argument("--preset", choices=["paper", "desk"], default="desk")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--limit", type=int, help="benchmark only the first N sets")
    _common(p)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    payload = {k: v for k, v in vars(args).items() if v is not None and k not in ("verbose", "quiet", "json")}

    try:
        result = CestPipeline().process_task(payload)
    except KeyboardInterrupt:
        print("interrupted; partial results were flushed", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (CestError, ValidationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logging.exception(f"{args.action} failed")
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL

    if args.json:
        print(json.dumps(result, indent=2, default=str))
    else:
        print(result.get("message", ""))
    return EXIT_OK if result.get("status") == "success" else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
