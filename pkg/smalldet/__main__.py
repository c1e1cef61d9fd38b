#!/usr/bin/env python3
"""
SMALLDET: small-deviation toolkit for Gaussian random-matrix determinants

Command-line surface with one subcommand per verification workflow.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .config import FIELD_NAMES, ConfigManager, RunConfig
from .errors import (
    EXIT_OK,
    EXIT_PRECONDITION,
    EXIT_USAGE,
    EXIT_VERDICT_FAILED,
    SmallDetError,
    UsageError,
)
from .gaussian_model import compute_d_values, d_values_stabilization
from .montecarlo import (
    bound_check,
    complex_law_fit,
    default_gamma_scale,
    run_lemma_cases,
)
from .reports import (
    BOUND_CHECK_COLUMNS,
    export_product_law,
    product_law_columns,
    product_law_rows,
    render_report,
    write_text,
)
from .scalar_laws import GammaProductSpec, build_product_law
from .ui import (
    print_bound_check,
    print_complex_law,
    print_d_values,
    print_error,
    print_lemma_report,
    print_product_law,
    print_stabilization,
)

DEFAULT_LOG_FILE = Path.home() / ".smalldet.log"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def configure_logging(log_file: Optional[str] = None, verbose: bool = False) -> None:
    """Log to a file; --verbose adds a rich handler on stderr."""
    handlers: List[logging.Handler] = []
    path = Path(log_file).expanduser() if log_file else DEFAULT_LOG_FILE
    try:
        handlers.append(logging.FileHandler(path))
    except OSError:
        handlers.append(logging.NullHandler())
    if verbose:
        handlers.append(
            RichHandler(console=Console(stderr=True), show_path=False, markup=False)
        )
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--spec",
        metavar="SPEC",
        help="Covariance spec: 'iid', 'kind=equicorrelated rho=0.3', "
        "'kind=diagonal sigma=1,2', 'kind=ar1 rho=0.4' or 'dense=FILE'",
    )
    common.add_argument("--n", type=int, help="Matrix row count")
    common.add_argument("--m", type=int, help="Matrix column count (default: n)")
    common.add_argument(
        "--eps",
        type=float,
        action="append",
        help="Threshold; repeat for several values",
    )
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--seed", type=int, help="Base seed")
    common.add_argument("--workers", type=int, help="Worker threads")
    common.add_argument("--out", metavar="PATH", help="Write the report to PATH")
    common.add_argument("--format", choices=["csv", "json"], help="Report format")
    common.add_argument("--config", metavar="FILE", help="JSON run configuration")
    common.add_argument(
        "--save-config",
        metavar="FILE",
        help="Write the effective run configuration to FILE",
    )
    common.add_argument("--log-file", metavar="FILE", help="Log file (default: ~/.smalldet.log)")
    common.add_argument(
        "--verbose", action="store_true", help="Also log to the terminal"
    )

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-step", type=float, help="Log-scale grid step (default 2^-7)")
    grid.add_argument("--u-min", type=float, help="Lower truncation of log factors")
    grid.add_argument("--u-max", type=float, help="Upper truncation of log factors")
    grid.add_argument("--t-min", type=float, help="Lowest tabulated log threshold")
    grid.add_argument("--t-max", type=float, help="Highest tabulated log threshold")

    parser = argparse.ArgumentParser(
        prog="smalldet",
        description="Small-deviation probabilities of Gaussian random-matrix determinants",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  smalldet d-values --spec "kind=equicorrelated rho=0.3" --n 3
  smalldet product-law --n 2 --eps 1e-3 --eps 1e-8 --asymptotic --out law.csv
  smalldet bound-check --n 2 --eps 0.2 --eps 0.1 --trials 1000000 --workers 4
  smalldet lemma-check --cases 500
  smalldet complex-law --n 2 --trials 100000
        """,
    )
    parser.add_argument("--version", action="version", version=f"smalldet {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    d_values = commands.add_parser(
        "d-values", parents=[common], help="Conditional residual variances d_k"
    )
    d_values.add_argument(
        "--require-positive",
        action="store_true",
        default=None,
        help="Exit with status 3 if some d_k = 0",
    )
    d_values.add_argument(
        "--stabilize",
        type=int,
        metavar="K",
        help="Also report d_k for every column count m = n..K",
    )

    product_law = commands.add_parser(
        "product-law", parents=[common, grid], help="Law of a product of |N(0,1)| factors"
    )
    product_law.add_argument(
        "--asymptotic",
        action="store_true",
        default=None,
        help="Add the small-eps asymptotic and the exact/asymptotic ratio",
    )

    bound = commands.add_parser(
        "bound-check", parents=[common, grid], help="Monte Carlo check of the product bound"
    )
    bound.add_argument("--variant", choices=["square", "gram"], help="Determinant statistic")
    bound.add_argument("--block-size", type=int, help="Trials per random substream")
    bound.add_argument(
        "--first-trial", type=int, help="First trial index (a multiple of the block size)"
    )
    bound.add_argument("--confidence", type=float, help="Interval confidence (default 0.99)")

    lemma = commands.add_parser(
        "lemma-check", parents=[common], help="Column-append identity on random cases"
    )
    lemma.add_argument("--cases", type=int, help="Number of seeded cases")
    lemma.add_argument("--n-max", type=int, help="Largest row count")
    lemma.add_argument("--m-max", type=int, help="Largest column count")

    complex_law = commands.add_parser(
        "complex-law", parents=[common, grid], help="KS fit of det(M M*) to a gamma product"
    )
    complex_law.add_argument(
        "--convention",
        choices=["unit-complex", "unit-per-part"],
        help="Complex entry normalization",
    )
    complex_law.add_argument(
        "--shapes", type=_float_list, help="Gamma shapes, comma-separated (default: calibrate)"
    )
    complex_law.add_argument("--scale", type=float, help="Gamma scale")
    complex_law.add_argument(
        "--law-method", choices=["convolution", "montecarlo"], help="How the law CDF is computed"
    )

    return parser


def _reject_unused_flags(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.command == "lemma-check" and (args.n is not None or args.m is not None):
        parser.error("lemma-check draws its own sizes; use --n-max/--m-max instead of --n/--m")


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    values = vars(args)
    return {name: values[name] for name in FIELD_NAMES if name in values and name != "command"}


def _emit(
    config: RunConfig,
    rows: Sequence[Dict[str, Any]],
    columns: Sequence[str],
    metadata: Dict[str, Any],
    console: Console,
) -> None:
    if not config.out:
        return
    path = write_text(config.out, render_report(rows, columns, config.format, metadata))
    console.print(f"[green]✓ Wrote {path}[/green]")


def handle_cli_d_values(config: RunConfig, console: Console) -> int:
    """Handle the d-values subcommand."""
    spec = config.covariance()
    d = compute_d_values(spec, config.n, config.m)
    print_d_values(d, spec.label(), console)

    tables = [d]
    if config.stabilize is not None:
        tables = d_values_stabilization(spec, config.n, range(config.n, config.stabilize + 1))
        print_stabilization(tables, console)

    rows = [
        {"m": table.m, "k": k, "d_k": value, "epsilon0_scale": table.epsilon0_scale}
        for table in tables
        for k, value in enumerate(table.values, start=1)
    ]
    metadata = {"spec": spec.describe(), "n": config.n, "m": d.m}
    _emit(config, rows, ["m", "k", "d_k", "epsilon0_scale"], metadata, console)

    if config.require_positive and not d.all_positive:
        print_error(f"d_k = 0 for k in {d.zero_indices()}")
        return EXIT_PRECONDITION
    return EXIT_OK


def handle_cli_product_law(config: RunConfig, console: Console) -> int:
    """Handle the product-law subcommand."""
    table = build_product_law(config.n, config.grid())
    print_product_law(table, config.eps, config.asymptotic, console)

    if config.out:
        if config.format == "csv":
            sidecar = export_product_law(table, config.out, config.asymptotic)
            console.print(f"[green]✓ Wrote {config.out} and {sidecar}[/green]")
        else:
            rows = product_law_rows(table, config.asymptotic)
            _emit(config, rows, product_law_columns(config.asymptotic), table.metadata(), console)
    return EXIT_OK


def handle_cli_bound_check(config: RunConfig, console: Console) -> int:
    """Handle the bound-check subcommand."""
    spec = config.covariance()
    report = bound_check(
        spec,
        config.n,
        config.m,
        config.eps,
        config.trials,
        config.seed,
        workers=config.workers,
        variant=config.variant,
        block_size=config.block_size,
        first_trial=config.first_trial,
        confidence=config.confidence,
        grid=config.grid(),
    )
    print_bound_check(report, console)

    metadata = {
        "spec": spec.describe(),
        "variant": report.variant,
        "seed": config.seed,
        "first_trial": config.first_trial,
        "block_size": config.block_size,
        "confidence": config.confidence,
        "d_values": list(report.d_values.values),
        "error_estimate": report.error_estimate,
    }
    _emit(config, [row.to_dict() for row in report.rows], BOUND_CHECK_COLUMNS, metadata, console)
    return EXIT_OK if report.all_passed else EXIT_VERDICT_FAILED


def handle_cli_lemma_check(config: RunConfig, console: Console) -> int:
    """Handle the lemma-check subcommand."""
    report = run_lemma_cases(config.n_max, config.m_max, config.cases, config.seed)
    print_lemma_report(report, console)

    rows = [
        {
            "index": case.index,
            "n": case.n,
            "m": case.m,
            "kind": case.kind,
            "lhs": case.lhs,
            "rhs": case.rhs,
            "gap": case.gap,
            "relative_gap": case.relative_gap,
        }
        for case in report.cases
    ]
    metadata = {
        "seed": config.seed,
        "max_relative_gap": report.max_relative_gap,
        "min_margin": report.min_margin,
    }
    columns = ["index", "n", "m", "kind", "lhs", "rhs", "gap", "relative_gap"]
    _emit(config, rows, columns, metadata, console)
    return EXIT_OK if report.passed else EXIT_VERDICT_FAILED


def handle_cli_complex_law(config: RunConfig, console: Console) -> int:
    """Handle the complex-law subcommand."""
    law = None
    if config.shapes:
        if len(config.shapes) != config.n:
            raise UsageError(f"--shapes needs {config.n} values, got {len(config.shapes)}")
        scale = config.scale if config.scale is not None else default_gamma_scale(config.convention)
        law = GammaProductSpec(tuple(config.shapes), scale)

    report = complex_law_fit(
        config.n,
        config.trials,
        config.seed,
        law=law,
        convention=config.convention,
        method=config.law_method,
        workers=config.workers,
        grid=config.grid(),
    )
    print_complex_law(report, console)

    row = {
        "n": report.n,
        "trials": report.trials,
        "convention": report.convention,
        "method": report.method,
        "shapes": ";".join(repr(s) for s in report.law.shapes),
        "scale": report.law.scale,
        **report.ks.to_dict(),
    }
    metadata: Dict[str, Any] = {"seed": config.seed, "law": report.law.describe()}
    if report.calibration is not None:
        metadata["calibration"] = [
            {"law": spec.describe(), **ks.to_dict()} for spec, ks in report.calibration.candidates
        ]
    columns = list(row)
    _emit(config, [row], columns, metadata, console)
    return EXIT_OK if report.passed else EXIT_VERDICT_FAILED


HANDLERS: Dict[str, Callable[[RunConfig, Console], int]] = {
    "d-values": handle_cli_d_values,
    "product-law": handle_cli_product_law,
    "bound-check": handle_cli_bound_check,
    "lemma-check": handle_cli_lemma_check,
    "complex-law": handle_cli_complex_law,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main application entry point.

    Returns:
        Exit status: 0 success, 2 usage error, 3 violated precondition,
        4 failed verdict
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
        _reject_unused_flags(parser, args)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    configure_logging(args.log_file, args.verbose)
    logger.info(f"Starting smalldet {args.command}")
    console = Console()

    try:
        config = ConfigManager(args.config).build_run_config(args.command, _overrides(args))
        if args.save_config:
            ConfigManager().save_config(config.to_dict(), args.save_config)
        status = HANDLERS[args.command](config, console)
    except SmallDetError as e:
        print_error(str(e))
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except (OSError, ValueError) as e:
        print_error(str(e))
        logger.error(f"{args.command} failed: {e}")
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130
    except Exception as e:
        print_error(f"Unexpected error: {e}")
        logger.exception(f"Unexpected error in {args.command}")
        return 1

    logger.info(f"{args.command} finished with status {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
