"""
Command-line entry point for dampwave
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from .errors import EXIT_CONFIG, EXIT_INTERNAL, EXIT_OK, DampwaveError, exit_code_for
from .harness.config import parse_config, parse_sweep_spec
from .harness.io import dumps
from .harness.runner import run_check, run_fit, run_simulate, run_spectrum
from .harness.sweep import run_sweep
from .settings import Settings

logger = logging.getLogger(__name__)


def _window(text: str) -> Tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"window must be 't_lo,t_hi', got {text!r}") from exc
    return lo, hi


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors are input errors and exit with EXIT_CONFIG."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog="dampwave",
        description="Simulate and verify velocity-coupled damped wave systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="integrate a run and write series.csv + manifest.json")
    simulate.add_argument("--config", required=True, type=Path)
    simulate.add_argument("--out", type=Path, default=Path(settings.output_dir))

    check = sub.add_parser("check", help="sample hypotheses and evaluate the stability certificate")
    check.add_argument("--config", required=True, type=Path)

    spectrum = sub.add_parser("spectrum", help="dense spectrum of the linear generator")
    spectrum.add_argument("--config", required=True, type=Path)
    spectrum.add_argument("--out", type=Path, default=Path(settings.output_dir))

    fit = sub.add_parser("fit", help="fit an exponential decay rate to a series column")
    fit.add_argument("--series", required=True, type=Path)
    fit.add_argument("--window", required=True, type=_window)
    fit.add_argument("--column", default="norm_H")

    sweep = sub.add_parser("sweep", help="parameter sweep producing stability_map.csv")
    sweep.add_argument("--spec", required=True, type=Path)
    sweep.add_argument("--out", type=Path, default=Path(settings.output_dir))
    sweep.add_argument("--parallel", type=int, default=settings.parallel)
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "simulate":
        return run_simulate(parse_config(args.config), args.out).exit_code
    if args.command == "check":
        print(dumps(run_check(parse_config(args.config))))
        return EXIT_OK
    if args.command == "spectrum":
        print(dumps(run_spectrum(parse_config(args.config), args.out)))
        return EXIT_OK
    if args.command == "fit":
        print(dumps(run_fit(args.series, args.window, args.column)))
        return EXIT_OK
    result = run_sweep(parse_sweep_spec(args.spec), args.out, max(1, args.parallel))
    print(dumps({"n_points": len(result.rows), "containment_violations": len(result.violations)}))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    settings = Settings()
    settings.configure_logging()
    args = build_parser(settings).parse_args(argv)
    try:
        return dispatch(args)
    except DampwaveError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.exception(f"Internal error: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
