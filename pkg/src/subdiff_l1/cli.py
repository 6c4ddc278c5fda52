"""Command line entry point: ``subdiff-l1 --study <kind> [options]``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from subdiff_l1.errors import ConvergenceError, ParameterError, SolverError
from subdiff_l1.studies import (
    CONVERGENCE_STUDIES,
    EXPORT_STUDIES,
    REGIMES,
    VERIFICATION_STUDIES,
    ConvergenceReport,
    StudyConfig,
    run_study,
)

logger = logging.getLogger("subdiff_l1")

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subdiff-l1",
        description="Convergence studies and verification suites for the L1 "
        "scheme applied to nonlinear subdiffusion problems.",
    )
    parser.add_argument(
        "--study",
        choices=CONVERGENCE_STUDIES + VERIFICATION_STUDIES + EXPORT_STUDIES,
        help="study kind (overrides the config file)",
    )
    parser.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument("--regime", choices=REGIMES, help="convergence regime")
    parser.add_argument(
        "--variant", choices=("implicit", "linearized"), help="time stepping scheme"
    )
    parser.add_argument("--out", type=Path, help="output file (default: stdout)")
    parser.add_argument("--threads", type=int, default=1, help="worker processes")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )

    overrides = {
        "study": args.study, "regime": args.regime,
        "variant": args.variant, "seed": args.seed,
    }
    try:
        if args.threads < 1:
            raise ParameterError(f"--threads must be positive: {args.threads}")
        if args.config is not None:
            config = StudyConfig.from_json(args.config, **overrides)
        else:
            config = StudyConfig.from_mapping({}, **overrides)
        result = run_study(config, threads=args.threads)
    except (SolverError, ConvergenceError) as exc:
        logger.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except (ParameterError, ValueError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG

    if isinstance(result, ConvergenceReport):
        _emit(result.to_csv(), args.out)
        return EXIT_OK
    if isinstance(result, str):
        _emit(result, args.out)
        return EXIT_OK

    passed, report = result
    _emit(json.dumps(report, indent=2, default=float) + "\n", args.out)
    if not passed:
        logger.error("verification failed, see the %s report", config.study)
        return EXIT_VERIFICATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
