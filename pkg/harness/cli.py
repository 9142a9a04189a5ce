"""
Command-line entry point.

    python -m harness.cli run [scenario.json] [--builtin NAME] [--format json|csv]
                              [--out PATH] [--seed N] [--list-builtins] [--timing]

Exit codes: 0 when every verdict matches its expected value, 1 on a verdict
mismatch, 2 on usage or scenario errors.
"""
import argparse
import logging
import sys
from typing import List, Optional

from .config import LabSettings
from .errors import ScenarioError
from .loader import list_builtins, load_builtin, load_scenario
from .report import FORMATS, write_report
from .runner import run_experiment

logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harness.cli", description="Run reward-policy experiments on finite MDPs")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a scenario and emit its report")
    run.add_argument("scenario", nargs="?", help="Path to a scenario JSON file")
    run.add_argument("--builtin", metavar="NAME", help="Run a built-in scenario instead of a file")
    run.add_argument("--list-builtins", action="store_true", help="List built-in scenarios and exit")
    run.add_argument("--format", choices=FORMATS, default="json", help="Report format (default: json)")
    run.add_argument("--out", metavar="PATH", help="Write the report here instead of stdout")
    run.add_argument("--seed", type=int, help="Seed for randomized trials (default: the scenario's)")
    run.add_argument("--timing", action="store_true", help="Record wall-clock time in the report")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASSED

    settings = LabSettings.from_env()
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    if args.list_builtins:
        for name in list_builtins():
            print(name)
        return EXIT_PASSED

    if bool(args.scenario) == bool(args.builtin):
        logger.error("Give exactly one of a scenario path or --builtin NAME")
        return EXIT_USAGE
    if args.seed is not None and args.seed < 0:
        logger.error("--seed must be nonnegative")
        return EXIT_USAGE

    try:
        scenario = load_builtin(args.builtin) if args.builtin else load_scenario(args.scenario)
    except ScenarioError as exc:
        logger.error(str(exc))
        return EXIT_USAGE
    except OSError as exc:
        logger.error(f"Could not read scenario: {exc}")
        return EXIT_USAGE

    report = run_experiment(scenario, seed=args.seed, timing=args.timing, settings=settings)
    try:
        write_report(report, args.format, args.out)
    except OSError as exc:
        logger.error(f"Could not write report: {exc}")
        return EXIT_USAGE

    if not report.passed:
        logger.error(f"Verdict mismatch in {scenario.id}: {', '.join(report.mismatches)}")
        return EXIT_MISMATCH
    return EXIT_PASSED


if __name__ == "__main__":
    sys.exit(main())
