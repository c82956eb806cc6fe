"""Command-line interface: run, compare, list-scenarios, validate."""

import argparse
import sys
from pathlib import Path

from pydantic import ValidationError

from app.config import settings
from app.models.scenario import RunRecord, Scenario
from app.services.errors import ScenarioValidationError, SpectralDgaError
from app.services.harness import (
    ScenarioRunner,
    bundled_scenarios,
    load_scenario,
    parse_levels,
    resolve_scenario,
    run_comparison,
    run_scenario,
    scenario_hash,
)
from app.services.report_writer import ReportWriter
from app.utils.logger import logger, set_level

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_COMPUTATION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-dga",
        description="Dirac and FGR dgas of truncated spectral triples and their suspensions",
    )
    parser.add_argument(
        "--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Override LOG_LEVEL"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", type=Path, default=None, help="Output directory (default: settings.output_dir)")
        p.add_argument(
            "--format",
            action="append",
            choices=["json", "markdown", "csv"],
            default=None,
            help="Report format; repeat for several (default: the scenario's formats)",
        )
        p.add_argument("--max-dim", type=int, default=None, help="Ambient dimension cap for suspensions")
        p.add_argument("--seed", type=int, default=None, help="Seed for sampled-word checks")

    run = sub.add_parser("run", help="Run one scenario (bundled name or path)")
    run.add_argument("config")
    run.add_argument("--levels-override", type=str, default=None, help='e.g. "24,32,48" or "[[8,8],[10,8]]"')
    add_run_flags(run)

    compare = sub.add_parser("compare", help="Compare Dirac and FGR dgas across scenarios")
    compare.add_argument("configs", nargs="+")
    add_run_flags(compare)

    sub.add_parser("list-scenarios", help="List bundled scenarios")

    validate = sub.add_parser("validate", help="Validate a scenario without computing")
    validate.add_argument("config")
    validate.add_argument("--levels-override", type=str, default=None)
    validate.add_argument("--max-dim", type=int, default=None)

    return parser


def _write(record: RunRecord, scenario: Scenario, args: argparse.Namespace) -> None:
    out_dir = args.out or scenario.output.dir or settings.output_dir
    formats = args.format or scenario.output.formats
    ReportWriter().write(record, out_dir, formats)


def _summary(record: RunRecord) -> int:
    for check in record.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}: {check.detail}")
    return EXIT_OK if record.passed else EXIT_CHECK_FAILED


def cmd_run(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.config)
    levels = parse_levels(args.levels_override) if args.levels_override else None
    record = run_scenario(scenario, levels, args.max_dim, args.seed)
    _write(record, scenario, args)
    return _summary(record)


def cmd_compare(args: argparse.Namespace) -> int:
    scenarios = [resolve_scenario(c) for c in args.configs]
    record = run_comparison(scenarios, args.max_dim, args.seed)
    _write(record, scenarios[0], args)
    print(record.reports["comparison"]["verdict"])
    return _summary(record)


def cmd_list(args: argparse.Namespace) -> int:
    for name, path in bundled_scenarios().items():
        scenario = load_scenario(path)
        print(f"{name:28s} {scenario.description}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.config)
    levels = parse_levels(args.levels_override) if args.levels_override else None
    runner = ScenarioRunner(scenario, levels, args.max_dim)
    runner.validate()
    print(f"{scenario.name}: valid ({scenario_hash(runner.scenario)})")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "list-scenarios": cmd_list,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ScenarioValidationError, ValidationError) as e:
        logger.error(f"Invalid scenario: {e}")
        return EXIT_INVALID
    except SpectralDgaError as e:
        logger.error(f"Computation failed in {e.module or '?'}/{e.stage or '?'}: {e.message}")
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
