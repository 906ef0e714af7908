"""
Command-line entry point for dyadika

    dyadika <kernels|lemmas|bounds|counterexample|stats|bench> [options]

Exit codes: 0 every check passed, 1 a check failed, 2 bad usage or configuration.
Reports go to stdout or --out; logs go to stderr.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from pydantic import ValidationError

from dyadika import create_toolkit
from dyadika.logging_config import get_logger
from dyadika.models import Command, OutputFormat, RunConfig
from dyadika.services.verifier import CommandReport, Verifier

logger = get_logger('cli')

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors share one exit path"""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='dyadika', description="Walsh-Fourier kernel and Hardy space verifier")
    parser.add_argument('command', choices=[c.value for c in Command], help="Suite to run")
    parser.add_argument('--resolution', '-M', type=int, help="Resolution M (2^M cosets)")
    parser.add_argument('--mode', choices=['exact', 'float'], help="Scalar mode")
    parser.add_argument('--p', dest='p_values', help="Comma-separated exponents, e.g. 1/4,1/3,1/2")
    parser.add_argument('--seed', type=int, default=0, help="Seed for random atoms and functions")
    parser.add_argument('--output', choices=[f.value for f in OutputFormat], default='json')
    parser.add_argument('--out', help="Write the report here instead of stdout")
    parser.add_argument('--plan', help="Counterexample plan (JSON); defaults to the configured plans")
    parser.add_argument('--threads', type=int, help="Worker threads for independent sweep rows")
    parser.add_argument('--config', help="Path to config.yml (overrides DYADIKA_CONFIG)")
    parser.add_argument('--calibrate', action='store_true', help="Refit and freeze fixture constants")
    parser.add_argument('--log-level', help="DEBUG, INFO, WARNING, ERROR")
    return parser


def run_config_from_args(args: argparse.Namespace, settings: Dict[str, Any]) -> RunConfig:
    p_values = args.p_values.split(',') if args.p_values else settings['bounds']['p_values']
    return RunConfig(
        command=args.command,
        resolution=args.resolution if args.resolution is not None else settings['resolution']['default'],
        mode=args.mode or settings.get('run', {}).get('mode', 'exact'),
        p_values=[p.strip() for p in p_values],
        seed=args.seed,
        output=args.output,
        out=args.out,
        plan=args.plan,
        threads=args.threads if args.threads is not None else settings['sweep'].get('threads', 1),
        calibrate=args.calibrate,
    )


def _cell(value: Any) -> Any:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return value


def render(report: CommandReport, config: RunConfig) -> str:
    if config.output is OutputFormat.CSV:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_cell(row.get(column)) for column in report.columns])
        return buffer.getvalue()
    return json.dumps(report.to_dict(config), indent=2, default=str) + '\n'


def write_report(text: str, out: Optional[str]) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        logger.info(f"Report written to {path}")
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = create_toolkit(config_path=args.config, log_level=args.log_level)
        config = run_config_from_args(args, settings)
        report = Verifier(config, settings).run()
    except UsageError as e:
        sys.stderr.write(f"dyadika: {e}\n")
        return EXIT_USAGE
    except (ValidationError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        sys.stderr.write(f"dyadika: {e}\n")
        return EXIT_USAGE

    write_report(render(report, config), config.out)
    return EXIT_OK if report.passed else EXIT_VIOLATION


if __name__ == '__main__':
    sys.exit(main())
