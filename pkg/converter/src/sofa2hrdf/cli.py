"""Command-line entry point for conversion and validation.

    sofa2hrdf convert <in.sofa> <out.hrdf> --name <dataset>
    sofa2hrdf validate <in.hrdf> [--expect <expectations.json>]

``convert`` accepts a single SOFA file or a directory of them (one file per
subject, merged into one archive). ``validate`` checks the archive against
the expectations entry matching its dataset name; the package ships a table
covering the ten public databases, used when --expect is omitted. Expectation
mismatches are printed but do not fail the run.

Exit codes: 0 success (including validation runs with mismatches), 1 usage
error, 2 data error (unreadable or malformed input, unknown dataset name).
"""

from __future__ import annotations

import argparse
import sys

from .convert import convert
from .hrdf import HrdfError
from .sofa import SofaError
from .validate import validate


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sofa2hrdf", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_c = sub.add_parser("convert", help="SOFA file or directory to one HRDF")
    p_c.add_argument("in_path", help="SOFA file, or directory of .sofa files")
    p_c.add_argument("out_path", help="HRDF file to write")
    p_c.add_argument("--name", required=True, help="dataset name to record")
    p_c.set_defaults(func=cmd_convert)

    p_v = sub.add_parser("validate", help="check an HRDF against expectations")
    p_v.add_argument("in_path", help="HRDF file to check")
    p_v.add_argument("--expect", default=None,
                     help="expectations JSON (default: the shipped table)")
    p_v.set_defaults(func=cmd_validate)
    return parser


def cmd_convert(args) -> int:
    summary = convert(args.in_path, args.out_path, args.name)
    for line in summary.lines():
        print(line)
    return 0


def cmd_validate(args) -> int:
    report = validate(args.in_path, args.expect)
    for line in report.lines():
        print(line)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SofaError, HrdfError, FileNotFoundError, IsADirectoryError,
            PermissionError, ValueError, OSError) as exc:
        print(f"sofa2hrdf: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
