"""``spicegen``: command line front end for the application generator.

Exit codes: 0 on success, 1 when the input term is malformed or violates an
ER-model invariant, 2 on I/O failures (unreadable input, refusing to write
into a nonempty output directory without ``--force``).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .erd import ERDError, ParseError, parse_erd, validate_erd
from .scaffold import GenerateError, generate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


def _load_erd(path_text: str):
    """Returns (erd, exit_code); on failure the ERD is None."""
    path = Path(path_text)
    try:
        source = path.read_text()
    except OSError as exc:
        print(f"spicegen: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return None, EXIT_IO
    try:
        erd = parse_erd(source)
    except ParseError as exc:
        print(f"spicegen: {path}: {exc}", file=sys.stderr)
        return None, EXIT_INVALID
    errors = validate_erd(erd)
    if errors:
        for error in errors:
            print(f"spicegen: {path}: {error.message}", file=sys.stderr)
        return None, EXIT_INVALID
    return erd, EXIT_OK


def _cmd_generate(args) -> int:
    erd, code = _load_erd(args.file)
    if erd is None:
        return code
    try:
        written = generate(erd, Path(args.out), force=args.force)
    except GenerateError as exc:
        print(f"spicegen: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"spicegen: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    for rel_path in written:
        print(rel_path)
    return EXIT_OK


def _cmd_check(args) -> int:
    worst = EXIT_OK
    for file in args.files:
        erd, code = _load_erd(file)
        if erd is not None:
            print(f"{file}: ok ({erd.name})")
        worst = max(worst, code)
    return worst


def _cmd_version(args) -> int:
    print(f"spicegen {__version__}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spicegen",
        description="Generate a web application from an entity-relationship term.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate an application from an .erdterm file")
    gen.add_argument("file", help="path to the .erdterm input")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument(
        "--force", action="store_true", help="write into a nonempty output directory"
    )
    gen.set_defaults(func=_cmd_generate)

    check = sub.add_parser("check", help="parse and validate .erdterm files")
    check.add_argument("files", nargs="+", help=".erdterm files to validate")
    check.set_defaults(func=_cmd_check)

    version = sub.add_parser("version", help="print the version")
    version.set_defaults(func=_cmd_version)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
