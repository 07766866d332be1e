"""Command-line entry point. Exit codes: 0 ok, 2 config error, 3 numerical failure."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pair_dynamics import CONVENTIONS, NumericalError
from .runner import COMMANDS, CalibrationMissing
from .transfer import MODES

log = logging.getLogger("nvsinglet")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvsinglet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config (defaults if omitted)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--mode", choices=MODES, default=None, help="steady-state denominator form")
        p.add_argument("--convention", choices=CONVENTIONS, default=None,
                       help="high-field to low-field state assignment")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_flags(args.mode, args.convention)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        outputs = COMMANDS[args.command](cfg, threads=max(1, args.threads))
    except (ConfigError, CalibrationMissing) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ValueError, ArithmeticError) as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    args.out.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        path = args.out / name
        path.write_text(text, encoding="utf-8")
        log.info("wrote %s", path)
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
