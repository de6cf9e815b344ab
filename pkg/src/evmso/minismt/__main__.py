"""Command-line entry: solve one SMT-LIB v2 script from a file or stdin.

Usage: evmso-smt [--timeout-ms N] [file.smt2]
"""

from __future__ import annotations

import argparse
import sys

from .solver import solve_text


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="evmso-smt")
    ap.add_argument("file", nargs="?", help="script file; stdin when omitted")
    ap.add_argument("--timeout-ms", type=int, default=None)
    args = ap.parse_args(argv)

    if args.file:
        with open(args.file, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()

    status, lines = solve_text(text, timeout_ms=args.timeout_ms)
    print(status)
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
