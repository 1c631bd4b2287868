#!/usr/bin/env python3
"""Run the acceptance test suite and write a summary report.

Usage: python scripts/run_acceptance.py [--out report.txt]
Thin wrapper over ``pytest tests/test_acceptance.py -v``.
"""

import argparse
import subprocess
import sys


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "tests/test_acceptance.py", "-v"],
        capture_output=True, text=True)
    sys.stdout.write(proc.stdout)
    sys.stderr.write(proc.stderr)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(proc.stdout)
            fh.write(proc.stderr)
    return proc.returncode


if __name__ == "__main__":
    sys.exit(main())
