#!/usr/bin/env python3
"""Diff two serialized morphism files with a per-entry max-norm report.

Usage: python scripts/diff_morphisms.py A.mor B.mor [--tol 1e-9]
Exit 0 if the overall max difference is within tolerance, 1 otherwise.
"""

import argparse
import sys

from qlam import cpm as C


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("left")
    ap.add_argument("right")
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args(argv)
    with open(args.left, encoding="utf-8") as fh:
        a = C.deserialize_entries(fh.read())
    with open(args.right, encoding="utf-8") as fh:
        b = C.deserialize_entries(fh.read())
    report = C.diff_entries(a, b)
    worst = report.pop(None)
    for key, d in report.items():
        marker = "" if d <= args.tol else "  <-- exceeds tol"
        print(f"{key!r}: max|diff| = {d:.3e}{marker}")
    print(f"overall max|diff| = {worst:.3e} (tol {args.tol:g})")
    return 0 if worst <= args.tol else 1


if __name__ == "__main__":
    sys.exit(main())
