#!/usr/bin/env python3
"""Grid-point counts and the counting bound for d = 1..6, n = 1..8.

Extra command-line flags are appended to the defaults, so later flags win:
    python3 scripts/counts_table.py --out results/custom.csv
"""
import sys

from symkorobov.cli import main

DEFAULTS = ["counts", "--d", "1-6", "--n-min", "1", "--n-max", "8", "--out", "results/counts.csv"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
