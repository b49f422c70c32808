#!/usr/bin/env python3
"""Build and verify the symmetric networks for d = 1, 2, n = 1..4 (about 2 minutes; add --d 3 for the float-limited case).

Extra command-line flags are appended to the defaults, so later flags win:
    python3 scripts/net_verify.py --out results/custom.csv
"""
import sys

from symkorobov.cli import main

DEFAULTS = ["net-verify", "--d", "1,2", "--n-min", "1", "--n-max", "4", "--out", "results/net_verify.csv"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
