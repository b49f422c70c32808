#!/usr/bin/env python3
"""Energy-error rates of the sparse interpolants and assembled networks, prod_sine, d = 1..3, n = 3..7 (about 2 minutes).

Extra command-line flags are appended to the defaults, so later flags win:
    python3 scripts/rates_study.py --out results/custom.csv
"""
import sys

from symkorobov.cli import main

DEFAULTS = ["rates", "--d", "1,2,3", "--n-min", "3", "--n-max", "7", "--target", "prod_sine", "--out", "results/rates.csv"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
