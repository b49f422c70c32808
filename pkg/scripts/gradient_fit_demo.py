#!/usr/bin/env python3
"""Least-squares fit of the outer coefficients to noisy gradients, d = 2, n = 3, M in {1e2, 1e3, 1e4}, 10 seeds.

Extra command-line flags are appended to the defaults, so later flags win:
    python3 scripts/gradient_fit_demo.py --out results/custom.csv
"""
import sys

from symkorobov.cli import main

DEFAULTS = ["gradient-fit", "--d", "2", "--n-min", "3", "--n-max", "3", "--samples", "100,1000,10000", "--noise", "0.1", "--out", "results/gradient_fit.csv"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
