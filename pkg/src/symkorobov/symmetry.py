"""Permutation orbits of basis pairs, partition counts and exact symmetrisation weights.

The symmetric basis function of a pair ``(l, i)`` is the orbit sum
``psi_{l,i}(x) = sum_{tau in S_d} phi_{l,i}(tau(x))``. Its orbit
representative sorts the coordinate pairs ``(l_j, i_j)`` lexicographically,
so the level is non-decreasing and, within blocks of equal level, the index
is non-decreasing as well.

:func:`vandermonde_coefficients` returns rationals ``a_1..a_D`` with

    sum_xi a_xi prod_s (sum_j xi**(2**(j-1)) phi_j(x_s))
        = sum_{tau in S_d} prod_nu phi_nu(x_{tau(nu)})

for arbitrary univariate ``phi_j``. The left side uses ``D`` products
instead of ``d!`` permutations; the exponent ``2**d - 1`` is the only
attainable sum of ``d`` powers ``2**(j-1)`` that uses each ``j`` once.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .grid import IndexSetSpec, Index, Level, check_pair, hat_1d, odd_index_set, ordered_index_set

try:
    from gmpy2 import mpz as _bigint
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _bigint = int

VANDERMONDE_MAX_DIM = 8


@dataclass(frozen=True)
class SymOrbit:
    canonical_level: Level
    canonical_index: Index
    orbit_size: int
    stabilizer_size: int

    @property
    def d(self) -> int:
        return len(self.canonical_level)

    def members(self) -> list[tuple[Level, Index]]:
        """The distinct pairs ``(tau(l), tau(i))`` of the orbit."""
        return orbit_members(self.canonical_level, self.canonical_index)


def canonical_pair(l: Sequence[int], i: Sequence[int]) -> tuple[Level, Index]:
    pairs = sorted(zip(l, i))
    return tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)


def stabilizer_size(l: Sequence[int], i: Sequence[int]) -> int:
    """Number of coordinate permutations fixing the pair ``(l, i)``."""
    counts: dict = {}
    for p in zip(l, i):
        counts[p] = counts.get(p, 0) + 1
    return math.prod(math.factorial(c) for c in counts.values())


def orbit_members(l: Sequence[int], i: Sequence[int]) -> list[tuple[Level, Index]]:
    pairs = tuple(zip(l, i))
    seen = sorted(set(itertools.permutations(pairs)))
    return [(tuple(p[0] for p in perm), tuple(p[1] for p in perm)) for perm in seen]


def make_orbit(l: Sequence[int], i: Sequence[int]) -> SymOrbit:
    l, i = check_pair(l, i)
    cl, ci = canonical_pair(l, i)
    stab = stabilizer_size(cl, ci)
    return SymOrbit(cl, ci, math.factorial(len(l)) // stab, stab)


def is_canonical(l: Sequence[int], i: Sequence[int]) -> bool:
    pairs = list(zip(l, i))
    return all(pairs[k] <= pairs[k + 1] for k in range(len(pairs) - 1))


def canonical_orbits(spec: IndexSetSpec) -> list[SymOrbit]:
    """One orbit per class of ``(l, i)`` pairs over the level set of ``spec``."""
    out = []
    for l in ordered_index_set(spec):
        for i in odd_index_set(l):
            if is_canonical(l, i):
                stab = stabilizer_size(l, i)
                out.append(SymOrbit(l, i, math.factorial(spec.d) // stab, stab))
    return out


# ---------------------------------------------------------------------------
# integer partitions


@lru_cache(maxsize=None)
def partition_count(k: int) -> int:
    """Number of unrestricted partitions of ``k`` (``p(0) = 1``)."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    table = [1] + [0] * k
    for part in range(1, k + 1):
        for total in range(part, k + 1):
            table[total] += table[total - part]
    return table[k]


@lru_cache(maxsize=None)
def partition_count_parts(s: int, parts: int) -> int:
    """Number of partitions of ``s`` into exactly ``parts`` positive parts."""
    if s < 0 or parts < 0:
        raise ValueError(f"s and parts must be >= 0, got {s}, {parts}")
    if parts == 0:
        return 1 if s == 0 else 0
    if s < parts:
        return 0
    # either some part equals 1 (drop it) or all parts are >= 2 (subtract 1 from each)
    return partition_count_parts(s - 1, parts - 1) + partition_count_parts(s - parts, parts)


# ---------------------------------------------------------------------------
# exact symmetrisation weights


def lambda_values(d: int) -> list[int]:
    """Sorted distinct values of ``sum_q 2**(j_q - 1)`` over ``j in {1..d}^d``."""
    sums = {0}
    for _ in range(d):
        sums = {s + 2 ** (j - 1) for s in sums for j in range(1, d + 1)}
    return sorted(sums)


def bareiss_solve(matrix: Sequence[Sequence[int]], rhs: Sequence[int]) -> list[Fraction]:
    """Solve an integer linear system exactly by fraction-free elimination.

    Forward elimination keeps every entry an integer (each update is an exact
    division by the previous pivot); back substitution works on
    ``det * x``, which is integral, and only forms fractions at the end.
    """
    n = len(matrix)
    rows = [[_bigint(v) for v in row] + [_bigint(b)] for row, b in zip(matrix, rhs)]
    prev = _bigint(1)
    sign = 1
    for k in range(n):
        if rows[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if rows[r][k] != 0), None)
            if swap is None:
                raise ZeroDivisionError("singular system")
            rows[k], rows[swap] = rows[swap], rows[k]
            sign = -sign
        pivot = rows[k][k]
        pivot_row = rows[k]
        for r in range(k + 1, n):
            row = rows[r]
            factor = row[k]
            for c in range(k + 1, n + 1):
                row[c] = (row[c] * pivot - factor * pivot_row[c]) // prev
            row[k] = _bigint(0)
        prev = pivot
    det = rows[n - 1][n - 1]
    scaled = [_bigint(0)] * n
    for r in range(n - 1, -1, -1):
        acc = det * rows[r][n]
        for c in range(r + 1, n):
            acc -= rows[r][c] * scaled[c]
        scaled[r] = acc // rows[r][r]
    return [Fraction(int(y), int(det)) for y in scaled]


@dataclass(frozen=True)
class VandermondeCoefficients:
    d: int
    lambdas: tuple[int, ...]
    a: tuple[Fraction, ...]
    K: int

    @property
    def D(self) -> int:
        return len(self.lambdas)

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.a])

    def feature_weights(self, xi: int) -> list[int]:
        """Weights ``xi**(2**(j-1))`` of the coordinate feature for node ``xi``."""
        return [xi ** (2 ** (j - 1)) for j in range(1, self.d + 1)]

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "K": self.K,
                "lambdas": list(self.lambdas),
                "a": [[str(v.numerator), str(v.denominator)] for v in self.a],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "VandermondeCoefficients":
        data = json.loads(text)
        a = tuple(Fraction(int(num), int(den)) for num, den in data["a"])
        return cls(int(data["d"]), tuple(int(v) for v in data["lambdas"]), a, int(data["K"]))


@lru_cache(maxsize=None)
def vandermonde_coefficients(d: int) -> VandermondeCoefficients:
    """Exact weights recovering the orbit sum from ``D`` feature products.

    Nodes are ``xi = 1..D``; the weights solve ``sum_xi a_xi xi**lam = [lam == K]``
    for every attainable exponent ``lam``, with ``K = 2**d - 1``.
    Exact arithmetic is feasible up to ``d = 6`` in tens of seconds; larger
    ``d`` is accepted but very slow.
    """
    if not 1 <= d <= VANDERMONDE_MAX_DIM:
        raise ValueError(f"d must be in [1, {VANDERMONDE_MAX_DIM}], got {d}")
    lambdas = lambda_values(d)
    K = 2**d - 1
    nodes = range(1, len(lambdas) + 1)
    matrix = [[_bigint(xi) ** lam for xi in nodes] for lam in lambdas]
    rhs = [1 if lam == K else 0 for lam in lambdas]
    a = bareiss_solve(matrix, rhs)
    return VandermondeCoefficients(d, tuple(lambdas), tuple(a), K)


def vandermonde_combination(coeffs: VandermondeCoefficients, table) -> Fraction:
    """``sum_xi a_xi G_xi`` for one point, exactly.

    ``table[s][j]`` holds ``phi_j(x_s)`` (0-based ``s`` and ``j``).
    """
    total = Fraction(0)
    for xi, a_xi in zip(range(1, coeffs.D + 1), coeffs.a):
        weights = coeffs.feature_weights(xi)
        product = Fraction(1)
        for row in table:
            product *= sum((w * v for w, v in zip(weights, row)), Fraction(0))
        total += a_xi * product
    return total


def orbit_product_sum(table) -> Fraction:
    """``sum_tau prod_nu phi_nu(x_{tau(nu)})`` by brute force over all permutations."""
    d = len(table)
    total = Fraction(0)
    for perm in itertools.permutations(range(d)):
        product = Fraction(1)
        for nu in range(d):
            product *= table[perm[nu]][nu]
        total += product
    return total


def sym_basis_oracle(l: Sequence[int], i: Sequence[int], x) -> np.ndarray:
    """Literal orbit sum ``sum_{tau in S_d} phi_{l,i}(tau(x))`` (test oracle).

    Accepts one point ``(d,)`` or a batch ``(N, d)``.
    """
    l, i = check_pair(l, i)
    d = len(l)
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    total = np.zeros(pts.shape[0])
    for perm in itertools.permutations(range(d)):
        moved = pts[:, perm]
        term = np.ones(pts.shape[0])
        for j in range(d):
            term *= hat_1d(moved[:, j], l[j], i[j])[0]
        total += term
    return total[0] if x.ndim == 1 else total
