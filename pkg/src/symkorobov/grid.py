"""Dyadic levels, odd grid indices, sparse-grid index sets and hat functions.

A basis function on ``[0, 1]^d`` is addressed by a level vector ``l`` (all
entries >= 1) and an odd index vector ``i`` with ``1 <= i_j <= 2**l_j - 1``.
Its centre is ``i * 2**-l`` and it is the tensor product of 1D hats
``phi((x - i h) / h)`` with ``h = 2**-l`` and ``phi(t) = max(1 - |t|, 0)``.

Two level sets are supported:

* ``total_degree``: ``|l|_1 <= n + d - 1``
* ``energy``: the energy-based cost/benefit set, decided in exact integer
  arithmetic (see :func:`in_energy_set`).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

Level = tuple[int, ...]
Index = tuple[int, ...]

MAX_DIM = 16
KINDS = ("total_degree", "energy")


@dataclass(frozen=True)
class IndexSetSpec:
    kind: str
    n: int
    d: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown index set kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise ValueError(f"refinement level n must be >= 1, got {self.n}")
        if not 1 <= self.d <= MAX_DIM:
            raise ValueError(f"dimension d must be in [1, {MAX_DIM}], got {self.d}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "d": self.d}

    @classmethod
    def from_dict(cls, data: dict) -> "IndexSetSpec":
        return cls(str(data["kind"]), int(data["n"]), int(data["d"]))


def check_level(l: Sequence[int]) -> Level:
    l = tuple(int(v) for v in l)
    if not l or any(v < 1 for v in l):
        raise ValueError(f"level vector must be non-empty with entries >= 1, got {l}")
    return l


def check_pair(l: Sequence[int], i: Sequence[int]) -> tuple[Level, Index]:
    l = check_level(l)
    i = tuple(int(v) for v in i)
    if len(i) != len(l):
        raise ValueError(f"index {i} and level {l} have different lengths")
    for lj, ij in zip(l, i):
        if ij % 2 == 0 or not 1 <= ij <= 2**lj - 1:
            raise ValueError(f"index {i} is not a valid odd index for level {l}")
    return l, i


def odd_index_set(l: Sequence[int]) -> list[Index]:
    """All odd index vectors of level ``l`` in lexicographic order.

    The result has ``2**(|l|_1 - d)`` entries.
    """
    l = check_level(l)
    axes = [range(1, 2**lj, 2) for lj in l]
    return list(itertools.product(*axes))


def grid_point(l: Sequence[int], i: Sequence[int]) -> np.ndarray:
    l, i = check_pair(l, i)
    return np.array([ij * 2.0**-lj for lj, ij in zip(l, i)])


def hat_1d(x, level: int, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Value and slope of the 1D hat ``phi_{level,index}`` at ``x``.

    The slope is right-continuous at the three kinks: it is ``+1/h`` on
    ``[left, centre)``, ``-1/h`` on ``[centre, right)`` and 0 elsewhere.
    """
    x = np.asarray(x, dtype=float)
    scale = 2.0**level
    t = x * scale - index
    value = np.maximum(1.0 - np.abs(t), 0.0)
    slope = np.where((t >= -1.0) & (t < 0.0), scale, 0.0)
    slope = np.where((t >= 0.0) & (t < 1.0), -scale, slope)
    return value, slope


def hat_eval(l: Sequence[int], i: Sequence[int], x) -> tuple[np.ndarray, np.ndarray]:
    """Tensor hat ``phi_{l,i}`` and its gradient.

    ``x`` is a point of shape ``(d,)`` or a batch of shape ``(N, d)``; the
    value has shape ``()`` or ``(N,)`` and the gradient the shape of ``x``.
    """
    l, i = check_pair(l, i)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != len(l):
        raise ValueError(f"point dimension {pts.shape[1]} does not match level dimension {len(l)}")
    vals = np.empty_like(pts)
    slopes = np.empty_like(pts)
    for j, (lj, ij) in enumerate(zip(l, i)):
        vals[:, j], slopes[:, j] = hat_1d(pts[:, j], lj, ij)
    value, grad = _tensor_value_grad(vals, slopes)
    if single:
        return value[0], grad[0]
    return value, grad


def _tensor_value_grad(vals: np.ndarray, slopes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Product rule for rows of univariate factor values and slopes."""
    d = vals.shape[1]
    value = np.prod(vals, axis=1)
    grad = np.empty_like(vals)
    for j in range(d):
        others = np.prod(np.delete(vals, j, axis=1), axis=1) if d > 1 else 1.0
        grad[:, j] = slopes[:, j] * others
    return value, grad


def compositions(total: int, parts: int) -> Iterator[Level]:
    """Level vectors with ``parts`` entries >= 1 summing to ``total``."""
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def sorted_levels(total: int, parts: int, smallest: int = 1) -> Iterator[Level]:
    """Non-decreasing level vectors with entries >= ``smallest`` summing to ``total``."""
    if parts == 1:
        if total >= smallest:
            yield (total,)
        return
    for first in range(smallest, total // parts + 1):
        for rest in sorted_levels(total - first, parts - 1, first):
            yield (first,) + rest


def in_energy_set(l: Sequence[int], n: int) -> bool:
    """Exact membership test for the energy-based level set.

    The defining inequality
    ``|l|_1 - log2(S)/5 <= (n + d - 1) - log2(T)/5`` with
    ``S = sum_j 4**l_j`` and ``T = 4**n + 4d - 4`` is equivalent to
    ``2**(5k) * T <= S`` with ``k = |l|_1 - n - d + 1``; both sides are
    integers once the power of two is moved to the side where it is
    non-negative. Equality counts as membership.
    """
    d = len(l)
    k = sum(l) - n - d + 1
    s = sum(4**lj for lj in l)
    t = 4**n + 4 * d - 4
    if k >= 0:
        return (t << (5 * k)) <= s
    return t <= (s << (-5 * k))


def _member(spec: IndexSetSpec, l: Level) -> bool:
    if sum(l) > spec.n + spec.d - 1:
        return False
    return spec.kind == "total_degree" or in_energy_set(l, spec.n)


def index_set(spec: IndexSetSpec) -> list[Level]:
    """All levels of the set described by ``spec``, ordered by ``|l|_1`` then lexicographically."""
    out = []
    for total in range(spec.d, spec.n + spec.d):
        out.extend(l for l in sorted(compositions(total, spec.d)) if _member(spec, l))
    return out


@lru_cache(maxsize=None)
def ordered_index_set(spec: IndexSetSpec) -> tuple[Level, ...]:
    """Levels of the set with non-decreasing entries (orbit representatives)."""
    out = []
    for total in range(spec.d, spec.n + spec.d):
        out.extend(l for l in sorted_levels(total, spec.d) if _member(spec, l))
    return tuple(out)


def distinct_permutations_count(seq: Sequence) -> int:
    counts: dict = {}
    for v in seq:
        counts[v] = counts.get(v, 0) + 1
    out = math.factorial(len(seq))
    for c in counts.values():
        out //= math.factorial(c)
    return out


def count_grid_points(spec: IndexSetSpec, symmetric: bool = False) -> int:
    """Number of ``(l, i)`` pairs over the level set.

    With ``symmetric=True`` only non-decreasing levels contribute. The full
    count is obtained from the ordered levels and their permutation counts,
    which is valid because both level sets are permutation-closed.
    """
    total = 0
    for l in ordered_index_set(spec):
        weight = 1 if symmetric else distinct_permutations_count(l)
        total += weight * 2 ** (sum(l) - spec.d)
    return total


def lemma_count_bound(n: int, d: int) -> float:
    """Upper bound ``2**n * d/2 * e**d`` on the energy-based grid size."""
    return 2.0**n * d / 2.0 * math.e**d
