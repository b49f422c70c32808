"""Hierarchical surpluses and truncated sparse-grid expansions.

Surpluses are computed by the tensor stencil ``[-1/2, 1, -1/2]`` (function
values only). The integral form ``int phi_{l,i} D^{(2..2)} f`` is available
as a cross-check once it is multiplied by ``prod_j (-h_j / 2)``; without that
factor the expansion would not reproduce piecewise-linear functions.

Symmetric tables keep one entry per orbit with coefficient
``v / |Stab(l, i)|`` and are evaluated through the orbit sum over all
``d!`` coordinate permutations, which adds each distinct permuted basis
function ``|Stab|`` times.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .grid import IndexSetSpec, Index, Level, check_pair, grid_point, index_set, odd_index_set
from .symmetry import canonical_orbits, is_canonical
from .targets import TargetFunction

_STENCIL = ((-1, -0.5), (0, 1.0), (1, -0.5))
_CHUNK = 1 << 16


def _stencil_nodes(l: Level, i: Index) -> tuple[np.ndarray, np.ndarray]:
    centre = grid_point(l, i)
    h = 2.0 ** -np.asarray(l, dtype=float)
    nodes, weights = [], []
    for combo in itertools.product(_STENCIL, repeat=len(l)):
        offsets = np.array([c[0] for c in combo], dtype=float)
        nodes.append(centre + offsets * h)
        weights.append(np.prod([c[1] for c in combo]))
    return np.array(nodes), np.array(weights)


def _interior_values(f: TargetFunction, pts: np.ndarray) -> np.ndarray:
    vals = f.eval(pts)
    on_boundary = np.any((pts <= 0.0) | (pts >= 1.0), axis=1)
    return np.where(on_boundary, 0.0, vals)


def surplus_stencil(f: TargetFunction, l, i) -> float:
    """Hierarchical surplus of ``f`` at ``(l, i)`` from the tensor 3-point stencil."""
    l, i = check_pair(l, i)
    nodes, weights = _stencil_nodes(l, i)
    return float(weights @ _interior_values(f, nodes))


def _batch_surpluses(f: TargetFunction, pairs: list[tuple[Level, Index]]) -> np.ndarray:
    if not pairs:
        return np.zeros(0)
    d = len(pairs[0][0])
    offsets = np.array([[c[0] for c in combo] for combo in itertools.product(_STENCIL, repeat=d)], dtype=float)
    weights = np.array([np.prod([c[1] for c in combo]) for combo in itertools.product(_STENCIL, repeat=d)])
    levels = np.array([p[0] for p in pairs], dtype=float)
    indices = np.array([p[1] for p in pairs], dtype=float)
    h = 2.0**-levels
    centres = indices * h
    out = np.empty(len(pairs))
    step = max(1, _CHUNK // len(weights))
    for start in range(0, len(pairs), step):
        c = centres[start : start + step]
        hh = h[start : start + step]
        pts = c[:, None, :] + offsets[None, :, :] * hh[:, None, :]
        vals = _interior_values(f, pts.reshape(-1, d)).reshape(len(c), len(weights))
        out[start : start + step] = vals @ weights
    return out


def surplus_integral(f: TargetFunction, l, i, quad_level: int = 8) -> float:
    """``prod_j(-h_j/2) * int phi_{l,i} D^{(2,..,2)} f`` by tensor Gauss-Legendre.

    Each axis of the support is split at the hat's centre and integrated with
    ``quad_level`` Gauss points per half.
    """
    if f.mixed2 is None:
        raise ValueError(f"target {f.name!r} has no mixed derivative")
    l, i = check_pair(l, i)
    g, w = np.polynomial.legendre.leggauss(quad_level)
    axes_x, axes_w = [], []
    for lj, ij in zip(l, i):
        h = 2.0**-lj
        xs, ws = [], []
        for a in ((ij - 1) * h, ij * h):
            xs.append(a + (g + 1.0) * h / 2.0)
            ws.append(w * h / 2.0)
        x1 = np.concatenate(xs)
        axes_x.append(x1)
        axes_w.append(np.concatenate(ws) * np.maximum(1.0 - np.abs(x1 / h - ij), 0.0))
    grids = np.meshgrid(*axes_x, indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=1)
    wts = axes_w[0]
    for extra in axes_w[1:]:
        wts = np.multiply.outer(wts, extra)
    integral = float(wts.ravel() @ f.mixed2(pts))
    scale = np.prod([-(2.0**-lj) / 2.0 for lj in l])
    return scale * integral


@dataclass(frozen=True)
class SurplusTable:
    spec: IndexSetSpec
    symmetric: bool
    entries: Mapping[tuple[Level, Index], float]
    _levels: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entries = MappingProxyType(dict(self.entries))
        object.__setattr__(self, "entries", entries)
        allowed = set(index_set(self.spec))
        levels: dict[Level, np.ndarray] = {}
        for (l, i), v in entries.items():
            check_pair(l, i)
            if l not in allowed:
                raise ValueError(f"level {l} is not in the index set {self.spec}")
            if self.symmetric and not is_canonical(l, i):
                raise ValueError(f"symmetric table holds non-canonical pair {(l, i)}")
            arr = levels.get(l)
            if arr is None:
                arr = levels[l] = np.zeros(tuple(2 ** (lj - 1) for lj in l))
            arr[tuple((ij - 1) // 2 for ij in i)] = v
        object.__setattr__(self, "_levels", levels)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def finest_level(self) -> int:
        return max((max(l) for l in self._levels), default=1)

    def __len__(self) -> int:
        return len(self.entries)

    def value_and_grad(self, x) -> tuple[np.ndarray, np.ndarray]:
        return eval_interpolant(self, x)

    def to_json(self) -> str:
        rows = [[list(l), list(i), v] for (l, i), v in sorted(self.entries.items())]
        return json.dumps({"spec": self.spec.to_dict(), "symmetric": self.symmetric, "entries": rows})

    @classmethod
    def from_json(cls, text: str) -> "SurplusTable":
        data = json.loads(text)
        entries = {(tuple(l), tuple(i)): float(v) for l, i, v in data["entries"]}
        return cls(IndexSetSpec.from_dict(data["spec"]), bool(data["symmetric"]), entries)


def _check_symmetric(f: TargetFunction, rng: np.random.Generator, trials: int = 10) -> None:
    x = rng.random((trials, f.d))
    perms = np.array([rng.permutation(f.d) for _ in range(trials)])
    moved = np.take_along_axis(x, perms, axis=1)
    a, b = f.eval(x), f.eval(moved)
    if np.any(np.abs(a - b) > 1e-10 * np.maximum(1.0, np.abs(a))):
        raise ValueError(f"target {f.name!r} is not permutation-invariant")


def build_interpolant(f: TargetFunction, spec: IndexSetSpec, symmetric: bool = False) -> SurplusTable:
    if f.d != spec.d:
        raise ValueError(f"target dimension {f.d} does not match index set dimension {spec.d}")
    if symmetric:
        _check_symmetric(f, np.random.default_rng(0x5EED))
        orbits = canonical_orbits(spec)
        pairs = [(o.canonical_level, o.canonical_index) for o in orbits]
        values = _batch_surpluses(f, pairs)
        entries = {p: v / o.stabilizer_size for p, v, o in zip(pairs, values, orbits)}
    else:
        pairs = [(l, i) for l in index_set(spec) for i in odd_index_set(l)]
        entries = dict(zip(pairs, _batch_surpluses(f, pairs)))
    return SurplusTable(spec, symmetric, entries)


def _axis_hats(x: np.ndarray, level: int):
    """Cell index, hat value and right-continuous slope of the one level-``level`` hat covering ``x``."""
    half = 2 ** (level - 1)
    k = np.clip(np.floor(x * half).astype(np.int64), 0, half - 1)
    scale = 2.0**level
    t = x * scale - (2 * k + 1)
    val = np.maximum(1.0 - np.abs(t), 0.0)
    slope = np.where(t < 0.0, scale, -scale)
    slope[np.abs(t) >= 1.0] = 0.0
    slope[t == -1.0] = scale
    return k, val, slope


def _accumulate(levels: dict, pts: np.ndarray, value: np.ndarray, grad: np.ndarray) -> None:
    d = pts.shape[1]
    cache: dict = {}
    for l, coeffs in levels.items():
        factors = []
        for j, lj in enumerate(l):
            key = (j, lj)
            if key not in cache:
                cache[key] = _axis_hats(pts[:, j], lj)
            factors.append(cache[key])
        c = coeffs[tuple(fac[0] for fac in factors)]
        vals = [fac[1] for fac in factors]
        # prefix/suffix products give every leave-one-out product in O(d)
        prefix = [np.ones_like(c)]
        for v in vals[:-1]:
            prefix.append(prefix[-1] * v)
        suffix = np.ones_like(c)
        for j in range(d - 1, -1, -1):
            grad[:, j] += c * factors[j][2] * prefix[j] * suffix
            suffix = suffix * vals[j]
        value += c * suffix


def eval_interpolant(table: SurplusTable, x) -> tuple[np.ndarray, np.ndarray]:
    """Value and exact piecewise gradient of the expansion at ``x``.

    Gradient slopes follow the right-continuous convention of
    :func:`symkorobov.grid.hat_1d`.
    """
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    if pts.shape[1] != table.d:
        raise ValueError(f"point dimension {pts.shape[1]} does not match table dimension {table.d}")
    value = np.zeros(pts.shape[0])
    grad = np.zeros_like(pts)
    perms = list(itertools.permutations(range(table.d))) if table.symmetric else [tuple(range(table.d))]
    for start in range(0, pts.shape[0], _CHUNK):
        block = pts[start : start + _CHUNK]
        for perm in perms:
            perm = list(perm)
            moved = block[:, perm]
            v = np.zeros(block.shape[0])
            g = np.zeros_like(block)
            _accumulate(table._levels, moved, v, g)
            value[start : start + _CHUNK] += v
            # d/dx_{perm[j]} of phi(moved) picks up the j-th slope
            grad[start : start + _CHUNK][:, perm] += g
    if x.ndim == 1:
        return value[0], grad[0]
    return value, grad
