"""L2, energy and H1 distances between functions on the unit cube.

Anything with a ``d`` attribute and a ``value_and_grad(points)`` method can
be compared (targets, surplus tables, networks). Two estimators:

``tensor``
    Composite Gauss-Legendre on the dyadic cells of ``cell_level``, refined
    by any extra per-axis breakpoints the operands report through
    ``axis_breakpoints()``. Integrands that are polynomial inside every cell
    are integrated exactly up to the rule's degree.
``qmc``
    Equal-weight averages over a Sobol point set under independent random
    shifts modulo 1; the spread of the shifted replicates gives the
    standard error.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .grid import hat_1d
from .symmetry import orbit_members, stabilizer_size

MODES = ("tensor", "qmc")
_CHUNK = 1 << 17


@dataclass(frozen=True)
class QuadratureSpec:
    mode: str = "tensor"
    cell_level: int = 4
    points_per_axis: int = 3
    sample_count: int = 1 << 14
    shifts: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown quadrature mode {self.mode!r}; expected one of {MODES}")
        if self.cell_level < 0 or self.points_per_axis < 1:
            raise ValueError("cell_level must be >= 0 and points_per_axis >= 1")
        if self.mode == "qmc" and (self.sample_count < 1000 or self.shifts < 2):
            raise ValueError("qmc mode needs sample_count >= 1000 and at least 2 shifts")


def default_quadrature(d: int, cell_level: int, seed: int = 0, points_per_axis: int = 3) -> QuadratureSpec:
    """Tensor rule while the cell count stays moderate, QMC otherwise."""
    if d <= 3 or cell_level * d <= 24:
        return QuadratureSpec("tensor", cell_level, points_per_axis, seed=seed)
    return QuadratureSpec("qmc", cell_level, sample_count=1 << 16, seed=seed)


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    energy: float
    h1: float
    estimator_stderr: Optional[float]
    quadrature: QuadratureSpec

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "quadrature"}
        out["quadrature"] = asdict(self.quadrature)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> list:
        q = self.quadrature
        return [self.l2, self.energy, self.h1, self.estimator_stderr, q.mode, q.cell_level, q.points_per_axis, q.sample_count, q.seed]

    CSV_HEADER = ("l2", "energy", "h1", "estimator_stderr", "mode", "cell_level", "points_per_axis", "sample_count", "seed")


class _Zero:
    def __init__(self, d: int):
        self.d = d

    def value_and_grad(self, x):
        x = np.atleast_2d(x)
        return np.zeros(x.shape[0]), np.zeros_like(x)


def _breakpoints(obj, d: int) -> list[np.ndarray]:
    getter = getattr(obj, "axis_breakpoints", None)
    if getter is None:
        return [np.zeros(0)] * d
    return [np.asarray(b, dtype=float) for b in getter()]


def axis_rule(cell_level: int, points: int, extra=()) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[0, 1]``."""
    edges = np.linspace(0.0, 1.0, 2**cell_level + 1)
    extra = np.asarray(extra, dtype=float)
    extra = extra[(extra > 0.0) & (extra < 1.0)]
    edges = np.unique(np.concatenate([edges, extra]))
    g, w = np.polynomial.legendre.leggauss(points)
    a, b = edges[:-1], edges[1:]
    nodes = (a[:, None] + (g[None, :] + 1.0) * (b - a)[:, None] / 2.0).ravel()
    weights = (w[None, :] * (b - a)[:, None] / 2.0).ravel()
    return nodes, weights


def _tensor_points(rules, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    shape = tuple(len(r[0]) for r in rules)
    idx = np.unravel_index(np.arange(start, stop), shape)
    pts = np.stack([r[0][k] for r, k in zip(rules, idx)], axis=1)
    wts = np.ones(stop - start)
    for r, k in zip(rules, idx):
        wts *= r[1][k]
    return pts, wts


def _chunk_size(*objs) -> int:
    """Points per batch, shrunk for wide operands so activations stay around 64 MB."""
    cost = sum(int(getattr(o, "neuron_count", 0) or 0) for o in objs)
    return int(min(_CHUNK, max(256, (1 << 23) // max(cost, 1))))


def _finest(obj) -> int:
    return int(getattr(obj, "finest_level", 0) or 0)


def _squared_terms(a, b, pts):
    va, ga = a.value_and_grad(pts)
    vb, gb = b.value_and_grad(pts)
    dv = np.asarray(va) - np.asarray(vb)
    dg = np.asarray(ga) - np.asarray(gb)
    return dv * dv, np.sum(dg * dg, axis=1)


def norm_diff(a, b, spec: QuadratureSpec) -> ErrorReport:
    """L2, energy (gradient L2) and H1 norms of ``a - b``; ``b=None`` means zero."""
    d = a.d
    if b is None:
        b = _Zero(d)
    if b.d != d:
        raise ValueError(f"dimension mismatch: {d} vs {b.d}")
    if spec.mode == "tensor":
        finest = max(_finest(a), _finest(b))
        if spec.cell_level < finest:
            raise ValueError(f"cell_level {spec.cell_level} is coarser than the finest level {finest}")
        extra_a, extra_b = _breakpoints(a, d), _breakpoints(b, d)
        rules = [axis_rule(spec.cell_level, spec.points_per_axis, np.concatenate([ea, eb])) for ea, eb in zip(extra_a, extra_b)]
        total = math.prod(len(r[0]) for r in rules)
        step = _chunk_size(a, b)
        l2_sq = e_sq = 0.0
        for start in range(0, total, step):
            pts, wts = _tensor_points(rules, start, min(total, start + step))
            sv, sg = _squared_terms(a, b, pts)
            l2_sq += float(wts @ sv)
            e_sq += float(wts @ sg)
        stderr = None
    else:
        l2_sq, e_sq, stderr = _qmc_norms(a, b, spec)
    return ErrorReport(math.sqrt(l2_sq), math.sqrt(e_sq), math.sqrt(l2_sq + e_sq), stderr, spec)


def _expanded_entries(table) -> tuple[np.ndarray, np.ndarray]:
    """Levels/indices stacked as ``(N, 2, d)`` plus coefficients, orbits unfolded."""
    pairs, coeffs = [], []
    for (l, i), v in table.entries.items():
        if table.symmetric:
            # the orbit sum adds each distinct member |Stab| times
            weight = v * stabilizer_size(l, i)
            for member in orbit_members(l, i):
                pairs.append(member)
                coeffs.append(weight)
        else:
            pairs.append((l, i))
            coeffs.append(v)
    return np.array(pairs, dtype=np.int64).reshape(len(pairs), 2, table.d), np.array(coeffs)


def separable_norm_diff(f, table, spec: QuadratureSpec) -> ErrorReport:
    """Tensor-mode norms of ``f - table`` evaluated one axis at a time.

    ``f`` must carry ``factors`` (a sum of coordinate products). Every
    integral of the tensor rule then factorises into 1D integrals against
    hats, so the result equals :func:`norm_diff` in tensor mode up to
    rounding while costing ``O(N^2 d)`` for ``N`` expanded basis functions.
    """
    if getattr(f, "factors", None) is None:
        raise ValueError(f"target {getattr(f, 'name', f)!r} is not given in separable form")
    if spec.mode != "tensor":
        raise ValueError("separable evaluation uses the tensor rule")
    d = table.d
    if f.d != d:
        raise ValueError(f"dimension mismatch: {f.d} vs {d}")
    if spec.cell_level < table.finest_level:
        raise ValueError(f"cell_level {spec.cell_level} is coarser than the finest level {table.finest_level}")
    nodes, w = axis_rule(spec.cell_level, spec.points_per_axis)
    pairs, v = _expanded_entries(table)
    hats = sorted({(int(p[0, k]), int(p[1, k])) for p in pairs for k in range(d)})
    lookup = {h: n for n, h in enumerate(hats)}
    P = np.array([[lookup[(int(p[0, k]), int(p[1, k]))] for k in range(d)] for p in pairs], dtype=np.int64).reshape(len(pairs), d)
    H = np.zeros((len(hats), len(nodes)))
    S = np.zeros_like(H)
    for n, (lv, iv) in enumerate(hats):
        H[n], S[n] = hat_1d(nodes, lv, iv)
    mass, stiff = (H * w) @ H.T, (S * w) @ S.T

    terms = f.factors
    g = [[np.asarray(gk(nodes), dtype=float) for gk, _ in t] for t in terms]
    dg = [[np.asarray(dk(nodes), dtype=float) for _, dk in t] for t in terms]

    # <f, f>
    ff_l2 = ff_e = 0.0
    for a in range(len(terms)):
        for b in range(len(terms)):
            m = [float(w @ (g[a][k] * g[b][k])) for k in range(d)]
            s = [float(w @ (dg[a][k] * dg[b][k])) for k in range(d)]
            ff_l2 += math.prod(m)
            ff_e += sum(s[j] * math.prod(m[:j] + m[j + 1 :]) for j in range(d))

    # <f, u>
    fu_l2 = fu_e = 0.0
    for a in range(len(terms)):
        mf = [(H * w) @ g[a][k] for k in range(d)]
        sf = [(S * w) @ dg[a][k] for k in range(d)]
        cols = [mf[k][P[:, k]] for k in range(d)]
        fu_l2 += float(v @ np.prod(cols, axis=0)) if d else 0.0
        for j in range(d):
            fu_e += float(v @ (sf[j][P[:, j]] * np.prod(cols[:j] + cols[j + 1 :], axis=0)))

    # <u, u>, in row blocks to bound memory
    uu_l2 = uu_e = 0.0
    N = len(v)
    step = max(1, (1 << 22) // max(N, 1))
    for start in range(0, N, step):
        rows = slice(start, min(N, start + step))
        ms = [mass[np.ix_(P[rows, k], P[:, k])] for k in range(d)]
        ks = [stiff[np.ix_(P[rows, k], P[:, k])] for k in range(d)]
        full = np.prod(ms, axis=0)
        uu_l2 += float(v[rows] @ full @ v)
        for j in range(d):
            rest = np.prod(ms[:j] + ms[j + 1 :], axis=0) if d > 1 else np.ones_like(ks[j])
            uu_e += float(v[rows] @ (ks[j] * rest) @ v)

    l2_sq = max(ff_l2 - 2.0 * fu_l2 + uu_l2, 0.0)
    e_sq = max(ff_e - 2.0 * fu_e + uu_e, 0.0)
    return ErrorReport(math.sqrt(l2_sq), math.sqrt(e_sq), math.sqrt(l2_sq + e_sq), None, spec)


def _qmc_base(d: int, spec: QuadratureSpec) -> np.ndarray:
    per = spec.sample_count // spec.shifts
    m = max(1, int(math.ceil(math.log2(per))))
    return qmc.Sobol(d, scramble=False).random_base2(m)


def _qmc_norms(a, b, spec: QuadratureSpec) -> tuple[float, float, float]:
    d = a.d
    base = _qmc_base(d, spec)
    rng = np.random.default_rng(spec.seed)
    l2_est, e_est = [], []
    step = _chunk_size(a, b)
    for shift in rng.random((spec.shifts, d)):
        pts = np.mod(base + shift, 1.0)
        parts = [_squared_terms(a, b, pts[k : k + step]) for k in range(0, len(pts), step)]
        l2_est.append(np.concatenate([p[0] for p in parts]).mean())
        e_est.append(np.concatenate([p[1] for p in parts]).mean())
    e_est = np.array(e_est)
    e_sq = float(e_est.mean())
    se_sq = float(e_est.std(ddof=1) / math.sqrt(len(e_est)))
    # delta method: se(sqrt(S)) = se(S) / (2 sqrt(S))
    stderr = se_sq / (2.0 * math.sqrt(e_sq)) if e_sq > 0 else 0.0
    return float(np.mean(l2_est)), e_sq, stderr


def seminorm_2_2(f, spec: QuadratureSpec) -> float:
    """Estimate of ``||D^{(2,..,2)} f||_{L2}``."""
    if getattr(f, "mixed2", None) is None:
        raise ValueError("target has no mixed derivative")
    d = f.d
    if spec.mode == "tensor":
        rule = axis_rule(spec.cell_level, spec.points_per_axis)
        rules = [rule] * d
        total = len(rule[0]) ** d
        acc = 0.0
        for start in range(0, total, _CHUNK):
            pts, wts = _tensor_points(rules, start, min(total, start + _CHUNK))
            acc += float(wts @ f.mixed2(pts) ** 2)
        return math.sqrt(acc)
    base = _qmc_base(d, spec)
    rng = np.random.default_rng(spec.seed)
    est = [np.mean(f.mixed2(np.mod(base + s, 1.0)) ** 2) for s in rng.random((spec.shifts, d))]
    return math.sqrt(float(np.mean(est)))
