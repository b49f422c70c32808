"""Checks for constructed networks: support, symmetry, nonnegativity, gradients, H1 fidelity.

Support containment and nonnegativity are properties of the function a
network represents, so they are checked on its exact rational layers. Float
evaluation is compared against the exact layers separately
(:func:`rounding_perturbation`), and permutation invariance is measured on the
float path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .grid import IndexSetSpec
from .interpolant import SurplusTable
from .nets import NetBuildReport, SqReluNet, build_sym_basis_net, net_forward_exact
from .quadrature import QuadratureSpec, axis_rule, norm_diff
from .symmetry import sym_basis_oracle


def basis_table(l, i) -> SurplusTable:
    """Single-entry symmetric table whose expansion is ``psi_{l,i}``."""
    d = len(l)
    spec = IndexSetSpec("total_degree", max(1, sum(l) - d + 1), d)
    return SurplusTable(spec, True, {(tuple(l), tuple(i)): 1.0})


def outside_support_points(l, i, count: int, rng: np.random.Generator, max_rounds: int = 200) -> np.ndarray:
    """Uniform points of the cube where ``psi_{l,i}`` vanishes (may return fewer than ``count``)."""
    d = len(l)
    found = []
    total = 0
    for _ in range(max_rounds):
        x = rng.random((max(4 * count, 1024), d))
        keep = x[sym_basis_oracle(l, i, x) == 0.0]
        found.append(keep)
        total += len(keep)
        if total >= count:
            break
    pts = np.concatenate(found) if found else np.zeros((0, d))
    return pts[:count]


def exact_values(net: SqReluNet, x) -> np.ndarray:
    return np.array([float(v) for v in np.atleast_1d(net_forward_exact(net, x))])


@dataclass(frozen=True)
class SupportCheck:
    checked: int
    exact_violations: int
    exact_max_abs: float
    float_max_abs: float


def support_check(net: SqReluNet, l, i, count: int, rng: np.random.Generator) -> SupportCheck:
    """Exact and float outputs at points outside ``supp psi_{l,i}``."""
    pts = outside_support_points(l, i, count, rng)
    if len(pts) == 0:
        return SupportCheck(0, 0, 0.0, 0.0)
    ex = exact_values(net, pts)
    fl = np.asarray(net.forward(pts))
    return SupportCheck(len(pts), int(np.count_nonzero(ex)), float(np.abs(ex).max()), float(np.abs(fl).max()))


def permutation_gap(net: SqReluNet, count: int, rng: np.random.Generator) -> float:
    """``max |net(tau x) - net(x)|`` over random points and random permutations."""
    d = net.input_dim
    x = rng.random((count, d))
    perms = np.array([rng.permutation(d) for _ in range(count)])
    moved = np.take_along_axis(x, perms, axis=1)
    return float(np.abs(net.forward(moved) - net.forward(x)).max())


def min_flagged_argument(net: SqReluNet, x) -> Optional[float]:
    """Smallest exact argument of a nonnegativity-flagged neuron (``None`` if none)."""
    _, lowest = net_forward_exact(net, x, record_nonneg=True)
    return None if lowest is None else float(lowest)


def rounding_perturbation(net: SqReluNet, x) -> float:
    """``max |float net - exact net|`` at ``x``."""
    return float(np.abs(np.asarray(net.forward(x)) - exact_values(net, x)).max())


def fidelity_spec(*objs, points: int = 3) -> QuadratureSpec:
    finest = max(int(getattr(o, "finest_level", 0) or 0) for o in objs)
    return QuadratureSpec("tensor", max(finest, 1), points)


def h1_distance(a, b) -> float:
    """Tensor-rule H1 distance refined at every reported breakpoint (exact for these piecewise polynomials)."""
    return norm_diff(a, b, fidelity_spec(a, b)).h1


def verify_basis_net(l, i, delta: float, samples: int = 10_000, seed: int = 0, exact_samples: int = 200) -> tuple[SqReluNet, NetBuildReport, dict]:
    """Build one basis network and fill the measured fields of its report."""
    rng = np.random.default_rng(seed)
    net, report = build_sym_basis_net(l, i, delta)
    supp = support_check(net, l, i, samples, rng)
    x = rng.random((exact_samples, len(l)))
    pert = rounding_perturbation(net, x)
    dist = h1_distance(net, basis_table(l, i))
    report = replace(report, rounding_perturbation=pert, measured_h1_distance=dist, support_violations=supp.exact_violations)
    extra = {
        "support_checked": supp.checked,
        "support_exact_max_abs": supp.exact_max_abs,
        "support_float_max_abs": supp.float_max_abs,
        "permutation_gap": permutation_gap(net, samples, rng),
        "min_flagged_argument": min_flagged_argument(net, rng.random((min(samples, 2000), len(l)))),
    }
    return net, report, extra


# ---------------------------------------------------------------------------
# gradients


def _away_from_breakpoints(net, x: np.ndarray, margin: float) -> np.ndarray:
    ok = np.ones(len(x), dtype=bool)
    for s, bps in enumerate(net.axis_breakpoints()):
        if len(bps):
            gap = np.abs(x[:, s, None] - bps[None, :]).min(axis=1)
            ok &= gap > margin
    return ok


def interior_points(net, count: int, rng: np.random.Generator, low: float = 0.0, high: float = 1.0, margin: float = 1e-5) -> np.ndarray:
    """Uniform points in ``(low, high)^d`` at least ``margin`` from every first-layer kink."""
    d = net.input_dim
    out = np.zeros((0, d))
    while len(out) < count:
        x = low + (high - low) * rng.random((2 * count, d))
        out = np.concatenate([out, x[_away_from_breakpoints(net, x, margin)]])
    return out[:count]


def gradient_fd_error(net, x: np.ndarray, step: float = 1e-6) -> float:
    """Largest ``|g - g_fd|_inf / max(1, |g|_inf)`` over the points (central differences)."""
    _, g = net.value_and_grad(x)
    g = np.atleast_2d(g)
    fd = np.empty_like(g)
    for s in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[s] = step
        fd[:, s] = (np.asarray(net.forward(x + e)) - np.asarray(net.forward(x - e))) / (2.0 * step)
    scale = np.maximum(1.0, np.abs(g).max(axis=1))
    return float((np.abs(g - fd).max(axis=1) / scale).max())


# ---------------------------------------------------------------------------
# product perturbation


@dataclass(frozen=True)
class PiecewiseLinear:
    knots: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.knots, self.values)

    def slope(self, t):
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 2)
        return (self.values[k + 1] - self.values[k]) / (self.knots[k + 1] - self.knots[k])


def _pl_inner(a: PiecewiseLinear, b: PiecewiseLinear) -> tuple[float, float]:
    """``(<a, b>_L2, <a', b'>_L2)`` on ``[0, 1]``, exact by 2-point Gauss per piece."""
    edges = np.unique(np.concatenate([a.knots, b.knots]))
    g, w = np.polynomial.legendre.leggauss(2)
    lo, hi = edges[:-1], edges[1:]
    x = (lo[:, None] + (g + 1.0) * (hi - lo)[:, None] / 2.0).ravel()
    wx = (w * (hi - lo)[:, None] / 2.0).ravel()
    return float(wx @ (a(x) * b(x))), float(wx @ (a.slope(x) * b.slope(x)))


def _h1(a: PiecewiseLinear) -> float:
    m, s = _pl_inner(a, a)
    return math.sqrt(m + s)


def product_h1_distance(fs: list[PiecewiseLinear], gs: list[PiecewiseLinear]) -> float:
    """``||prod f_s(x_s) - prod g_s(x_s)||_{H^1([0,1]^d)}`` via the telescoping sum.

    ``P - Q = sum_s (prod_{t<s} f_t)(f_s - g_s)(prod_{t>s} g_t)``; every term is
    a coordinate product, so all inner products factorise and the difference
    is never formed by cancellation.
    """
    d = len(fs)
    diffs = [PiecewiseLinear(f.knots, f.values - g.values) if np.array_equal(f.knots, g.knots) else None for f, g in zip(fs, gs)]
    if any(x is None for x in diffs):
        raise ValueError("f_s and g_s must share knots")
    terms = [[fs[t] for t in range(s)] + [diffs[s]] + [gs[t] for t in range(s + 1, d)] for s in range(d)]
    total = 0.0
    for a in terms:
        for b in terms:
            pairs = [_pl_inner(u, v) for u, v in zip(a, b)]
            mass = [p[0] for p in pairs]
            stiff = [p[1] for p in pairs]
            total += math.prod(mass)
            total += sum(stiff[j] * math.prod(mass[:j] + mass[j + 1 :]) for j in range(d))
    return math.sqrt(max(total, 0.0))


def product_perturbation_trial(d: int, rng: np.random.Generator, pieces: int = 8) -> dict:
    """One random draw of the product perturbation bound ``d (d+1) M**(d-1) delta``."""
    knots = np.linspace(0.0, 1.0, pieces + 1)
    fs, gs = [], []
    target = 10.0 ** rng.uniform(-4, -1)
    for _ in range(d):
        f = PiecewiseLinear(knots, rng.uniform(-1.0, 1.0, pieces + 1))
        e = PiecewiseLinear(knots, rng.uniform(-1.0, 1.0, pieces + 1))
        e = PiecewiseLinear(knots, e.values * (target * rng.uniform(0.1, 1.0) / _h1(e)))
        fs.append(f)
        gs.append(PiecewiseLinear(knots, f.values + e.values))
    delta = max(_h1(PiecewiseLinear(knots, f.values - g.values)) for f, g in zip(fs, gs))
    M = max(max(_h1(f), _h1(g)) for f, g in zip(fs, gs))
    measured = product_h1_distance(fs, gs)
    bound = d * (d + 1) * M ** (d - 1) * delta
    return {"d": d, "delta": delta, "M": M, "measured": measured, "bound": bound, "ok": measured <= bound}


def pl_on_axis_rule(f: PiecewiseLinear, cell_level: int = 6) -> float:
    """Cross-check helper: ``||f||_{H^1}`` by the generic composite rule."""
    x, w = axis_rule(cell_level, 3, f.knots)
    return math.sqrt(float(w @ (f(x) ** 2 + f.slope(x) ** 2)))
