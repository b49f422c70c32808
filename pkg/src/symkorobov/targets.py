"""Analytic symmetric test functions on the unit cube.

Every built-in target vanishes on the boundary, is invariant under
coordinate permutations, and comes with its gradient, its full mixed
derivative ``d^{2d} f / dx_1^2 ... dx_d^2`` and closed-form reference norms.

``mixed_poly`` is ``f(x) = (sum_k x_k) * prod_j x_j (1 - x_j)``. Writing
``q(t) = t(1-t)`` and ``r(t) = t q(t)`` it expands to
``sum_k r(x_k) prod_{j != k} q(x_j)``, so its mixed derivative is
``(-2)**(d-1) * sum_k (2 - 6 x_k)`` and
``|f|_{2,2} = 2**(d-1) * sqrt(d**2 + 3d)``
(using ``int (2-6t) dt = -1`` and ``int (2-6t)^2 dt = 4``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

BUILTIN_NAMES = ("prod_sine", "prod_quadratic", "mixed_poly", "zero")

Array = np.ndarray


@dataclass(frozen=True)
class TargetFunction:
    name: str
    d: int
    eval: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    mixed2: Optional[Callable[[Array], Array]] = None
    seminorm_2_2: Optional[float] = None
    energy_norm: Optional[float] = None
    # f = sum_t prod_k g_{t,k}(x_k); each factor is a (g, g') pair of 1D callables
    factors: Optional[tuple] = None

    def value_and_grad(self, x) -> tuple[Array, Array]:
        return self.eval(x), self.grad(x)


def _batch(x) -> Array:
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x)


def _product_rule(vals: Array, slopes: Array) -> Array:
    d = vals.shape[1]
    out = np.empty_like(vals)
    for j in range(d):
        out[:, j] = slopes[:, j] * np.prod(np.delete(vals, j, axis=1), axis=1)
    return out


def _sin(t):
    return np.sin(np.pi * t)


def _dsin(t):
    return np.pi * np.cos(np.pi * t)


def _q(t):
    return t * (1.0 - t)


def _dq(t):
    return 1.0 - 2.0 * t


def _r(t):
    return t * t * (1.0 - t)


def _dr(t):
    return t * (2.0 - 3.0 * t)


def _prod_sine(d: int) -> TargetFunction:
    def f(x):
        return np.prod(np.sin(np.pi * _batch(x)), axis=1)

    def grad(x):
        x = _batch(x)
        return _product_rule(np.sin(np.pi * x), np.pi * np.cos(np.pi * x))

    def mixed2(x):
        return (-np.pi**2) ** d * f(x)

    return TargetFunction(
        "prod_sine",
        d,
        f,
        grad,
        mixed2,
        seminorm_2_2=np.pi ** (2 * d) * 2.0 ** (-d / 2),
        energy_norm=math.sqrt(d * np.pi**2 * 2.0**-d),
        factors=(((_sin, _dsin),) * d,),
    )


def _prod_quadratic(d: int) -> TargetFunction:
    def f(x):
        x = _batch(x)
        return np.prod(x * (1.0 - x), axis=1)

    def grad(x):
        x = _batch(x)
        return _product_rule(x * (1.0 - x), 1.0 - 2.0 * x)

    def mixed2(x):
        return np.full(_batch(x).shape[0], (-2.0) ** d)

    # int (1-2t)^2 = 1/3, int t^2 (1-t)^2 = 1/30
    return TargetFunction(
        "prod_quadratic",
        d,
        f,
        grad,
        mixed2,
        seminorm_2_2=2.0**d,
        energy_norm=math.sqrt(d / 3.0 * (1.0 / 30.0) ** (d - 1)),
        factors=(((_q, _dq),) * d,),
    )


def _mixed_poly_energy_sq(d: int) -> Fraction:
    """Exact ``||f||_E^2`` for ``mixed_poly`` from 1D moment integrals."""
    qq, rq, rr = Fraction(1, 30), Fraction(1, 60), Fraction(1, 105)
    dq_dq, dr_dq, dr_dr = Fraction(1, 3), Fraction(1, 6), Fraction(2, 15)
    per_axis = dr_dr * qq ** (d - 1)
    if d >= 2:
        per_axis += 2 * (d - 1) * dr_dq * rq * qq ** (d - 2)
        per_axis += (d - 1) * dq_dq * rr * qq ** (d - 2)
    if d >= 3:
        per_axis += (d - 1) * (d - 2) * dq_dq * rq * rq * qq ** (d - 3)
    return d * per_axis


def _mixed_poly(d: int) -> TargetFunction:
    def f(x):
        x = _batch(x)
        return np.sum(x, axis=1) * np.prod(x * (1.0 - x), axis=1)

    def grad(x):
        x = _batch(x)
        q = x * (1.0 - x)
        s = np.sum(x, axis=1)
        return _product_rule(q, 1.0 - 2.0 * x) * s[:, None] + np.prod(q, axis=1)[:, None]

    def mixed2(x):
        x = _batch(x)
        return (-2.0) ** (d - 1) * np.sum(2.0 - 6.0 * x, axis=1)

    return TargetFunction(
        "mixed_poly",
        d,
        f,
        grad,
        mixed2,
        seminorm_2_2=2.0 ** (d - 1) * math.sqrt(d * d + 3 * d),
        energy_norm=math.sqrt(float(_mixed_poly_energy_sq(d))),
        factors=tuple(tuple((_r, _dr) if j == k else (_q, _dq) for j in range(d)) for k in range(d)),
    )


def _zero(d: int) -> TargetFunction:
    def f(x):
        return np.zeros(_batch(x).shape[0])

    def grad(x):
        return np.zeros_like(_batch(x))

    return TargetFunction("zero", d, f, grad, f, seminorm_2_2=0.0, energy_norm=0.0, factors=())


_BUILDERS = {
    "prod_sine": _prod_sine,
    "prod_quadratic": _prod_quadratic,
    "mixed_poly": _mixed_poly,
    "zero": _zero,
}


def builtin_target(name: str, d: int) -> TargetFunction:
    """Return the named corpus target in dimension ``d``.

    ``zero`` is the identically-zero function, used as a pure-noise control
    by the gradient-fit experiment.
    """
    if name not in _BUILDERS:
        raise ValueError(f"unknown target {name!r}; expected one of {BUILTIN_NAMES}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return _BUILDERS[name](d)
