import math

import numpy as np
import pytest

from symkorobov.nets import build_sym_basis_net, gadget_product_tree
from symkorobov.symmetry import sym_basis_oracle
from symkorobov.verify import (
    PiecewiseLinear,
    basis_table,
    interior_points,
    min_flagged_argument,
    outside_support_points,
    permutation_gap,
    pl_on_axis_rule,
    product_h1_distance,
    product_perturbation_trial,
    rounding_perturbation,
    support_check,
    verify_basis_net,
)


def test_basis_table_expands_to_orbit_sum():
    from symkorobov.interpolant import eval_interpolant

    t = basis_table((1, 2), (1, 3))
    x = np.random.default_rng(0).random((100, 2))
    assert np.allclose(eval_interpolant(t, x)[0], sym_basis_oracle((1, 2), (1, 3), x), atol=1e-15)


def test_outside_support_points():
    pts = outside_support_points((2, 2), (1, 1), 500, np.random.default_rng(1))
    assert len(pts) == 500
    assert np.all(sym_basis_oracle((2, 2), (1, 1), pts) == 0)


def test_support_and_permutation_checks_d2():
    rng = np.random.default_rng(2)
    net, _ = build_sym_basis_net((1, 2), (1, 1), 2**-9)
    sc = support_check(net, (1, 2), (1, 1), 300, rng)
    assert sc.checked == 300 and sc.exact_violations == 0 and sc.exact_max_abs == 0.0
    assert permutation_gap(net, 1000, rng) <= 1e-12
    assert min_flagged_argument(net, rng.random((50, 2))) >= 0.0
    assert rounding_perturbation(net, rng.random((50, 2))) <= 1e-10


def test_verify_basis_net_fills_report():
    net, rep, extra = verify_basis_net((1, 2), (1, 3), 2**-8, samples=500, exact_samples=50)
    assert rep.support_violations == 0
    assert rep.measured_h1_distance <= rep.claimed_h1_error_bound
    assert rep.rounding_perturbation <= 1e-10
    assert extra["support_checked"] == 500 and extra["min_flagged_argument"] >= 0


def test_interior_points_avoid_kinks():
    net, _ = build_sym_basis_net((2, 3), (1, 5), 2**-9)
    x = interior_points(net, 200, np.random.default_rng(3), margin=1e-4)
    for s, bps in enumerate(net.axis_breakpoints()):
        assert np.abs(x[:, s, None] - bps[None, :]).min() > 1e-4


def _pl_sample(knots, values, m=200_001):
    f = PiecewiseLinear(knots, values)
    x = np.linspace(0, 1, m)
    return f(x), np.gradient(f(x), x)


def test_product_h1_distance_against_brute_force_d2():
    rng = np.random.default_rng(4)
    knots = np.linspace(0, 1, 5)
    fs = [PiecewiseLinear(knots, rng.uniform(-1, 1, 5)) for _ in range(2)]
    gs = [PiecewiseLinear(knots, f.values + rng.uniform(-0.1, 0.1, 5)) for f in fs]
    # brute force on a tensor Gauss rule aligned with the knots
    g, w = np.polynomial.legendre.leggauss(4)
    a, b = knots[:-1], knots[1:]
    x = (a[:, None] + (g + 1) * (b - a)[:, None] / 2).ravel()
    wx = (w * (b - a)[:, None] / 2).ravel()
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(wx, wx)
    P = fs[0](X) * fs[1](Y) - gs[0](X) * gs[1](Y)
    Px = fs[0].slope(X) * fs[1](Y) - gs[0].slope(X) * gs[1](Y)
    Py = fs[0](X) * fs[1].slope(Y) - gs[0](X) * gs[1].slope(Y)
    brute = math.sqrt(float((W * (P**2 + Px**2 + Py**2)).sum()))
    assert product_h1_distance(fs, gs) == pytest.approx(brute, rel=1e-10)


def test_pl_norm_cross_check():
    f = PiecewiseLinear(np.linspace(0, 1, 9), np.random.default_rng(5).uniform(-1, 1, 9))
    from symkorobov.verify import _h1

    assert _h1(f) == pytest.approx(pl_on_axis_rule(f), rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_product_perturbation_bound(d):
    rng = np.random.default_rng(100 + d)
    for _ in range(20):
        trial = product_perturbation_trial(d, rng)
        assert trial["ok"], trial


def test_product_h1_needs_shared_knots():
    a = PiecewiseLinear(np.linspace(0, 1, 3), np.zeros(3))
    b = PiecewiseLinear(np.linspace(0, 1, 4), np.zeros(4))
    with pytest.raises(ValueError):
        product_h1_distance([a], [b])


def test_product_tree_exact_nonnegativity():
    net = gadget_product_tree(4)
    assert min_flagged_argument(net, np.random.default_rng(6).random((50, 4))) >= 0.0
