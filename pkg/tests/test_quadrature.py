import math

import numpy as np
import pytest

from symkorobov.grid import IndexSetSpec, hat_eval
from symkorobov.interpolant import build_interpolant
from symkorobov.quadrature import (
    ErrorReport,
    QuadratureSpec,
    axis_rule,
    default_quadrature,
    norm_diff,
    separable_norm_diff,
    seminorm_2_2,
)
from symkorobov.targets import builtin_target


class _Hat:
    d = 1

    def value_and_grad(self, x):
        return hat_eval((1,), (1,), np.atleast_2d(x))


def test_identical_operands_give_zero():
    f = builtin_target("prod_sine", 2)
    rep = norm_diff(f, f, QuadratureSpec("tensor", 3, 3))
    assert (rep.l2, rep.energy, rep.h1) == (0.0, 0.0, 0.0)


def test_prod_sine_energy():
    rep = norm_diff(builtin_target("prod_sine", 2), None, QuadratureSpec("tensor", 4, 4))
    assert rep.energy == pytest.approx(math.pi / math.sqrt(2), abs=1e-6)


def test_hat_norms_exact():
    rep = norm_diff(_Hat(), None, QuadratureSpec("tensor", 1, 3))
    assert rep.energy == pytest.approx(2.0, abs=1e-14)
    assert rep.l2 == pytest.approx(math.sqrt(1 / 3), abs=1e-14)


def test_pythagoras():
    f = builtin_target("mixed_poly", 2)
    t = build_interpolant(f, IndexSetSpec("energy", 3, 2))
    rep = norm_diff(f, t, QuadratureSpec("tensor", 4, 3))
    assert rep.h1**2 == pytest.approx(rep.l2**2 + rep.energy**2, rel=1e-12)


def test_tensor_exact_for_aligned_interpolants():
    # two piecewise-linear interpolants: 3 Gauss points per cell are exact, so refining changes nothing
    f = builtin_target("prod_sine", 2)
    a = build_interpolant(f, IndexSetSpec("energy", 4, 2))
    b = build_interpolant(f, IndexSetSpec("total_degree", 2, 2))
    coarse = norm_diff(a, b, QuadratureSpec("tensor", a.finest_level, 3))
    fine = norm_diff(a, b, QuadratureSpec("tensor", a.finest_level + 2, 5))
    assert coarse.h1 == pytest.approx(fine.h1, rel=1e-12)


def test_seminorm_examples():
    assert seminorm_2_2(builtin_target("prod_quadratic", 1), QuadratureSpec("tensor", 2, 3)) == pytest.approx(2.0, rel=1e-14)
    assert seminorm_2_2(builtin_target("prod_sine", 2), QuadratureSpec("tensor", 4, 4)) == pytest.approx(math.pi**4 / 2, rel=1e-4)
    qmc = QuadratureSpec("qmc", 4, sample_count=1 << 14, seed=1)
    assert seminorm_2_2(builtin_target("prod_sine", 3), qmc) == pytest.approx(math.pi**6 * 2**-1.5, rel=1e-3)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_qmc_agrees_with_tensor(d):
    f = builtin_target("prod_sine", d)
    t = build_interpolant(f, IndexSetSpec("energy", 3, d))
    tensor = norm_diff(f, t, QuadratureSpec("tensor", 6 if d < 3 else 4, 3))
    qmc = norm_diff(f, t, QuadratureSpec("qmc", 4, sample_count=1 << 14, seed=7))
    assert qmc.estimator_stderr is not None and qmc.estimator_stderr > 0
    assert abs(qmc.energy - tensor.energy) <= 3 * qmc.estimator_stderr


@pytest.mark.parametrize("name", ["prod_sine", "prod_quadratic", "mixed_poly", "zero"])
@pytest.mark.parametrize("d,n,sym", [(1, 4, False), (2, 3, False), (2, 4, True), (3, 3, True)])
def test_separable_matches_full_tensor(name, d, n, sym):
    f = builtin_target(name, d)
    t = build_interpolant(f, IndexSetSpec("energy", n, d), symmetric=sym)
    q = QuadratureSpec("tensor", t.finest_level + 1, 3)
    a, b = separable_norm_diff(f, t, q), norm_diff(f, t, q)
    # the separable form is |f|^2 - 2<f,u> + |u|^2, so compare squares against the operand scale
    ref = norm_diff(f, None, q)
    assert abs(a.energy**2 - b.energy**2) <= 1e-13 * max(1.0, ref.energy**2)
    assert abs(a.l2**2 - b.l2**2) <= 1e-13 * max(1.0, ref.l2**2)


def test_separable_requirements():
    f = builtin_target("prod_sine", 2)
    t = build_interpolant(f, IndexSetSpec("energy", 4, 2))
    with pytest.raises(ValueError):
        separable_norm_diff(f, t, QuadratureSpec("qmc", 4))
    with pytest.raises(ValueError):
        separable_norm_diff(f, t, QuadratureSpec("tensor", 1, 3))


def test_axis_rule_integrates_polynomials():
    x, w = axis_rule(3, 3, extra=[0.3, 0.71])
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert w @ x**5 == pytest.approx(1 / 6, abs=1e-15)


def test_default_quadrature_switches_mode():
    assert default_quadrature(3, 8).mode == "tensor"
    assert default_quadrature(5, 6).mode == "qmc"
    assert default_quadrature(4, 6).mode == "tensor"


def test_report_serialisation():
    rep = norm_diff(builtin_target("prod_sine", 1), None, QuadratureSpec("tensor", 3, 3))
    assert isinstance(rep, ErrorReport)
    assert len(rep.csv_row()) == len(ErrorReport.CSV_HEADER)
    assert '"quadrature"' in rep.to_json()


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec("midpoint")
    with pytest.raises(ValueError):
        QuadratureSpec("qmc", 3, sample_count=10)
