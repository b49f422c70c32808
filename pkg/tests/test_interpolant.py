import numpy as np
import pytest

from symkorobov.grid import IndexSetSpec, compositions, hat_eval, odd_index_set
from symkorobov.interpolant import (
    SurplusTable,
    build_interpolant,
    eval_interpolant,
    surplus_integral,
    surplus_stencil,
)
from symkorobov.quadrature import QuadratureSpec, separable_norm_diff
from symkorobov.targets import TargetFunction, builtin_target


def _hat_target():
    def f(x):
        return hat_eval((1,), (1,), np.atleast_2d(x))[0]

    def grad(x):
        return hat_eval((1,), (1,), np.atleast_2d(x))[1]

    return TargetFunction("hat", 1, f, grad)


def test_stencil_examples():
    q1 = builtin_target("prod_quadratic", 1)
    assert surplus_stencil(q1, (1,), (1,)) == pytest.approx(0.25, abs=1e-15)
    assert surplus_stencil(q1, (2,), (1,)) == pytest.approx(0.0625, abs=1e-15)
    q2 = builtin_target("prod_quadratic", 2)
    assert surplus_stencil(q2, (1, 1), (1, 1)) == pytest.approx(0.0625, abs=1e-15)


def test_integral_examples():
    q1 = builtin_target("prod_quadratic", 1)
    assert surplus_integral(q1, (2,), (1,)) == pytest.approx(0.0625, abs=1e-14)
    assert surplus_integral(q1, (1,), (1,)) == pytest.approx(0.25, abs=1e-14)
    zero = builtin_target("zero", 2)
    assert surplus_integral(zero, (2, 1), (3, 1)) == 0.0


@pytest.mark.parametrize("name", ["prod_sine", "prod_quadratic", "mixed_poly"])
@pytest.mark.parametrize("d", [1, 2])
def test_stencil_equals_scaled_integral(name, d):
    f = builtin_target(name, d)
    for total in range(d, 9):
        for l in compositions(total, d):
            for i in odd_index_set(l)[:: max(1, len(odd_index_set(l)) // 6)]:
                assert surplus_stencil(f, l, i) == pytest.approx(surplus_integral(f, l, i), abs=1e-8)


def test_symmetric_rescaling_examples():
    f = builtin_target("prod_quadratic", 2)
    sym = build_interpolant(f, IndexSetSpec("energy", 2, 2), symmetric=True)
    assert sym.entries[((1, 1), (1, 1))] == pytest.approx(0.03125, abs=1e-15)
    full = build_interpolant(f, IndexSetSpec("energy", 2, 2))
    assert sym.entries[((1, 2), (1, 1))] == full.entries[((1, 2), (1, 1))]


def test_d1_symmetric_equals_plain():
    f = builtin_target("prod_sine", 1)
    spec = IndexSetSpec("energy", 5, 1)
    assert dict(build_interpolant(f, spec, True).entries) == dict(build_interpolant(f, spec).entries)


def test_hat_reproduced_exactly():
    f = _hat_target()
    x = np.random.default_rng(0).random((200, 1))
    for n in (1, 3, 5):
        v, g = eval_interpolant(build_interpolant(f, IndexSetSpec("energy", n, 1)), x)
        assert np.allclose(v, f.eval(x), atol=1e-15)
        assert np.allclose(g, f.grad(x), atol=1e-15)


def test_piecewise_linear_reproduced_on_its_grid():
    # the interpolant at level n reproduces its own nodal values
    f = builtin_target("prod_sine", 1)
    t = build_interpolant(f, IndexSetSpec("energy", 4, 1))
    nodes = np.arange(1, 16)[:, None] / 16.0
    assert np.allclose(eval_interpolant(t, nodes)[0], f.eval(nodes), atol=1e-14)


def test_boundary_vanishes():
    f = builtin_target("mixed_poly", 3)
    t = build_interpolant(f, IndexSetSpec("energy", 4, 3), symmetric=True)
    x = np.random.default_rng(1).random((100, 3))
    x[:50, 0] = 0.0
    x[50:, 2] = 1.0
    assert np.all(eval_interpolant(t, x)[0] == 0.0)


@pytest.mark.parametrize("d,n", [(d, n) for d in range(1, 5) for n in range(1, 6)])
def test_symmetric_matches_plain(d, n):
    rng = np.random.default_rng(10 * d + n)
    x = rng.random((1000, d))
    for name in ("prod_sine", "prod_quadratic", "mixed_poly"):
        f = builtin_target(name, d)
        spec = IndexSetSpec("energy", n, d)
        a = eval_interpolant(build_interpolant(f, spec), x)
        b = eval_interpolant(build_interpolant(f, spec, symmetric=True), x)
        assert np.abs(a[0] - b[0]).max() <= 1e-12
        assert np.abs(a[1] - b[1]).max() <= 1e-12 * max(1.0, np.abs(a[1]).max())


def test_symmetric_table_permutation_invariant():
    f = builtin_target("prod_sine", 3)
    t = build_interpolant(f, IndexSetSpec("energy", 5, 3), symmetric=True)
    rng = np.random.default_rng(2)
    x = rng.random((500, 3))
    for _ in range(5):
        assert np.abs(eval_interpolant(t, x[:, rng.permutation(3)])[0] - eval_interpolant(t, x)[0]).max() <= 1e-12


def test_gradient_matches_finite_differences_off_kinks():
    f = builtin_target("prod_sine", 2)
    t = build_interpolant(f, IndexSetSpec("energy", 3, 2))
    rng = np.random.default_rng(3)
    x = rng.random((2000, 2))
    # kinks lie on multiples of 1/8 at n=3
    x = x[np.all(np.abs(x * 8 - np.round(x * 8)) > 1e-3, axis=1)][:500]
    _, g = eval_interpolant(t, x)
    for s in range(2):
        e = np.zeros(2)
        e[s] = 1e-7
        fd = (eval_interpolant(t, x + e)[0] - eval_interpolant(t, x - e)[0]) / 2e-7
        assert np.abs(fd - g[:, s]).max() <= 1e-5 * max(1.0, np.abs(g).max())


def test_total_degree_error_not_larger():
    f = builtin_target("prod_sine", 2)
    for n in range(3, 7):
        q = QuadratureSpec("tensor", 10, 3)
        e1 = separable_norm_diff(f, build_interpolant(f, IndexSetSpec("total_degree", n, 2)), q).energy
        e2 = separable_norm_diff(f, build_interpolant(f, IndexSetSpec("energy", n, 2)), q).energy
        assert e1 <= e2 + 1e-14


def test_table_validation_and_json():
    f = builtin_target("prod_quadratic", 2)
    t = build_interpolant(f, IndexSetSpec("energy", 3, 2), symmetric=True)
    back = SurplusTable.from_json(t.to_json())
    assert back.symmetric and dict(back.entries) == dict(t.entries)
    with pytest.raises(ValueError):
        SurplusTable(IndexSetSpec("energy", 3, 2), True, {((2, 1), (1, 1)): 1.0})
    with pytest.raises(ValueError):
        SurplusTable(IndexSetSpec("energy", 2, 2), False, {((3, 3), (1, 1)): 1.0})
    with pytest.raises(ValueError):
        build_interpolant(builtin_target("prod_sine", 3), IndexSetSpec("energy", 3, 2))


def test_asymmetric_target_rejected_for_symmetric_table():
    def f(x):
        x = np.atleast_2d(x)
        return x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1]) * x[:, 0]

    g = TargetFunction("skew", 2, f, lambda x: np.zeros_like(np.atleast_2d(x)))
    with pytest.raises(ValueError):
        build_interpolant(g, IndexSetSpec("energy", 2, 2), symmetric=True)
