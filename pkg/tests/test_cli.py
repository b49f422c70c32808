import csv
import io
import json

import numpy as np
import pytest

from symkorobov import cli
from symkorobov.experiments import (
    ConfigError,
    ExperimentConfig,
    fit_gradient,
    rate_constant,
    run,
    symmetric_gradient_features,
)
from symkorobov.grid import IndexSetSpec
from symkorobov.interpolant import build_interpolant, eval_interpolant
from symkorobov.symmetry import canonical_orbits
from symkorobov.targets import builtin_target


def _rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_counts_cli(tmp_path):
    out = tmp_path / "counts.csv"
    assert cli.main(["counts", "--d", "1-6", "--n-min", "1", "--n-max", "8", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 48
    first = next(r for r in rows if r["d"] == "1" and r["n"] == "3")
    assert first["x_grid"] == "7" and float(first["lemma_bound"]) == pytest.approx(10.873, abs=1e-3) and first["bound_ok"] == "1"
    for r in rows:
        assert int(r["x_sym_grid"]) <= int(r["x_grid"]) <= int(r["v_grid"])
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["ok"] and side["config"]["command"] == "counts" and side["config"]["d"] == [1, 2, 3, 4, 5, 6]


def test_counts_cap_is_usage_error(capsys):
    assert cli.main(["counts", "--d", "17"]) == 2
    assert "d <= 16" in capsys.readouterr().err
    assert cli.main(["net-verify", "--d", "7"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["rates", "--d", "x"],
        ["rates", "--n-min", "5", "--n-max", "3"],
        ["rates", "--target", "nope"],
        ["rates", "--delta", "0.7"],
        ["gradient-fit", "--samples", "1.5"],
        ["gradient-fit", "--noise", "-1"],
    ],
)
def test_usage_errors(argv):
    assert cli.main(argv) == 2


def test_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["gradient-fit", "--d", "2", "--n-min", "2", "--n-max", "2", "--samples", "50,200", "--seeds", "3"]
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ja, jb = (json.loads(p.with_suffix(".json").read_text()) for p in (a, b))
    ja["config"].pop("out"), jb["config"].pop("out")
    assert ja == jb


def test_stdout_output(capsys):
    assert cli.main(["counts", "--d", "2", "--n-min", "1", "--n-max", "2"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "d,n,v_grid,x_grid,x_sym_grid,lemma_bound,bound_ok"


def test_rates_small(tmp_path):
    out = tmp_path / "rates.csv"
    assert cli.main(["rates", "--d", "1,2", "--n-min", "3", "--n-max", "5", "--out", str(out)]) == 0
    rows = _rows(out)
    for r in rows:
        assert abs(float(r["e2_energy"]) - float(r["e2_sym_energy"])) <= 1e-12
        if r["net_energy"]:
            # triangle inequality: |net - f| within the net-to-interpolant gap of |f_n - f|
            assert abs(float(r["net_energy"]) - float(r["e2_sym_energy"])) <= float(r["net_to_interpolant"]) + 1e-12
    d2 = [float(r["e2_energy"]) for r in rows if r["d"] == "2"]
    assert all(1.7 <= a / b <= 2.3 for a, b in zip(d2, d2[1:]))
    footer = [ln for ln in out.read_text().splitlines() if ln.startswith("#")]
    assert len(footer) == 2 and "slopes" in footer[0]


def test_rate_constant_bounds_errors():
    f = builtin_target("prod_sine", 2)
    assert rate_constant(f) > 0


def test_net_verify_d2(tmp_path):
    out = tmp_path / "verify.csv"
    code = cli.main(["net-verify", "--d", "2", "--n-min", "2", "--n-max", "2", "--check-points", "10000", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.with_suffix(".json").read_text())["summary"]["reports"][0]
    # (1,1),(1,1) is supported on the whole cube, so there is nothing outside to check
    assert all(b["support_violations"] == 0 and b["support_checked"] in (0, 10000) for b in rep["bases"])
    assert sum(b["support_checked"] == 10000 for b in rep["bases"]) >= len(rep["bases"]) - 1
    assert rep["full"]["decomposition_gap_float"] <= 1e-10
    assert rep["full"]["depth"] == 3
    assert all(b["depth"] == 3 for b in rep["bases"])


def test_net_verify_reports_failures_with_exit_1(tmp_path):
    # the float path at d=3 fails the 1e-10 permutation check; the CLI must say so
    out = tmp_path / "v3.csv"
    assert cli.main(["net-verify", "--d", "3", "--n-min", "1", "--n-max", "1", "--check-points", "500", "--out", str(out)]) == 1
    side = json.loads(out.with_suffix(".json").read_text())
    assert not side["ok"] and any("permutation gap" in msg for msg in side["failures"])


def test_gradient_features_match_interpolant_gradient():
    f = builtin_target("prod_sine", 2)
    spec = IndexSetSpec("energy", 3, 2)
    table = build_interpolant(f, spec, symmetric=True)
    orbits = canonical_orbits(spec)
    coef = np.array([table.entries[(o.canonical_level, o.canonical_index)] for o in orbits])
    x = np.random.default_rng(0).random((100, 2))
    feats = symmetric_gradient_features(orbits, x)
    assert np.allclose(feats @ coef, eval_interpolant(table, x)[1], atol=1e-13)


def test_noiseless_recovery():
    f = builtin_target("prod_sine", 2)
    spec = IndexSetSpec("energy", 3, 2)
    table = build_interpolant(f, spec, symmetric=True)
    orbits = canonical_orbits(spec)
    ref = np.array([table.entries[(o.canonical_level, o.canonical_index)] for o in orbits])
    x = np.random.default_rng(1).random((10 * len(orbits), 2))
    coef, rank, loss = fit_gradient(orbits, x, eval_interpolant(table, x)[1])
    assert rank == len(orbits) and loss <= 1e-20
    assert np.abs(coef - ref).max() <= 1e-8


def test_rank_deficient_runs_are_reported_and_skipped():
    cfg = ExperimentConfig("gradient-fit", d=2, n_min=3, n_max=3, samples=(3, 100), seeds=2)
    res = run(cfg)
    small = [r for r in res.rows if r[2] == 3]
    assert small and all(r[5] is None and r[7] is None for r in small)
    assert res.summary["curves"]["d=2 n=3 noise=0.1"]["mean_energy_error"][3] is None


def test_zero_target_noise_floor():
    cfg = ExperimentConfig("gradient-fit", d=2, n_min=3, n_max=3, target="zero", samples=(1000,), noise=(0.01, 0.1, 0.3), seeds=5)
    curves = run(cfg).summary["curves"]
    errs = [curves[f"d=2 n=3 noise={eta}"]["mean_energy_error"][1000] for eta in (0.01, 0.1, 0.3)]
    assert all(a < b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.3


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("rates", d=(0,))
    with pytest.raises(ConfigError):
        ExperimentConfig("gradient-fit", seeds=0)
    cfg = ExperimentConfig("counts", d=3)
    assert cfg.d == (3,) and list(cfg.n_range) == [1, 2, 3, 4]
