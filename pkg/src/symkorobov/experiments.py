"""Experiment drivers behind the command line: counts, rates, net-verify, gradient-fit.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult` holding a CSV header, rows, a summary dict (written
to the JSON sidecar) and the list of failed invariants.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .grid import IndexSetSpec, count_grid_points, hat_1d, lemma_count_bound
from .interpolant import SurplusTable, build_interpolant, eval_interpolant
from .nets import (
    FLOAT_PATH_MAX_DIM,
    assemble_full_net,
    basis_net_depth,
    basis_width_bound,
    build_sym_basis_net,
    decompose_full_net,
    default_delta,
    gadget_product_tree,
    net_forward_exact,
    paper_basis_width,
    product_tree_depth,
    subnet_width_bound,
)
from .quadrature import QuadratureSpec, default_quadrature, norm_diff, separable_norm_diff
from .symmetry import canonical_orbits
from .targets import BUILTIN_NAMES, TargetFunction, builtin_target
from .verify import (
    basis_table,
    exact_values,
    h1_distance,
    min_flagged_argument,
    permutation_gap,
    support_check,
)

COMMANDS = ("counts", "rates", "net-verify", "gradient-fit")
COUNT_MAX_DIM = 16
PERMUTATION_TOL = 1e-10
DECOMPOSITION_TOL = 1e-10
SUPPORT_TOL = 1e-14
NONNEG_TOL = 1e-12
SYMMETRY_TOL = 1e-12
CONTRACTION = (0.6, 0.8)


class ConfigError(ValueError):
    """Invalid experiment configuration (a usage error)."""


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    d: tuple = (2,)
    n_min: int = 1
    n_max: int = 4
    target: str = "prod_sine"
    delta: Optional[float] = None
    quad: str = "auto"
    samples: tuple = (100, 1000, 10000)
    noise: tuple = (0.1,)
    seed: int = 0
    out: Optional[str] = None
    source: str = "target"
    seeds: int = 10
    check_points: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "d", tuple(int(v) for v in np.atleast_1d(self.d)))
        object.__setattr__(self, "samples", tuple(int(v) for v in np.atleast_1d(self.samples)))
        object.__setattr__(self, "noise", tuple(float(v) for v in np.atleast_1d(self.noise)))
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if not self.d or min(self.d) < 1:
            raise ConfigError("dimensions must be >= 1")
        cap = COUNT_MAX_DIM if self.command == "counts" else FLOAT_PATH_MAX_DIM
        if max(self.d) > cap:
            raise ConfigError(f"{self.command} supports d <= {cap}, got {max(self.d)}")
        if not 1 <= self.n_min <= self.n_max:
            raise ConfigError(f"need 1 <= n-min <= n-max, got {self.n_min}, {self.n_max}")
        if self.target not in BUILTIN_NAMES:
            raise ConfigError(f"unknown target {self.target!r}; expected one of {BUILTIN_NAMES}")
        if self.delta is not None and not 0.0 < self.delta < 0.5:
            raise ConfigError("delta must lie in (0, 1/2)")
        if self.quad not in ("auto", "tensor", "qmc"):
            raise ConfigError(f"unknown quadrature {self.quad!r}")
        if any(m < 1 for m in self.samples) or any(eta < 0 for eta in self.noise):
            raise ConfigError("sample counts must be positive and noise levels nonnegative")
        if self.source not in ("target", "interpolant"):
            raise ConfigError(f"unknown gradient-fit source {self.source!r}")
        if self.seeds < 1 or self.check_points < 1:
            raise ConfigError("seeds and check points must be positive")

    @property
    def n_range(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    header: tuple
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    footer: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _quad_spec(cfg: ExperimentConfig, d: int, cell_level: int) -> QuadratureSpec:
    if cfg.quad == "tensor":
        return QuadratureSpec("tensor", cell_level, 3, seed=cfg.seed)
    if cfg.quad == "qmc":
        return QuadratureSpec("qmc", cell_level, sample_count=1 << 16, seed=cfg.seed)
    return default_quadrature(d, cell_level, seed=cfg.seed)


def interpolant_error(f: TargetFunction, table: SurplusTable, spec: QuadratureSpec):
    """Error report of ``f - table``; the separable evaluation of the tensor rule when possible."""
    if spec.mode == "tensor" and f.factors is not None:
        return separable_norm_diff(f, table, spec)
    return norm_diff(f, table, spec)


# ---------------------------------------------------------------------------
# counts


def run_counts(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(("d", "n", "v_grid", "x_grid", "x_sym_grid", "lemma_bound", "bound_ok"))
    for d in cfg.d:
        for n in cfg.n_range:
            v = count_grid_points(IndexSetSpec("total_degree", n, d))
            x = count_grid_points(IndexSetSpec("energy", n, d))
            xs = count_grid_points(IndexSetSpec("energy", n, d), symmetric=True)
            bound = lemma_count_bound(n, d)
            ok = x <= bound
            res.rows.append((d, n, v, x, xs, f"{bound:.6f}", int(ok)))
            if not ok:
                res.failures.append(f"d={d} n={n}: |X-grid| {x} exceeds bound {bound:.3f}")
            if not xs <= x <= v:
                res.failures.append(f"d={d} n={n}: inclusion order violated ({xs}, {x}, {v})")
    return res


# ---------------------------------------------------------------------------
# rates


def rate_constant(f: TargetFunction) -> float:
    """Explicit constant ``C`` in ``||f - f_n^(2)||_E <= C 2**-n``."""
    d = f.d
    return 2.0 * d * f.seminorm_2_2 / (math.sqrt(3.0) * 6.0 ** (d - 1)) * (0.5 + 2.5 ** (d - 1))


def _slope(ns, errs) -> Optional[float]:
    pts = [(n, math.log2(e)) for n, e in zip(ns, errs) if e is not None and e > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


NET_POINT_CAP = 1_000_000
# fidelity runs four assembled nets; d=3, n=4 needs ~3e6 points (~3 min each)
FIDELITY_POINT_CAP = 4_000_000


def _net_quadrature_size(net, cell_level: int) -> int:
    sizes = []
    for bps in net.axis_breakpoints():
        edges = np.unique(np.concatenate([np.linspace(0, 1, 2**cell_level + 1), bps[(bps > 0) & (bps < 1)]]))
        sizes.append(3 * (len(edges) - 1))
    return math.prod(sizes)


def run_rates(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(
        (
            "d",
            "n",
            "m",
            "e1_energy",
            "e2_energy",
            "e2_sym_energy",
            "net_energy",
            "net_to_interpolant",
            "e2_times_m",
            "e2_times_2n",
            "rate_bound",
        )
    )
    per_d = {}
    for d in cfg.d:
        f = builtin_target(cfg.target, d)
        bound = rate_constant(f)
        cols = {"n": [], "e1": [], "e2": [], "e2s": [], "net": []}
        for n in cfg.n_range:
            t1 = build_interpolant(f, IndexSetSpec("total_degree", n, d))
            t2 = build_interpolant(f, IndexSetSpec("energy", n, d))
            t2s = build_interpolant(f, IndexSetSpec("energy", n, d), symmetric=True)
            level = max(t1.finest_level, t2.finest_level, 10 if f.factors is not None else 1)
            spec = _quad_spec(cfg, d, level)
            e1 = interpolant_error(f, t1, spec).energy
            e2 = interpolant_error(f, t2, spec).energy
            e2s = interpolant_error(f, t2s, spec).energy
            if abs(e2 - e2s) > SYMMETRY_TOL * max(1.0, e2):
                res.failures.append(f"d={d} n={n}: symmetric and plain errors differ ({e2!r} vs {e2s!r})")
            m = len(t2s)
            net_e = gap = None
            if len(t2s):
                net = assemble_full_net(t2s, cfg.delta)
                cell = max(t2s.finest_level, 1)
                if d <= 3 and _net_quadrature_size(net, cell) <= NET_POINT_CAP:
                    q = QuadratureSpec("tensor", cell, 3)
                    net_e = norm_diff(f, net, q).energy
                    gap = norm_diff(net, t2s, q).energy
                    if abs(net_e - e2s) > gap + 1e-9 * max(1.0, e2s):
                        res.failures.append(f"d={d} n={n}: triangle inequality violated for the network error")
            res.rows.append((d, n, m, e1, e2, e2s, net_e, gap, e2 * m, e2 * 2**n, bound))
            if e2 * 2**n > bound:
                res.failures.append(f"d={d} n={n}: e*2^n = {e2 * 2**n:.4g} exceeds the rate constant {bound:.4g}")
            for key, v in zip(("n", "e1", "e2", "e2s", "net"), (n, e1, e2, e2s, net_e)):
                cols[key].append(v)
        ratios = [a / b for a, b in zip(cols["e2"], cols["e2"][1:])]
        per_d[d] = {
            "slope_e1": _slope(cols["n"], cols["e1"]),
            "slope_e2": _slope(cols["n"], cols["e2"]),
            "slope_e2_sym": _slope(cols["n"], cols["e2s"]),
            "slope_net": _slope(cols["n"], cols["net"]),
            "e2_ratios": ratios,
            "rate_bound": bound,
        }
        res.footer.append(
            f"# d={d} slopes(log2 error per n): e1={_fmt(per_d[d]['slope_e1'])} e2={_fmt(per_d[d]['slope_e2'])} "
            f"e2_sym={_fmt(per_d[d]['slope_e2_sym'])} net={_fmt(per_d[d]['slope_net'])}"
        )
    res.summary["per_d"] = per_d
    return res


def _fmt(v) -> str:
    return "nan" if v is None else f"{v:.4f}"


# ---------------------------------------------------------------------------
# net-verify


def _contraction_ok(errs: list[float]) -> bool:
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    return all(b <= a for a, b in zip(errs, errs[1:])) and all(CONTRACTION[0] <= r <= CONTRACTION[1] for r in ratios)


def _boundary_points(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.random((count, d))
    face = rng.integers(0, d, count)
    x[np.arange(count), face] = rng.integers(0, 2, count).astype(float)
    return x


def verify_dimension(cfg: ExperimentConfig, d: int, n: int, rng: np.random.Generator) -> tuple[dict, list]:
    failures = []
    f = builtin_target(cfg.target, d)
    table = build_interpolant(f, IndexSetSpec("energy", n, d), symmetric=True)
    delta = default_delta(n, table.finest_level) if cfg.delta is None else cfg.delta
    pts = cfg.check_points
    exact_pts = min(pts, 500)
    tree = gadget_product_tree(d)
    report: dict = {
        "d": d,
        "n": n,
        "delta": delta,
        "product_tree": {**tree.metadata, "depth_formula": product_tree_depth(d), "width_bound": 2 * d, "neuron_bound": 8 * d},
        "bases": [],
    }
    for orbit in canonical_orbits(table.spec):
        l, i = orbit.canonical_level, orbit.canonical_index
        net, rep = build_sym_basis_net(l, i, delta)
        supp = support_check(net, l, i, pts, rng)
        errs = [h1_distance(build_sym_basis_net(l, i, delta / 2**k)[0], basis_table(l, i)) for k in range(3)]
        lowest = min_flagged_argument(net, rng.random((exact_pts, d)))
        x = rng.random((exact_pts, d))
        pert = float(np.abs(np.asarray(net.forward(x)) - exact_values(net, x)).max())
        entry = {
            **rep.to_dict(),
            "measured_h1_distance": errs[0],
            "rounding_perturbation": pert,
            "support_violations": supp.exact_violations,
            "support_checked": supp.checked,
            "support_float_max_abs": supp.float_max_abs,
            "h1_along_halvings": errs,
            "min_flagged_argument": lowest,
            "permutation_gap": permutation_gap(net, pts, rng),
            "paper_width": paper_basis_width(d),
            "width_bound_enumerated_D": basis_width_bound(d, rep.D),
        }
        report["bases"].append(entry)
        tag = f"basis {l},{i}"
        if net.depth != basis_net_depth(d):
            failures.append(f"{tag}: depth {net.depth} != {basis_net_depth(d)}")
        if supp.exact_violations or supp.exact_max_abs > SUPPORT_TOL:
            failures.append(f"{tag}: {supp.exact_violations} support violations")
        if lowest is not None and lowest < -NONNEG_TOL:
            failures.append(f"{tag}: negative product input {lowest}")
        if entry["permutation_gap"] > PERMUTATION_TOL:
            failures.append(f"{tag}: permutation gap {entry['permutation_gap']:.3e} > {PERMUTATION_TOL}")
        if not _contraction_ok(errs):
            failures.append(f"{tag}: H1 distances {errs} do not contract within {CONTRACTION}")
        if errs[0] > rep.claimed_h1_error_bound:
            failures.append(f"{tag}: H1 distance {errs[0]:.4g} exceeds the claimed bound {rep.claimed_h1_error_bound:.4g}")

    full = assemble_full_net(table, delta)
    subnets = decompose_full_net(table, delta)
    x = rng.random((pts, d))
    total = np.asarray(full.forward(x))
    parts = sum(np.asarray(s.forward(x)) for s in subnets)
    xe = x[:exact_pts]
    exact_total = net_forward_exact(full, xe)
    exact_parts = sum(net_forward_exact(s, xe) for s in subnets)
    bx = _boundary_points(d, pts, rng)
    boundary_float = float(np.abs(full.forward(bx)).max())
    boundary_exact = float(max(abs(v) for v in net_forward_exact(full, bx[:exact_pts])))
    fid = None
    if _net_quadrature_size(full, max(table.finest_level, 1)) <= FIDELITY_POINT_CAP:
        fid = [h1_distance(assemble_full_net(table, delta / 2**k), table) for k in range(4)]
    full_report = {
        **full.metadata,
        "depth_formula": basis_net_depth(d),
        "basis_count": len(table),
        "subnet_count": len(subnets),
        "subnet_widths": sorted({s.width for s in subnets}),
        "subnet_width_bound": subnet_width_bound(d),
        "paper_subnet_width": 3 * d * d,
        "permutation_gap": permutation_gap(full, pts, rng),
        "decomposition_gap_float": float(np.abs(parts - total).max()),
        "decomposition_exact_equal": bool(all(a == b for a, b in zip(exact_total, exact_parts))),
        "boundary_max_abs_float": boundary_float,
        "boundary_max_abs_exact": boundary_exact,
        "h1_to_interpolant_along_halvings": fid,
    }
    report["full"] = full_report
    if full.depth != basis_net_depth(d):
        failures.append(f"full net: depth {full.depth} != {basis_net_depth(d)}")
    if any(s.depth != basis_net_depth(d) or s.width > subnet_width_bound(d) for s in subnets):
        failures.append("full net: a sub-network breaks the depth/width bound")
    if full_report["permutation_gap"] > PERMUTATION_TOL:
        failures.append(f"full net: permutation gap {full_report['permutation_gap']:.3e} > {PERMUTATION_TOL}")
    if full_report["decomposition_gap_float"] > DECOMPOSITION_TOL or not full_report["decomposition_exact_equal"]:
        failures.append(f"full net: decomposition gap {full_report['decomposition_gap_float']:.3e}")
    # the float value is reported; vanishing is a property of the exact network
    if boundary_exact > SUPPORT_TOL:
        failures.append(f"full net: boundary values {boundary_exact:.3e} (exact), {boundary_float:.3e} (float)")
    if fid is not None and not _contraction_ok(fid):
        failures.append(f"full net: H1 distances {fid} do not contract within {CONTRACTION}")
    return report, failures


def run_net_verify(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(("d", "n", "bases", "width", "depth", "neurons", "params", "permutation_gap", "h1_to_interpolant", "failures"))
    reports = []
    for d in cfg.d:
        for n in cfg.n_range:
            rng = np.random.default_rng([cfg.seed, d, n])
            rep, fails = verify_dimension(cfg, d, n, rng)
            reports.append(rep)
            full = rep["full"]
            fid = full["h1_to_interpolant_along_halvings"]
            res.rows.append((d, n, full["basis_count"], full["width"], full["depth"], full["neuron_count"], full["param_count"], full["permutation_gap"], None if fid is None else fid[0], len(fails)))
            res.failures.extend(f"d={d} n={n}: {msg}" for msg in fails)
    res.summary["reports"] = reports
    return res


# ---------------------------------------------------------------------------
# gradient-fit


def symmetric_gradient_features(orbits, x: np.ndarray) -> np.ndarray:
    """``grad psi_{l,i}(x)`` for every orbit, shape ``(len(x), d, len(orbits))``."""
    x = np.atleast_2d(x)
    N, d = x.shape
    out = np.zeros((N, d, len(orbits)))
    cache = {}

    def hat(s, lv, iv):
        key = (s, lv, iv)
        if key not in cache:
            cache[key] = hat_1d(x[:, s], lv, iv)
        return cache[key]

    for k, o in enumerate(orbits):
        for perm in itertools.permutations(range(d)):
            # term prod_nu phi_nu(x_{perm[nu]})
            vals = [hat(perm[nu], o.canonical_level[nu], o.canonical_index[nu]) for nu in range(d)]
            for nu in range(d):
                term = vals[nu][1].copy()
                for mu in range(d):
                    if mu != nu:
                        term = term * vals[mu][0]
                out[:, perm[nu], k] += term
    return out


def fit_gradient(orbits, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, int, float]:
    """Least-squares outer coefficients; returns ``(coeffs, rank, empirical loss)``."""
    feats = symmetric_gradient_features(orbits, x)
    A = feats.reshape(-1, len(orbits))
    b = y.reshape(-1)
    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    resid = A @ coef - b
    loss = float(resid @ resid) / len(x)
    return coef, int(rank), loss


def run_gradient_fit(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(("d", "n", "M", "noise", "seed", "rank", "basis_count", "empirical_loss", "energy_error", "coef_max_dev", "grad_sup"))
    summary = {}
    for d in cfg.d:
        f = builtin_target(cfg.target, d)
        for n in cfg.n_range:
            spec = IndexSetSpec("energy", n, d)
            orbits = canonical_orbits(spec)
            table = build_interpolant(f, spec, symmetric=True)
            ref = np.array([table.entries[(o.canonical_level, o.canonical_index)] for o in orbits])
            q = QuadratureSpec("tensor", max(table.finest_level, 10 if f.factors is not None else 1), 3)
            for eta in cfg.noise:
                curve = {}
                for M in cfg.samples:
                    errs = []
                    for s in range(cfg.seeds):
                        rng = np.random.default_rng([cfg.seed, d, n, M, s, int(round(eta * 1e9))])
                        x = rng.random((M, d))
                        clean = eval_interpolant(table, x)[1] if cfg.source == "interpolant" else f.grad(x)
                        y = clean + rng.uniform(-eta, eta, size=clean.shape)
                        if M < len(orbits):
                            res.rows.append((d, n, M, eta, s, None, len(orbits), None, None, None, None))
                            continue
                        coef, rank, loss = fit_gradient(orbits, x, y)
                        if rank < len(orbits):
                            res.rows.append((d, n, M, eta, s, rank, len(orbits), None, None, None, None))
                            continue
                        fitted = SurplusTable(spec, True, {(o.canonical_level, o.canonical_index): c for o, c in zip(orbits, coef)})
                        err = interpolant_error(f, fitted, q).energy
                        grad_sup = float(np.abs(eval_interpolant(fitted, x)[1]).max())
                        res.rows.append((d, n, M, eta, s, rank, len(orbits), loss, err, float(np.abs(coef - ref).max()), grad_sup))
                        errs.append(err)
                    curve[M] = float(np.mean(errs)) if errs else None
                key = f"d={d} n={n} noise={eta}"
                means = [curve[M] for M in cfg.samples if curve[M] is not None]
                summary[key] = {
                    "mean_energy_error": curve,
                    "monotone_in_M": all(b <= a for a, b in zip(means, means[1:])),
                    "interpolant_energy_error": interpolant_error(f, table, q).energy,
                }
                res.footer.append(f"# {key}: mean energy error by M = {curve}")
    res.summary["curves"] = summary
    return res


RUNNERS = {
    "counts": run_counts,
    "rates": run_rates,
    "net-verify": run_net_verify,
    "gradient-fit": run_gradient_fit,
}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.command](cfg)
