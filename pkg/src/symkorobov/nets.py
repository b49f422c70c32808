"""Squared-ReLU networks: a layered representation, gadgets and builders.

A :class:`SqReluNet` is a list of affine maps with ``sigma(z) = max(z, 0)**2``
between consecutive maps and nothing after the last one. Builders track every
weight as an exact rational (``gmpy2.mpq``) and round to the nearest double
only when the float layers are materialised, so the same object can be run
in floating point (:func:`net_forward`, :func:`net_gradient`) and in exact
arithmetic (:func:`net_forward_exact`).

Gadgets rely on nonnegative inputs:

* identity ``x = (sigma(x + 1) - sigma(x)) / 2 - 1/2`` (width 2),
* product ``xy = (sigma(x + y) - sigma(x) - sigma(y)) / 2`` (width 3).

Neurons whose argument must stay nonnegative are flagged; :func:`net_forward`
with ``check=True`` raises :class:`NonnegativityError` when one goes negative
beyond rounding.

Smoothing widths ``delta`` passed to the basis builders are in ``x`` units: the
dilated hat of level ``l`` uses ``h_{delta 2**l}(2**l x - i)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from gmpy2 import mpq
from scipy import sparse

from .grid import check_pair
from .symmetry import VandermondeCoefficients, is_canonical, vandermonde_coefficients

SCHEMA = "symkorobov.sqrelu-net/1"
FLOAT_PATH_MAX_DIM = 6
NONNEG_TOL = 1e-12

_ZERO = mpq(0)
_ONE = mpq(1)
_HALF = mpq(1, 2)
_EPS = np.finfo(float).eps


class NonnegativityError(ValueError):
    """A neuron that requires a nonnegative argument received a negative one."""


def sigma(z):
    m = np.maximum(z, 0.0)
    return m * m


def _to_mpq(v) -> mpq:
    if isinstance(v, Fraction):
        return mpq(v.numerator, v.denominator)
    return mpq(v)


def _round(q: mpq) -> float:
    # int / int is correctly rounded in Python, unlike mpq -> double truncation
    return int(q.numerator) / int(q.denominator)


@dataclass(frozen=True)
class ExactLayer:
    """Sparse rational affine map ``z = W h + b`` in coordinate form."""

    shape: tuple[int, int]
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    vals: tuple
    bias: tuple

    def to_float(self) -> tuple[sparse.csr_array, np.ndarray]:
        w = sparse.csr_array(
            (np.array([_round(v) for v in self.vals], dtype=float), (np.array(self.rows, dtype=np.int64), np.array(self.cols, dtype=np.int64))),
            shape=self.shape,
        )
        w.sum_duplicates()
        return w, np.array([_round(v) for v in self.bias], dtype=float)


@dataclass(frozen=True, eq=False)
class SqReluNet:
    """Layered squared-ReLU network.

    ``weights[k]`` has shape ``(out_k, in_k)``; ``nonneg[k]`` flags the
    neurons of hidden layer ``k`` whose argument must be nonnegative.
    ``exact`` holds the rational layers when the net came from a builder.
    """

    weights: tuple
    biases: tuple
    nonneg: tuple = ()
    exact: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.weights:
            raise ValueError("a network needs at least one affine map")
        ws = tuple(sparse.csr_array(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float).reshape(-1) for b in self.biases)
        if len(ws) != len(bs):
            raise ValueError("weights and biases differ in length")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {k}: weight rows {w.shape[0]} != bias length {b.shape[0]}")
            if k and w.shape[1] != ws[k - 1].shape[0]:
                raise ValueError(f"layer {k}: input size {w.shape[1]} != previous output size {ws[k - 1].shape[0]}")
        nonneg = self.nonneg or tuple(np.zeros(w.shape[0], dtype=bool) for w in ws[:-1])
        nonneg = tuple(np.asarray(m, dtype=bool).reshape(-1) for m in nonneg)
        if len(nonneg) != len(ws) - 1 or any(m.shape[0] != w.shape[0] for m, w in zip(nonneg, ws)):
            raise ValueError("nonneg masks must match the hidden layer sizes")
        if self.exact is not None and len(self.exact) != len(ws):
            raise ValueError("exact layers do not match the float layers")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "nonneg", nonneg)

    # -- architecture -----------------------------------------------------

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def d(self) -> int:
        return self.input_dim

    @property
    def hidden_sizes(self) -> list[int]:
        return [w.shape[0] for w in self.weights[:-1]]

    @property
    def depth(self) -> int:
        return len(self.weights) - 1

    @property
    def width(self) -> int:
        return max(self.hidden_sizes, default=0)

    @property
    def neuron_count(self) -> int:
        return sum(self.hidden_sizes)

    @property
    def param_count(self) -> int:
        return int(sum(w.count_nonzero() for w in self.weights) + sum(np.count_nonzero(b) for b in self.biases))

    @property
    def metadata(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "width": self.width,
            "depth": self.depth,
            "neuron_count": self.neuron_count,
            "param_count": self.param_count,
        }

    @property
    def finest_level(self) -> int:
        return 0

    # -- evaluation -------------------------------------------------------

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.input_dim:
            raise ValueError(f"input dimension {pts.shape[1]} does not match network input {self.input_dim}")
        return pts, x.ndim == 1

    def _preactivations(self, pts: np.ndarray, check: bool) -> list[np.ndarray]:
        zs = []
        h = pts
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = (w @ h.T).T + b
            zs.append(z)
            if k == len(self.weights) - 1:
                break
            if check and self.nonneg[k].any():
                self._assert_nonneg(k, w, b, h, z)
            h = sigma(z)
        return zs

    def _assert_nonneg(self, k, w, b, h, z) -> None:
        mask = self.nonneg[k]
        # forward error bound of the dot products feeding the flagged neurons
        nnz = np.diff(w.indptr).max(initial=0) + 3
        scale = (abs(w) @ np.abs(h).T).T + np.abs(b)
        tol = NONNEG_TOL + nnz * _EPS * scale[:, mask]
        bad = z[:, mask] < -tol
        if bad.any():
            raise NonnegativityError(f"layer {k}: flagged neuron argument {z[:, mask][bad].min():.3e} is negative")

    def forward(self, x, check: bool = False):
        pts, single = self._check_input(x)
        out = self._preactivations(pts, check)[-1]
        if self.output_dim == 1:
            out = out[:, 0]
        return out[0] if single else out

    def value_and_grad(self, x):
        """Output and input gradient by reverse mode, ``sigma'(z) = 2 max(z, 0)``."""
        if self.output_dim != 1:
            raise ValueError("gradients are defined for scalar-output networks")
        pts, single = self._check_input(x)
        zs = self._preactivations(pts, False)
        g = np.broadcast_to(self.weights[-1].toarray()[0], (pts.shape[0], self.weights[-1].shape[1]))
        for k in range(self.depth - 1, -1, -1):
            g = g * (2.0 * np.maximum(zs[k], 0.0))
            g = (self.weights[k].T @ g.T).T
        value = zs[-1][:, 0]
        if single:
            return value[0], g[0]
        return value, np.asarray(g)

    def axis_breakpoints(self) -> list[np.ndarray]:
        """Kinks of the first hidden layer along each input axis.

        Only first-layer neurons reading a single input are kinks aligned
        with an axis; flagged (nonnegative) neurons of deeper layers are
        smooth by construction.
        """
        w, b = self.weights[0], self.biases[0]
        out = [[] for _ in range(self.input_dim)]
        if self.depth == 0:
            return [np.zeros(0) for _ in out]
        for r in range(w.shape[0]):
            lo, hi = w.indptr[r], w.indptr[r + 1]
            if hi - lo == 1 and w.data[lo] != 0.0:
                out[w.indices[lo]].append(-b[r] / w.data[lo])
        return [np.unique(np.array(v, dtype=float)) for v in out]

    # -- serialisation ----------------------------------------------------

    def to_json(self) -> str:
        layers = [{"weights": w.toarray().tolist(), "bias": b.tolist()} for w, b in zip(self.weights, self.biases)]
        return json.dumps(
            {
                "schema": SCHEMA,
                "layers": layers,
                "nonneg": [m.astype(int).tolist() for m in self.nonneg],
                "metadata": self.metadata,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SqReluNet":
        data = json.loads(text)
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported network schema {data.get('schema')!r}; expected {SCHEMA!r}")
        ws = [np.array(layer["weights"], dtype=float).reshape(len(layer["bias"]), -1) for layer in data["layers"]]
        bs = [np.array(layer["bias"], dtype=float) for layer in data["layers"]]
        net = cls(tuple(ws), tuple(bs), tuple(np.array(m, dtype=bool) for m in data["nonneg"]))
        if net.metadata != data["metadata"]:
            raise ValueError(f"metadata block {data['metadata']} does not match the layers {net.metadata}")
        return net


def net_forward(net: SqReluNet, x, check: bool = False):
    return net.forward(x, check=check)


def net_gradient(net: SqReluNet, x):
    return net.value_and_grad(x)[1]


def net_forward_exact(net: SqReluNet, x, record_nonneg: bool = False):
    """Evaluate the rational layers exactly at (float) points ``x``.

    Returns an object array of ``mpq`` values; with ``record_nonneg`` also the
    smallest argument seen at a flagged neuron (``None`` if none is flagged).
    """
    if net.exact is None:
        raise ValueError("network carries no exact layers")
    pts, single = net._check_input(x)
    h = np.empty((pts.shape[1], pts.shape[0]), dtype=object)
    for s in range(pts.shape[1]):
        h[s] = [mpq(float(v)) for v in pts[:, s]]
    lowest = None
    last = len(net.exact) - 1
    for k, layer in enumerate(net.exact):
        z = np.empty((layer.shape[0], pts.shape[0]), dtype=object)
        for r in range(layer.shape[0]):
            z[r] = layer.bias[r]
        for r, c, v in zip(layer.rows, layer.cols, layer.vals):
            z[r] = z[r] + v * h[c]
        if k == last:
            h = z
            break
        mask = net.nonneg[k]
        if record_nonneg and mask.any():
            m = min(z[mask].ravel())
            lowest = m if lowest is None else min(lowest, m)
        h = np.where(z > 0, z, _ZERO)
        h = h * h
    out = h[0] if net.output_dim == 1 else h.T
    out = out[0] if single else out
    return (out, lowest) if record_nonneg else out


# ---------------------------------------------------------------------------
# exact construction


def _add_form(a: dict, b: dict, scale=_ONE) -> dict:
    out = dict(a)
    for key, v in b.items():
        out[key] = out.get(key, _ZERO) + scale * v
    return out


class _Builder:
    """Layer-by-layer construction over exact linear forms.

    ``values`` are the quantities available to the next layer, each a linear
    form ``(coeffs over current activations, constant)``; before the first
    layer they are the raw inputs.
    """

    def __init__(self, d: int):
        self.d = d
        self.layers: list[ExactLayer] = []
        self.masks: list[np.ndarray] = []
        self.width_in = d
        self.values = [({s: _ONE}, _ZERO) for s in range(d)]

    def layer(self, neurons, outputs, nonneg) -> None:
        """Append a hidden layer.

        ``neurons`` are ``(form over values, shift)`` pairs, ``outputs`` are
        ``(form over the new neurons, constant)`` pairs that become the new
        values, and ``nonneg`` flags each neuron.
        """
        rows, cols, vals, bias = [], [], [], []
        for r, (form, shift) in enumerate(neurons):
            acc: dict = {}
            b = _to_mpq(shift)
            for v, a in form.items():
                vf, vc = self.values[v]
                acc = _add_form(acc, vf, a)
                b += a * vc
            for c in sorted(acc):
                if acc[c] != 0:
                    rows.append(r)
                    cols.append(c)
                    vals.append(acc[c])
            bias.append(b)
        self.layers.append(ExactLayer((len(neurons), self.width_in), tuple(rows), tuple(cols), tuple(vals), tuple(bias)))
        self.masks.append(np.asarray(nonneg, dtype=bool).reshape(len(neurons)))
        self.width_in = len(neurons)
        self.values = [(dict(f), _to_mpq(c)) for f, c in outputs]

    def finish(self, form: dict, const=_ZERO) -> SqReluNet:
        acc: dict = {}
        b = _to_mpq(const)
        for v, a in form.items():
            vf, vc = self.values[v]
            acc = _add_form(acc, vf, a)
            b += a * vc
        keys = [c for c in sorted(acc) if acc[c] != 0]
        final = ExactLayer((1, self.width_in), (0,) * len(keys), tuple(keys), tuple(acc[c] for c in keys), (b,))
        return _materialise(self.layers + [final], self.masks)


def _materialise(layers: list[ExactLayer], masks) -> SqReluNet:
    floats = [layer.to_float() for layer in layers]
    return SqReluNet(tuple(f[0] for f in floats), tuple(f[1] for f in floats), tuple(masks), tuple(layers))


class _Layer:
    """Neuron/output accumulator for one hidden layer."""

    def __init__(self):
        self.neurons: list = []
        self.outputs: list = []
        self.flags: list = []

    def neuron(self, form: dict, shift, nonneg: bool) -> int:
        self.neurons.append((form, shift))
        self.flags.append(nonneg)
        return len(self.neurons) - 1

    def output(self, form: dict, const=_ZERO) -> int:
        self.outputs.append((form, const))
        return len(self.outputs) - 1

    def identity(self, u: dict) -> int:
        a = self.neuron(u, _ONE, True)
        b = self.neuron(u, _ZERO, True)
        return self.output({a: _HALF, b: -_HALF}, -_HALF)

    def product(self, u: dict, v: dict) -> int:
        a = self.neuron(_add_form(u, v), _ZERO, True)
        b = self.neuron(u, _ZERO, True)
        c = self.neuron(v, _ZERO, True)
        return self.output({a: _HALF, b: -_HALF, c: -_HALF})

    def hat(self, value: int, scale: mpq, centre: mpq, dr: mpq) -> int:
        """``h_dr(scale * x - centre)`` of input value ``value``; six neurons."""
        offsets = (1 - dr, 1 - 2 * dr, _ZERO, -dr, -1 + dr, -_ONE)
        coeffs = (1, -1, -2, 2, 1, -1)
        idx = [self.neuron({value: scale}, off - centre, False) for off in offsets]
        return self.output({k: c / (2 * dr) for k, c in zip(idx, coeffs)})

    def commit(self, builder: _Builder) -> None:
        builder.layer(self.neurons, self.outputs, self.flags)


def _tree_layers(builder: _Builder, groups: list[list[dict]]) -> list[int]:
    """Append product-tree layers computing ``prod`` of each group of forms.

    All groups share the same length ``d``. The first layer performs
    ``d - 2**floor(log2 d)`` adjacent products and passes the rest through
    identity blocks; the following layers form a perfect binary tree.
    """
    d = len(groups[0])
    k = 1 << (d.bit_length() - 1)
    i = d - k
    layer = _Layer()
    current = []
    for forms in groups:
        out = [layer.product(forms[2 * q], forms[2 * q + 1]) for q in range(i)]
        out += [layer.identity(u) for u in forms[2 * i :]]
        current.append(out)
    layer.commit(builder)
    while len(current[0]) > 1:
        layer = _Layer()
        current = [[layer.product({a: _ONE}, {b: _ONE}) for a, b in zip(g[::2], g[1::2])] for g in current]
        layer.commit(builder)
    return [g[0] for g in current]


# ---------------------------------------------------------------------------
# gadgets


def gadget_identity() -> SqReluNet:
    """``x`` on ``x >= 0``; width 2."""
    b = _Builder(1)
    layer = _Layer()
    out = layer.identity({0: _ONE})
    layer.commit(b)
    return b.finish({out: _ONE})


def gadget_square() -> SqReluNet:
    """``x**2 = sigma(x) + sigma(-x)`` on the whole line; width 2."""
    b = _Builder(1)
    layer = _Layer()
    p = layer.neuron({0: _ONE}, _ZERO, False)
    m = layer.neuron({0: -_ONE}, _ZERO, False)
    out = layer.output({p: _ONE, m: _ONE})
    layer.commit(b)
    return b.finish({out: _ONE})


def gadget_product() -> SqReluNet:
    """``x * y`` on the nonnegative quadrant; width 3."""
    b = _Builder(2)
    layer = _Layer()
    out = layer.product({0: _ONE}, {1: _ONE})
    layer.commit(b)
    return b.finish({out: _ONE})


def gadget_product_tree(d: int) -> SqReluNet:
    """``prod_s x_s`` on the nonnegative orthant.

    Depth ``floor(log2 d) + 1``, width at most ``2d``, fewer than ``8d`` neurons.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    b = _Builder(d)
    (out,) = _tree_layers(b, [[{s: _ONE} for s in range(d)]])
    net = b.finish({out: _ONE})
    _assert_architecture(net, depth=product_tree_depth(d), width=2 * d, neurons_below=8 * d)
    return net


def _check_delta(delta) -> mpq:
    delta = float(delta)
    if not 0.0 < delta < 1.0 or not math.isfinite(delta):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return mpq(delta)


def gadget_s_delta(delta: float) -> SqReluNet:
    """``S_delta(x) = (sigma(x) - sigma(x - delta)) / (2 delta)``."""
    dq = _check_delta(delta)
    b = _Builder(1)
    layer = _Layer()
    p = layer.neuron({0: _ONE}, _ZERO, False)
    q = layer.neuron({0: _ONE}, -dq, False)
    out = layer.output({p: 1 / (2 * dq), q: -1 / (2 * dq)})
    layer.commit(b)
    return b.finish({out: _ONE})


def h_delta(y, delta: float) -> np.ndarray:
    """Closed form of the smoothed hat on the reference interval."""
    y = np.asarray(y, dtype=float)

    def s(z):
        return (sigma(z) - sigma(z - delta)) / (2.0 * delta)

    return s(y + 1.0 - delta) - 2.0 * s(y) + s(y - 1.0 + delta)


def h_delta_slope(y, delta: float) -> np.ndarray:
    """Derivative of :func:`h_delta`; ``S_delta'(z) = clip(z, 0, delta) / delta``."""
    y = np.asarray(y, dtype=float)

    def ds(z):
        return np.clip(z, 0.0, delta) / delta

    return ds(y + 1.0 - delta) - 2.0 * ds(y) + ds(y - 1.0 + delta)


def _assert_hat_nonneg(dr: float) -> None:
    ys = np.concatenate([np.linspace(-1.0, 1.0, 4097), [-1 + dr, -1 + 2 * dr, 0.0, dr, 1 - dr]])
    vals = h_delta(ys, dr)
    if vals.min() < -1e-12:
        raise ValueError(f"smoothed hat with delta={dr} takes negative values ({vals.min():.3e}); choose a smaller delta")


def gadget_h_delta(delta: float) -> SqReluNet:
    """``h_delta(x) = S(x + 1 - delta) - 2 S(x) + S(x - 1 + delta)``; six neurons."""
    dq = _check_delta(delta)
    _assert_hat_nonneg(float(delta))
    b = _Builder(1)
    layer = _Layer()
    out = layer.hat(0, _ONE, _ZERO, dq)
    layer.commit(b)
    return b.finish({out: _ONE})


# ---------------------------------------------------------------------------
# symmetric basis networks


def product_tree_depth(d: int) -> int:
    return d.bit_length()  # floor(log2 d) + 1


def basis_net_depth(d: int) -> int:
    return product_tree_depth(d) + 1


def paper_basis_width(d: int) -> int:
    """Width ``3 d**3 (2**(d-1) - 1)`` as stated for a basis network."""
    return 3 * d**3 * (2 ** (d - 1) - 1)


def basis_width_bound(d: int, D: int) -> int:
    """The stated width ``3 d**2`` per node times the enumerated node count ``D``."""
    return 3 * d * d * D


def default_delta(n: int, finest_level: int) -> float:
    """``2**-(n+6)`` times the smallest mesh width ``2**-finest_level``."""
    return 2.0 ** -(n + 6 + finest_level)


def _distinct_hats(l, i) -> list[tuple[int, int]]:
    return sorted(set(zip(l, i)))


def _check_basis_delta(l, delta: float) -> mpq:
    dq = _check_delta(delta)
    finest = max(l)
    dr = float(delta) * 2.0**finest
    if dr > 0.5:
        raise ValueError(f"delta={delta} is too large for mesh width 2**-{finest}; need delta <= 2**-{finest + 1}")
    for lv in set(l):
        _assert_hat_nonneg(float(delta) * 2.0**lv)
    return dq


def _feature_layer(builder: _Builder, hats, dq: mpq) -> dict:
    """Shared first layer: one smoothed hat per (coordinate, distinct pair)."""
    layer = _Layer()
    where = {}
    for s in range(builder.d):
        for lv, iv in hats:
            scale = mpq(2) ** lv
            where[(s, (lv, iv))] = layer.hat(s, scale, mpq(iv), dq * scale)
    layer.commit(builder)
    return where


def _feature_weights(l, i, xi: int) -> dict:
    out: dict = {}
    for j, p in enumerate(zip(l, i)):
        out[p] = out.get(p, 0) + xi ** (2**j)
    return out


def build_coordinate_feature(l, i, xi: int, delta: float) -> SqReluNet:
    """1-input net for ``sum_j xi**(2**(j-1)) * phi~_{l_j, i_j}(x)``; depth 1.

    Equal pairs ``(l_j, i_j)`` share their six neurons, so the width is at
    most ``6d``.
    """
    l, i = check_pair(l, i)
    if xi < 1:
        raise ValueError(f"xi must be >= 1, got {xi}")
    dq = _check_basis_delta(l, delta)
    hats = _distinct_hats(l, i)
    b = _Builder(1)
    where = _feature_layer(b, hats, dq)
    weights = _feature_weights(l, i, xi)
    net = b.finish({where[(0, p)]: mpq(weights[p]) for p in hats})
    _assert_architecture(net, depth=1, width=6 * len(l))
    return net


@dataclass(frozen=True)
class NetBuildReport:
    """Build record of one symmetric basis network.

    ``claimed_h1_error_bound`` is ``d! d (d+1) M**(d-1) delta_1`` with
    ``delta_1`` the largest 1D ``H^1`` error of a smoothed hat and ``M`` the
    largest 1D ``H^1`` norm of a hat or its smoothed version: the exact
    network equals the orbit sum of products of smoothed hats, so the product
    perturbation bound applies to each of the ``d!`` terms.
    """

    level: tuple
    index: tuple
    delta: float
    D: int
    claimed_h1_error_bound: float
    width: int
    depth: int
    neuron_count: int
    param_count: int
    rounding_perturbation: Optional[float] = None
    measured_h1_distance: Optional[float] = None
    support_violations: Optional[int] = None

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if self.delta >= 2.0 ** -max(self.level):
            raise ValueError("delta must be smaller than the smallest mesh width")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def _hat_h1_errors(hats, delta: float) -> tuple[float, float]:
    """Largest ``||h~ - phi||_{H^1(0,1)}`` and largest H^1 norm of either."""
    g, w = np.polynomial.legendre.leggauss(3)
    err, norm = 0.0, 0.0
    for lv, iv in hats:
        h = 2.0**-lv
        dr = delta / h
        ref = np.array([-1.0, -1 + dr, -1 + 2 * dr, 0.0, dr, 1 - dr, 1.0])
        edges = (iv + ref) * h
        a, b_ = edges[:-1], edges[1:]
        x = (a[:, None] + (g + 1.0) * (b_ - a)[:, None] / 2.0).ravel()
        wx = (w * (b_ - a)[:, None] / 2.0).ravel()
        y = x / h - iv
        phi = np.maximum(1.0 - np.abs(y), 0.0)
        dphi = np.where(y < 0, 1.0, -1.0) / h
        sm = h_delta(y, dr)
        dsm = h_delta_slope(y, dr) / h
        err = max(err, math.sqrt(wx @ ((sm - phi) ** 2 + (dsm - dphi) ** 2)))
        norm = max(norm, math.sqrt(wx @ (phi**2 + dphi**2)), math.sqrt(wx @ (sm**2 + dsm**2)))
    return err, norm


def _symmetric_net(l, i, dq: mpq, nodes: Sequence[int], out_coeffs: Sequence) -> SqReluNet:
    d = len(l)
    hats = _distinct_hats(l, i)
    b = _Builder(d)
    where = _feature_layer(b, hats, dq)
    groups = []
    for xi in nodes:
        weights = _feature_weights(l, i, xi)
        groups.append([{where[(s, p)]: mpq(weights[p]) for p in hats} for s in range(d)])
    outs = _tree_layers(b, groups)
    return b.finish({o: _to_mpq(c) for o, c in zip(outs, out_coeffs)})


def _coefficients_for(d: int, coeffs: Optional[VandermondeCoefficients]) -> VandermondeCoefficients:
    if d > FLOAT_PATH_MAX_DIM:
        raise ValueError(f"network synthesis supports d <= {FLOAT_PATH_MAX_DIM}, got {d}")
    if coeffs is None:
        return vandermonde_coefficients(d)
    if not isinstance(coeffs, VandermondeCoefficients) or coeffs.d != d:
        raise ValueError(f"coefficient object does not belong to dimension {d}")
    return coeffs


def build_sym_basis_net(l, i, delta: float, coeffs: Optional[VandermondeCoefficients] = None) -> tuple[SqReluNet, NetBuildReport]:
    """Network for the symmetric basis function of the canonical pair ``(l, i)``.

    One shared feature layer, ``D`` product trees (one per node ``xi``) and
    an output layer with the Vandermonde weights ``a_xi``.
    """
    l, i = check_pair(l, i)
    if not is_canonical(l, i):
        raise ValueError(f"pair {(l, i)} is not canonical")
    d = len(l)
    coeffs = _coefficients_for(d, coeffs)
    dq = _check_basis_delta(l, delta)
    net = _symmetric_net(l, i, dq, range(1, coeffs.D + 1), coeffs.a)
    bound = basis_width_bound(d, coeffs.D) if d >= 2 else 6
    _assert_architecture(net, depth=basis_net_depth(d), width=bound)
    err1, m = _hat_h1_errors(_distinct_hats(l, i), float(delta))
    claimed = math.factorial(d) * d * (d + 1) * m ** (d - 1) * err1
    report = NetBuildReport(l, i, float(delta), coeffs.D, claimed, net.width, net.depth, net.neuron_count, net.param_count)
    return net, report


def parallel_sum(nets: Sequence[SqReluNet], coeffs: Sequence) -> SqReluNet:
    """One network computing ``sum_k c_k net_k``; all nets share depth and input."""
    nets = list(nets)
    if not nets:
        raise ValueError("parallel_sum needs at least one network")
    depth, d = nets[0].depth, nets[0].input_dim
    if any(n.depth != depth or n.input_dim != d or n.output_dim != 1 for n in nets):
        raise ValueError("parallel composition needs scalar nets of equal depth and input size")
    if any(n.exact is None for n in nets):
        raise ValueError("parallel composition needs exact layers")
    layers = []
    for k in range(depth + 1):
        rows, cols, vals, bias = [], [], [], []
        row_off = col_off = 0
        last = k == depth
        for net, c in zip(nets, coeffs):
            layer = net.exact[k]
            c = _to_mpq(c)
            for r, cc, v in zip(layer.rows, layer.cols, layer.vals):
                rows.append(r if last else r + row_off)
                cols.append(cc + (col_off if k else 0))
                vals.append(c * v if last else v)
            if last:
                bias.append(c * layer.bias[0])
            else:
                bias.extend(layer.bias)
            row_off += layer.shape[0]
            col_off += layer.shape[1]
        if last:
            total = sum(bias, _ZERO)
            layers.append(ExactLayer((1, col_off), tuple(rows), tuple(cols), tuple(vals), (total,)))
        else:
            layers.append(ExactLayer((row_off, col_off if k else d), tuple(rows), tuple(cols), tuple(vals), tuple(bias)))
    masks = [np.concatenate([n.nonneg[k] for n in nets]) for k in range(depth)]
    return _materialise(layers, masks)


def zero_net(d: int) -> SqReluNet:
    layer = ExactLayer((1, d), (), (), (), (_ZERO,))
    return _materialise([layer], [])


def _table_delta(table, delta: Optional[float]) -> float:
    return default_delta(table.spec.n, table.finest_level) if delta is None else float(delta)


def assemble_full_net(table, delta: Optional[float] = None) -> SqReluNet:
    """``sum v~_{l,i} psi~_{l,i}`` over a symmetric surplus table as one network."""
    if not table.symmetric:
        raise ValueError("assemble_full_net needs a symmetric surplus table")
    d = table.d
    if not table.entries:
        return zero_net(d)
    delta = _table_delta(table, delta)
    coeffs = _coefficients_for(d, None)
    items = sorted(table.entries.items())
    nets = [build_sym_basis_net(l, i, delta, coeffs)[0] for (l, i), _ in items]
    net = parallel_sum(nets, [v for _, v in items])
    _assert_architecture(net, depth=basis_net_depth(d))
    return net


def decompose_full_net(table, delta: Optional[float] = None) -> list[SqReluNet]:
    """Sub-networks ``v~ a_xi prod_s u~_xi(x_s)``, one per (basis, node); they sum to the full net.

    Each has its own feature layer (at most ``6 d**2`` neurons) and product
    tree, and depth ``floor(log2 d) + 2``.
    """
    if not table.symmetric:
        raise ValueError("decomposition needs a symmetric surplus table")
    d = table.d
    delta = _table_delta(table, delta)
    coeffs = _coefficients_for(d, None)
    out = []
    for (l, i), v in sorted(table.entries.items()):
        dq = _check_basis_delta(l, delta)
        for xi, a in zip(range(1, coeffs.D + 1), coeffs.a):
            net = _symmetric_net(l, i, dq, [xi], [_to_mpq(v) * _to_mpq(a)])
            _assert_architecture(net, depth=basis_net_depth(d), width=subnet_width_bound(d))
            out.append(net)
    return out


def subnet_width_bound(d: int) -> int:
    """Six neurons per smoothed hat, ``d`` hats per coordinate: ``6 d**2``."""
    return 6 * d * d


def _assert_architecture(net: SqReluNet, depth: int, width: Optional[int] = None, neurons_below: Optional[int] = None) -> None:
    if net.depth != depth:
        raise AssertionError(f"network depth {net.depth} != {depth}")
    if width is not None and net.width > width:
        raise AssertionError(f"network width {net.width} exceeds {width}")
    if neurons_below is not None and not net.neuron_count < neurons_below:
        raise AssertionError(f"network has {net.neuron_count} neurons, expected fewer than {neurons_below}")
