"""Symmetric sparse-grid approximation of Korobov functions and its squared-ReLU network realisation."""
from .grid import IndexSetSpec, count_grid_points, hat_eval, index_set, lemma_count_bound
from .interpolant import SurplusTable, build_interpolant, eval_interpolant, surplus_integral, surplus_stencil
from .nets import (
    NetBuildReport,
    SqReluNet,
    assemble_full_net,
    build_coordinate_feature,
    build_sym_basis_net,
    decompose_full_net,
    gadget_h_delta,
    gadget_product_tree,
    gadget_s_delta,
    net_forward,
    net_forward_exact,
    net_gradient,
)
from .quadrature import ErrorReport, QuadratureSpec, norm_diff, separable_norm_diff, seminorm_2_2
from .symmetry import SymOrbit, VandermondeCoefficients, canonical_orbits, sym_basis_oracle, vandermonde_coefficients
from .targets import TargetFunction, builtin_target

__version__ = "0.1.0"
