"""Weighted Hardy, Rellich and uncertainty inequalities for sums of squares of vector fields.

The package evaluates every term of these inequalities, and of the Green
and divergence identities behind them, by tensor quadrature on explicit
frames (Euclidean space, Heisenberg groups, custom triangular frames).
"""

from .battery import standard_battery
from .domains import Domain, build_box, build_euclidean_ball, build_gauge_ball, excise_pole
from .expr import parse_expression
from .fields import ScalarField
from .frames import (
    Frame,
    commutator,
    custom_frame,
    directional_derivative,
    euclidean,
    heisenberg,
    horizontal_gradient,
    nonsmooth_r3,
    sub_laplacian,
    tilde_pairing,
    validate_triangular_form,
)
from .fundsol import (
    FundamentalSolution,
    calibrate_constant,
    euclidean_solution,
    gamma_value,
    gauge_gradient,
    gauge_value,
    heisenberg_solution,
    key_identity_residual,
)
from .inequalities import (
    InequalityReport,
    c_functional,
    green_first_residual,
    green_second_residual,
    hardy_check,
    hardy_refined_check,
    normalization_check,
    rellich_check,
    rellich_gradient_check,
    representation_residual,
    stokes_residual,
    uncertainty_check,
)
from .quadrature import QuadratureScheme, integrate_boundary, integrate_interior, monte_carlo_oracle
from .sharpness import hardy_family, optimize_trial, rayleigh_ratio

__version__ = "0.1.0"
