"""Penalized B-spline smoothing and its equivalent kernels."""

from .basis import (
    KnotGrid,
    SplineFunction,
    design_matrix,
    design_matrix_sparse,
    eval_basis,
    eval_spline,
    eval_spline_derivative,
)
from .exceptions import (
    BoundaryTruncationWarning,
    ConfigurationError,
    DimensionError,
    DomainError,
    InvalidOrderError,
    SingularSystemError,
    SmallBetaWarning,
    UnsupportedError,
)
from .fit import FitConfig, PSplineFit, PSplineSmoother, correction_gamma, fit, predict
from .penalty import (
    build_difference_matrix,
    check_cm_identity,
    check_omega_rows,
    cumsum_matrix,
    omega_row_coeffs,
)

__version__ = "0.1.0"
