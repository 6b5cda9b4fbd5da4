"""B-spline bases on equally spaced knots over [0, 1].

The knots are ``kappa_j = j / K`` for every integer ``j``; the ``K + p`` basis
functions of degree ``p`` that do not vanish on [0, 1] are numbered
``k = 1, ..., K + p`` and ``B_k`` is supported on ``[kappa_{k-p-1}, kappa_k]``.
Column ``k - 1`` of a design matrix holds ``B_k``.

Intervals are half-open on the left, ``(kappa_{j-1}, kappa_j]``, so every value
at a knot is a left limit. The point 0 belongs to the first interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .exceptions import DomainError, InvalidOrderError

MAX_DEGREE = 10


@dataclass(frozen=True)
class KnotGrid:
    """Equally spaced knots on [0, 1] together with a spline degree.

    Parameters
    ----------
    num_intervals : int
        Number of knot intervals ``K`` (knots ``j / K``, ``j = 0..K``).
    degree : int
        Spline degree ``p``.
    """

    num_intervals: int
    degree: int

    def __post_init__(self):
        if int(self.num_intervals) != self.num_intervals or self.num_intervals < 1:
            raise ValueError(f"num_intervals must be a positive integer, got {self.num_intervals}")
        if int(self.degree) != self.degree or not 0 <= self.degree <= MAX_DEGREE:
            raise InvalidOrderError(f"degree must be an integer in [0, {MAX_DEGREE}], got {self.degree}")

    @property
    def dim(self) -> int:
        """Number of basis functions, ``K + p``."""
        return self.num_intervals + self.degree

    def knot(self, j):
        """Knot ``kappa_j = j / K`` (any integer ``j``, also outside 0..K)."""
        return np.asarray(j) / self.num_intervals

    def with_degree(self, degree: int) -> "KnotGrid":
        return KnotGrid(self.num_intervals, degree)


@dataclass(frozen=True)
class SplineFunction:
    """A spline ``sum_k coeffs[k-1] * B_k`` on a :class:`KnotGrid`."""

    grid: KnotGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (self.grid.dim,):
            raise ValueError(
                f"expected {self.grid.dim} coefficients for {self.grid}, got shape {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, x):
        return eval_spline(self, x)

    def derivative(self, order: int, x):
        return eval_spline_derivative(self, order, x)


def _check_domain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        bad = x[~((x >= 0.0) & (x <= 1.0))]
        raise DomainError(f"points must lie in [0, 1]; offending values include {bad.ravel()[:3]}")
    return x


def interval_index(grid: KnotGrid, x) -> np.ndarray:
    """1-based index ``j`` of the interval ``(kappa_{j-1}, kappa_j]`` holding each point."""
    x = _check_domain(x)
    K = grid.num_intervals
    j = np.ceil(x * K).astype(np.int64)
    # x * K can round across an integer; settle membership on the float knots themselves
    j = np.where((j > 1) & (x <= (j - 1) / K), j - 1, j)
    j = np.where((j < K) & (x > j / K), j + 1, j)
    return np.clip(j, 1, K)


def local_basis(grid: KnotGrid, x):
    """Values of the ``p + 1`` basis functions that can be nonzero at each point.

    Returns
    -------
    first : numpy.ndarray of int
        0-based column of the first active function for each point.
    values : numpy.ndarray, shape (npoints, p + 1)
        ``values[i, r]`` is ``B_{first[i] + r + 1}(x[i])``.
    """
    x = np.atleast_1d(_check_domain(x)).ravel()
    p = grid.degree
    j = interval_index(grid, x)
    u = x * grid.num_intervals
    values = np.ones((x.size, 1))
    # Cox-de Boor triangle; on a uniform grid every denominator equals the current degree
    for d in range(1, p + 1):
        new = np.zeros((x.size, d + 1))
        saved = np.zeros(x.size)
        for r in range(d):
            temp = values[:, r] / d
            right = (j - 1 + r + 1) - u
            left = u - (j - d + r)
            new[:, r] = saved + right * temp
            saved = left * temp
        new[:, d] = saved
        values = new
    return j - 1, values


def eval_basis(grid: KnotGrid, x: float) -> np.ndarray:
    """All ``K + p`` basis values ``B_k(x)`` at a single point.

    Raises
    ------
    DomainError
        If ``x`` is outside [0, 1].
    """
    first, values = local_basis(grid, x)
    out = np.zeros(grid.dim)
    out[first[0]:first[0] + grid.degree + 1] = values[0]
    return out


def design_matrix_sparse(grid: KnotGrid, points) -> sparse.csr_matrix:
    """Sparse design matrix ``[B_k(x_i)]`` with exactly ``p + 1`` stored entries per row."""
    first, values = local_basis(grid, points)
    n, width = values.shape
    cols = first[:, None] + np.arange(width)[None, :]
    indptr = np.arange(0, n * width + 1, width)
    return sparse.csr_matrix((values.ravel(), cols.ravel(), indptr), shape=(n, grid.dim))


def design_matrix(grid: KnotGrid, points) -> np.ndarray:
    """Dense design matrix; row ``i`` is ``eval_basis(grid, points[i])``."""
    return design_matrix_sparse(grid, points).toarray()


def eval_spline(f: SplineFunction, x):
    """Value of the spline at ``x`` (scalar or array)."""
    scalar = np.ndim(x) == 0
    first, values = local_basis(f.grid, x)
    idx = first[:, None] + np.arange(f.grid.degree + 1)[None, :]
    out = np.einsum("ij,ij->i", values, f.coeffs[idx])
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def difference_coefficients(coeffs, order: int) -> np.ndarray:
    """Backward differences ``Delta^order b_k`` for ``k = order+1, ..., len(coeffs)``."""
    return np.diff(np.asarray(coeffs, dtype=float), n=order)


def eval_spline_derivative(f: SplineFunction, order: int, x):
    """``order``-th derivative of the spline, via differenced coefficients.

    On equally spaced knots the derivative of ``sum_k b_k B_k^[p]`` is
    ``K**l * sum_k Delta^l b_k * B_{k-l}^[p-l]``; the lower-degree basis is
    evaluated with the same left-limit convention, so at knots this returns
    the left derivative.
    """
    if int(order) != order or order < 1:
        raise InvalidOrderError(f"derivative order must be a positive integer, got {order}")
    if order > f.grid.degree:
        raise InvalidOrderError(
            f"derivative order {order} exceeds spline degree {f.grid.degree}"
        )
    lower = SplineFunction(
        f.grid.with_degree(f.grid.degree - order),
        f.grid.num_intervals ** order * difference_coefficients(f.coeffs, order),
    )
    return eval_spline(lower, x)
