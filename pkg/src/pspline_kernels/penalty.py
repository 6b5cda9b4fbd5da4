"""Difference matrices, the cumulative-sum matrix and their structural identities.

``D_m`` maps a coefficient vector ``b`` (length ``dim``) to the backward
differences ``(Delta^m b_{m+1}, ..., Delta^m b_dim)``. ``C`` is the
lower-triangular matrix of ones. The diagnostics ``check_*`` verify the row
structure of ``C^k D_m^T D_m`` against brute-force products; they are used by
the CLI's ``certify`` command as well as by the tests.
"""

from __future__ import annotations

from math import comb

import numpy as np
from scipy import sparse

from .exceptions import DimensionError, InvalidOrderError, UnsupportedError

IDENTITY_TOL = 1e-10


def _check_order(m: int) -> None:
    if int(m) != m or m < 1:
        raise InvalidOrderError(f"difference order must be a positive integer, got {m}")


def difference_stencil(m: int) -> np.ndarray:
    """Weights ``(-1)^(m-j) * C(m, j)``, ``j = 0..m``, of ``Delta^m``."""
    return np.array([(-1) ** (m - j) * comb(m, j) for j in range(m + 1)], dtype=np.int64)


def build_difference_matrix(m: int, dim: int, *, dtype=float) -> np.ndarray:
    """The ``(dim - m) x dim`` matrix ``D_m``.

    Raises
    ------
    DimensionError
        If ``m >= dim``.
    """
    _check_order(m)
    if m >= dim:
        raise DimensionError(f"difference order {m} needs more than {m} columns, got dim={dim}")
    stencil = difference_stencil(m)
    out = np.zeros((dim - m, dim), dtype=dtype)
    for r in range(dim - m):
        out[r, r:r + m + 1] = stencil
    return out


def difference_matrix_sparse(m: int, dim: int) -> sparse.csr_matrix:
    _check_order(m)
    if m >= dim:
        raise DimensionError(f"difference order {m} needs more than {m} columns, got dim={dim}")
    stencil = difference_stencil(m).astype(float)
    return sparse.diags(list(stencil), list(range(m + 1)), shape=(dim - m, dim), format="csr")


def penalty_banded(m: int, dim: int) -> np.ndarray:
    """``D_m^T D_m`` in LAPACK upper banded storage with ``m`` superdiagonals."""
    dtd = (difference_matrix_sparse(m, dim).T @ difference_matrix_sparse(m, dim)).tocsr()
    ab = np.zeros((m + 1, dim))
    for d in range(m + 1):
        ab[m - d, d:] = dtd.diagonal(d)
    return ab


def cumsum_matrix(dim: int, *, dtype=np.int64) -> np.ndarray:
    """Lower-triangular matrix of ones; its inverse is the first-difference matrix."""
    return np.tril(np.ones((dim, dim), dtype=dtype))


def omega_row_coeffs(m: int, k: int) -> np.ndarray:
    """Band entries ``omega_0..omega_{2m-k}`` of a generic row of ``C^k D_m^T D_m``.

    ``omega_j = (-1)^m (-1)^(2m-k-j) C(2m-k, j)``; with ``k = 0`` these are the
    interior rows of ``D_m^T D_m`` itself.
    """
    _check_order(m)
    if int(k) != k or k < 0:
        raise InvalidOrderError(f"power k must be a non-negative integer, got {k}")
    if k > m:
        raise UnsupportedError(f"only powers k <= m are supported (m={m}, k={k})")
    w = 2 * m - k
    return np.array([(-1) ** m * (-1) ** (w - j) * comb(w, j) for j in range(w + 1)], dtype=np.int64)


def cumsum_penalty_product(m: int, k: int, dim: int) -> np.ndarray:
    """Brute-force integer product ``C^k D_m^T D_m``."""
    d = build_difference_matrix(m, dim, dtype=np.int64)
    out = d.T @ d
    c = cumsum_matrix(dim)
    for _ in range(k):
        out = c @ out
    return out


def check_omega_rows(m: int, k: int, dim: int) -> bool:
    """Whether ``C^k D_m^T D_m`` has the predicted band rows and zero tail rows.

    Rows ``i = m-k+1, ..., dim-m`` (1-based) must equal ``omega`` placed in
    columns ``i-m+k, ..., i+m`` with zeros elsewhere, and the last ``k`` rows
    must vanish.
    """
    if dim < 2 * m + 2:
        raise DimensionError(f"dim must be at least 2m+2={2 * m + 2}, got {dim}")
    prod = cumsum_penalty_product(m, k, dim)
    omega = omega_row_coeffs(m, k)
    for i in range(m - k + 1, dim - m + 1):
        expected = np.zeros(dim, dtype=np.int64)
        expected[i - m + k - 1:i + m] = omega
        if not np.array_equal(prod[i - 1], expected):
            return False
    return k == 0 or not prod[dim - k:].any()


def check_cm_identity(m: int, dim: int, b, tol: float = IDENTITY_TOL) -> bool:
    """Check ``C^m D_m^T D_m b = (-1)^m (Delta^m b_{m+1}, ..., Delta^m b_dim, 0, ..., 0)``.

    The left side uses the exact integer matrix product; the right side uses
    the backward-difference stencil directly. Comparison is to ``tol`` scaled
    by ``max(1, |b|_inf)``.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (dim,):
        raise DimensionError(f"b must have length {dim}, got shape {b.shape}")
    if dim < 2 * m + 2:
        raise DimensionError(f"dim must be at least 2m+2={2 * m + 2}, got {dim}")
    lhs = cumsum_penalty_product(m, m, dim).astype(float) @ b
    rhs = np.zeros(dim)
    rhs[:dim - m] = (-1) ** m * np.convolve(b, difference_stencil(m)[::-1], mode="valid")
    scale = max(1.0, float(np.max(np.abs(b))))
    return bool(np.max(np.abs(lhs - rhs)) <= tol * scale)
