"""Penalized least-squares B-spline fits with a difference penalty.

The coefficients minimize ``||y - X b||^2 + lambda_star * ||D_m b||^2`` where
``X`` is the B-spline design matrix at ``t_i = i / n``. The normal equations
are banded (half-bandwidth ``max(p, m)``) and solved by a banded Cholesky
factorization; :class:`PSplineSmoother` factors once and reuses the factor
for many responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .basis import (
    KnotGrid,
    SplineFunction,
    _check_domain,
    design_matrix_sparse,
    eval_spline,
    local_basis,
)
from .exceptions import ConfigurationError, DimensionError, DomainError, SingularSystemError
from .penalty import build_difference_matrix, difference_matrix_sparse, penalty_banded


@dataclass(frozen=True)
class FitConfig:
    """Problem sizes and penalty weight of a P-spline fit.

    Parameters
    ----------
    n : int
        Number of design points ``t_i = i / n``.
    num_intervals : int
        Number of knot intervals ``K``; must divide ``n``.
    degree : int
        Spline degree ``p``.
    penalty_order : int
        Difference order ``m``.
    lambda_star : float
        Penalty weight, ``>= 0``.
    """

    n: int
    num_intervals: int
    degree: int
    penalty_order: int
    lambda_star: float

    def __post_init__(self):
        for name in ("n", "num_intervals", "degree", "penalty_order"):
            value = getattr(self, name)
            if int(value) != value:
                raise ConfigurationError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n < 1 or self.num_intervals < 1:
            raise ConfigurationError("n and num_intervals must be positive")
        if self.n % self.num_intervals:
            raise ConfigurationError(
                f"n={self.n} is not a multiple of num_intervals={self.num_intervals}"
            )
        if self.penalty_order < 1:
            raise ConfigurationError(f"penalty_order must be >= 1, got {self.penalty_order}")
        if self.degree < 0:
            raise ConfigurationError(f"degree must be >= 0, got {self.degree}")
        if self.num_intervals + self.degree <= self.penalty_order:
            raise ConfigurationError("num_intervals + degree must exceed penalty_order")
        lam = float(self.lambda_star)
        if not math.isfinite(lam) or lam < 0:
            raise ConfigurationError(f"lambda_star must be finite and >= 0, got {self.lambda_star}")
        object.__setattr__(self, "lambda_star", lam)

    @classmethod
    def from_alpha(cls, n, num_intervals, degree, penalty_order, alpha) -> "FitConfig":
        """Build a config from the effective smoothing parameter ``alpha``."""
        lam = float(alpha) * n * float(num_intervals) ** (2 * penalty_order - 1)
        return cls(n, num_intervals, degree, penalty_order, lam)

    @property
    def obs_per_interval(self) -> int:
        return self.n // self.num_intervals

    @property
    def alpha(self) -> float:
        """``lambda_star / (n K^(2m-1))``."""
        return self.lambda_star / (self.n * float(self.num_intervals) ** (2 * self.penalty_order - 1))

    @property
    def beta(self) -> float:
        """Inverse bandwidth ``alpha^(-1/(2m))``; infinite when ``lambda_star = 0``."""
        a = self.alpha
        return math.inf if a == 0 else a ** (-1.0 / (2 * self.penalty_order))

    @property
    def grid(self) -> KnotGrid:
        return KnotGrid(self.num_intervals, self.degree)

    @property
    def dim(self) -> int:
        return self.num_intervals + self.degree

    def design_points(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n


@dataclass(frozen=True)
class PSplineFit:
    """Fitted coefficients together with the configuration that produced them."""

    config: FitConfig
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (self.config.dim,):
            raise DimensionError(f"expected {self.config.dim} coefficients, got {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def spline(self) -> SplineFunction:
        return SplineFunction(self.config.grid, self.coeffs)

    @cached_property
    def fitted_values(self) -> np.ndarray:
        """``f_hat(t_i)`` at the design points."""
        X = design_matrix_sparse(self.config.grid, self.config.design_points())
        return X @ self.coeffs

    def __call__(self, x):
        return predict(self, x)


class PSplineSmoother:
    """Factor the normal-equation matrix once and fit any number of responses.

    Parameters
    ----------
    config : FitConfig
    """

    def __init__(self, config: FitConfig):
        self.config = config
        self.grid = config.grid
        self.design = design_matrix_sparse(self.grid, config.design_points())
        self.bandwidth = max(config.degree, config.penalty_order)
        self._factor = self._factorize()

    def _normal_banded(self) -> np.ndarray:
        cfg = self.config
        u, dim = self.bandwidth, cfg.dim
        xtx = (self.design.T @ self.design).tocsr()
        ab = np.zeros((u + 1, dim))
        for d in range(cfg.degree + 1):
            ab[u - d, d:] = xtx.diagonal(d)
        if cfg.lambda_star > 0:
            m = cfg.penalty_order
            ab[u - m:, :] += cfg.lambda_star * penalty_banded(m, dim)
        return ab

    def _factorize(self) -> np.ndarray:
        ab = self._normal_banded()
        try:
            return linalg.cholesky_banded(ab, lower=False)
        except linalg.LinAlgError:
            pass
        rank = np.linalg.matrix_rank(self.design.toarray())
        cfg = self.config
        if cfg.lambda_star == 0:
            raise SingularSystemError(
                f"unpenalized design is rank deficient: rank {rank} < {cfg.dim} coefficients "
                f"(n={cfg.n}, K={cfg.num_intervals}, p={cfg.degree})"
            )
        raise SingularSystemError(
            f"penalized normal equations are not positive definite "
            f"(design rank {rank}, {cfg.dim} coefficients, lambda_star={cfg.lambda_star:g})"
        )

    def coefficients(self, y) -> np.ndarray:
        """Coefficients for one response (length ``n``) or a batch of shape ``(R, n)``."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.config.n or y.ndim > 2:
            raise DimensionError(f"responses must have trailing length n={self.config.n}, got {y.shape}")
        rhs = self.design.T @ y.T
        sol = linalg.cho_solve_banded((self._factor, False), rhs, check_finite=False)
        return sol.T

    def fit(self, y) -> PSplineFit:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.config.n,):
            raise DimensionError(f"y must have length n={self.config.n}, got shape {y.shape}")
        return PSplineFit(self.config, self.coefficients(y))

    def fit_many(self, Y) -> np.ndarray:
        """Coefficient matrix of shape ``(R, K + p)`` for responses ``Y`` of shape ``(R, n)``."""
        return np.atleast_2d(self.coefficients(np.atleast_2d(Y)))


def fit(y, config: FitConfig, *, solver: str = "banded") -> PSplineFit:
    """Fit a P-spline to responses ``y`` observed at ``t_i = i / n``.

    Parameters
    ----------
    y : array_like, shape (n,)
    config : FitConfig
    solver : {"banded", "dense"}
        ``"dense"`` forms the full normal-equation matrix and uses a dense
        Cholesky factorization; useful as a cross-check.

    Raises
    ------
    SingularSystemError
        If the normal equations are singular, e.g. ``lambda_star = 0`` with a
        rank-deficient design.
    """
    if solver == "banded":
        return PSplineSmoother(config).fit(y)
    if solver != "dense":
        raise ValueError(f"unknown solver {solver!r}")
    y = np.asarray(y, dtype=float)
    if y.shape != (config.n,):
        raise DimensionError(f"y must have length n={config.n}, got shape {y.shape}")
    X = design_matrix_sparse(config.grid, config.design_points()).toarray()
    D = build_difference_matrix(config.penalty_order, config.dim)
    A = X.T @ X + config.lambda_star * (D.T @ D)
    try:
        factor = linalg.cho_factor(A)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"normal equations singular: design rank {np.linalg.matrix_rank(X)} < {config.dim}"
        ) from exc
    return PSplineFit(config, linalg.cho_solve(factor, X.T @ y))


def predict(fit: PSplineFit, x):
    """Evaluate the fitted spline at ``x`` in [0, 1]."""
    return eval_spline(fit.spline, x)


def objective(config: FitConfig, y, coeffs) -> float:
    """Penalized residual sum of squares ``||y - Xb||^2 + lambda_star ||D_m b||^2``."""
    X = design_matrix_sparse(config.grid, config.design_points())
    resid = np.asarray(y, dtype=float) - X @ coeffs
    pen = difference_matrix_sparse(config.penalty_order, config.dim) @ coeffs
    return float(resid @ resid + config.lambda_star * (pen @ pen))


def normal_equation_residual(fit: PSplineFit, y) -> float:
    """``||(X'X + lambda D'D) b - X'y||_inf / ||X'y||_inf`` (absolute if ``X'y = 0``)."""
    cfg = fit.config
    X = design_matrix_sparse(cfg.grid, cfg.design_points())
    D = difference_matrix_sparse(cfg.penalty_order, cfg.dim)
    b = fit.coeffs
    xty = X.T @ np.asarray(y, dtype=float)
    res = X.T @ (X @ b) + cfg.lambda_star * (D.T @ (D @ b)) - xty
    scale = float(np.max(np.abs(xty)))
    return float(np.max(np.abs(res))) / (scale if scale > 0 else 1.0)


# correction between degree p and degree m representations


def correction_domain(config: FitConfig) -> tuple[float, float]:
    """Interval on which the degree-``m`` companion spline is defined."""
    p, m, K = config.degree, config.penalty_order, config.num_intervals
    if p < m:
        return 0.0, 1.0 - (m - p) / K
    return 0.0, 1.0


def _telescope_step(K: int, q: int, coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``f^[q] - f^[q-1]`` where ``f^[q-1]`` keeps the first ``K + q - 1`` coefficients.

    ``coeffs`` has shape ``(K + q, ...)``; trailing axes are carried along.
    The step equals ``sum_i (b_{i+1} - b_i) (K t - (i - q)) / q * B_i^[q-1](t)``.
    """
    first, values = local_basis(KnotGrid(K, q - 1), t)
    idx = first[:, None] + np.arange(q)[None, :]  # 0-based column of B_i^[q-1], i = idx + 1
    delta = np.diff(coeffs, axis=0)  # delta[i-1] = b_{i+1} - b_i
    weights = values * (K * t[:, None] - (idx + 1 - q)) / q
    return np.einsum("ij,ij...->i...", weights, delta[idx])


def correction_terms(config: FitConfig, coeffs, t) -> np.ndarray:
    """Correction ``f_hat^[p](t) - f_tilde^[m](t)`` for one or many coefficient vectors.

    Parameters
    ----------
    config : FitConfig
    coeffs : array_like, shape (K + p,) or (K + p, R)
    t : array_like
        Evaluation points inside :func:`correction_domain`.

    Returns
    -------
    numpy.ndarray, shape (len(t),) or (len(t), R)
    """
    t = np.atleast_1d(_check_domain(t)).astype(float).ravel()
    coeffs = np.asarray(coeffs, dtype=float)
    p, m, K = config.degree, config.penalty_order, config.num_intervals
    if coeffs.shape[0] != K + p:
        raise DimensionError(f"expected {K + p} coefficients, got {coeffs.shape[0]}")
    out = np.zeros((t.size,) + coeffs.shape[1:])
    if p == m:
        return out
    lo, hi = correction_domain(config)
    if np.any(t > hi) or np.any(t < lo):
        raise DomainError(
            f"degree-{m} companion of a degree-{p} fit is only defined on [{lo}, {hi:.6g}]"
        )
    if p > m:
        for q in range(m + 1, p + 1):
            out += _telescope_step(K, q, coeffs[:K + q], t)
        return out
    padded = np.concatenate([coeffs, np.zeros((m - p,) + coeffs.shape[1:])])
    for q in range(p + 1, m + 1):
        out -= _telescope_step(K, q, padded[:K + q], t)
    return out


def correction_gamma(fit: PSplineFit, t):
    """Difference between the fit and its degree-``m`` companion at ``t``.

    The companion spline reuses the fitted coefficients on the degree-``m``
    basis, truncated to ``K + m`` coefficients when ``p > m`` and zero-padded
    when ``p < m`` (then only defined on ``[0, 1 - (m - p)/K]``). The
    difference is accumulated one degree at a time from the B-spline
    recurrence, so it is exact up to rounding. Returns 0 when ``p = m``.

    Raises
    ------
    DomainError
        If ``t`` lies outside the companion's domain.
    """
    scalar = np.ndim(t) == 0
    out = correction_terms(fit.config, fit.coeffs, t)
    return float(out[0]) if scalar else out.reshape(np.shape(t))


def correction_matrix(config: FitConfig, t) -> np.ndarray:
    """Matrix ``G`` with ``correction_terms(config, b, t) == G @ b`` for every ``b``."""
    return correction_terms(config, np.eye(config.dim), t)


def companion_spline(fit: PSplineFit) -> SplineFunction:
    """The degree-``m`` spline sharing the fitted coefficients."""
    cfg = fit.config
    p, m, K = cfg.degree, cfg.penalty_order, cfg.num_intervals
    if p >= m:
        coeffs = fit.coeffs[:K + m]
    else:
        coeffs = np.concatenate([fit.coeffs, np.zeros(m - p)])
    return SplineFunction(KnotGrid(K, m), coeffs)
