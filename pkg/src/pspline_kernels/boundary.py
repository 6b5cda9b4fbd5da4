"""Boundary behaviour of the equivalent kernel.

On [0, 1] the smoother solves ``(-1)^m alpha F^(2m) + F = G`` with
``F^(i)(0) = 0`` and ``F^(i)(1) = G^(i)(1)`` for ``i < m``. The solution is
``F = F0 + J`` where ``F0(t) = int_0^1 L(|t - s|) G(s) ds`` and ``J`` is a
combination of the ``2m`` homogeneous modes: ``m`` decaying away from 0
("near" modes) and ``m`` decaying away from 1 ("far" modes). Matching the
boundary conditions gives a ``2m x 2m`` system whose off-diagonal blocks are
``O(e^{-beta mu_min})``; dropping them ("asymptotic" mode) decouples the two
ends. Keeping them ("exact" mode) solves the boundary-value problem exactly.

Unknown ordering: near-side real mode (odd ``m``), then near pairs
``(a_k, b_k)``; then the same for the far side.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .exceptions import SingularSystemError, SmallBetaWarning, UnsupportedError
from .kernel import eigen_components, kernel_derivative, kernel_profile, solve_kernel_coefficients

BETA_STAR = 5.0
MODES = ("asymptotic", "exact")


@dataclass(frozen=True)
class BoundarySystem:
    """Blocks of the boundary-condition system.

    Rows ``0..m-1`` are the conditions at ``t = 0`` on derivatives of order
    ``i`` (scaled by ``beta^-i``); rows ``m..2m-1`` the same at ``t = 1``.
    """

    m: int
    beta: float
    mode: str
    B11: np.ndarray
    B12: np.ndarray
    B21: np.ndarray
    B22: np.ndarray

    @property
    def parity(self) -> str:
        return "odd" if self.m % 2 else "even"

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.B11, self.B12], [self.B21, self.B22]])


@dataclass(frozen=True)
class BoundaryCoeffs:
    """Amplitudes of the near-side and far-side homogeneous modes."""

    m: int
    beta: float
    near: np.ndarray
    far: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.near, self.far])


def _mode_table(m: int):
    ec = eigen_components(m)
    return ec, list(zip(ec.mus, ec.omegas, ec.phase_steps, ec.angles))


def assemble_boundary_system(m: int, beta: float, mode: str = "asymptotic") -> BoundarySystem:
    """Boundary-condition system for order ``m`` at scale ``beta``.

    Parameters
    ----------
    m : int
    beta : float
        Must be at least 1.
    mode : {"asymptotic", "exact"}
        ``"asymptotic"`` zeroes the coupling blocks ``B12`` and ``B21``.

    Examples
    --------
    >>> sys2 = assemble_boundary_system(2, 10.0)
    >>> np.round(np.linalg.inv(sys2.B11), 12)
    array([[1.        , 0.        ],
           [1.        , 1.41421356]])
    """
    if mode not in MODES:
        raise UnsupportedError(f"mode must be one of {MODES}, got {mode!r}")
    if not beta >= 1:
        raise ValueError(f"beta must be >= 1, got {beta}")
    ec, modes = _mode_table(m)
    odd = ec.has_real_mode
    B11 = np.zeros((m, m))
    B12 = np.zeros((m, m))
    B21 = np.zeros((m, m))
    B22 = np.zeros((m, m))
    for i in range(m):
        col = 0
        if odd:
            B11[i, 0] = (-1) ** i
            B12[i, 0] = math.exp(-beta)
            B21[i, 0] = (-1) ** i * math.exp(-beta)
            B22[i, 0] = 1.0
            col = 1
        for mu, om, step, ang in modes:
            decay = math.exp(-beta * mu)
            B11[i, col:col + 2] = math.cos(i * step), math.sin(i * step)
            B12[i, col:col + 2] = decay * math.cos(i * ang), decay * math.sin(i * ang)
            ph_near = i * step + beta * om
            ph_far = i * ang + beta * om
            B21[i, col:col + 2] = decay * math.cos(ph_near), decay * math.sin(ph_near)
            B22[i, col:col + 2] = math.cos(ph_far), math.sin(ph_far)
            col += 2
    if mode == "asymptotic":
        B12[:] = 0.0
        B21[:] = 0.0
    return BoundarySystem(m, float(beta), mode, B11, B12, B21, B22)


def solve_boundary_coeffs(system: BoundarySystem, v) -> BoundaryCoeffs:
    """Mode amplitudes solving ``system.matrix @ coeffs = v``.

    Raises
    ------
    SingularSystemError
        If the system is numerically singular; the message carries the
        condition numbers of the diagonal blocks.
    """
    v = np.asarray(v, dtype=float)
    m = system.m
    if v.shape != (2 * m,):
        raise ValueError(f"v must have length {2 * m}, got shape {v.shape}")
    A = system.matrix
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystemError(
            f"boundary system (m={m}, beta={system.beta}, mode={system.mode}) is singular: "
            f"cond={cond:.3g}, cond(B11)={np.linalg.cond(system.B11):.3g}, "
            f"cond(B22)={np.linalg.cond(system.B22):.3g}"
        )
    x = np.linalg.solve(A, v)
    return BoundaryCoeffs(m, system.beta, x[:m], x[m:])


def boundary_data_vector(m: int, beta: float, g, g_derivative) -> np.ndarray:
    """Right-hand side ``v = (v0, v1)`` of the boundary system for data ``G``.

    ``v0_i = -F0^(i)(0) / beta^i`` and ``v1_i = (G^(i)(1) - F0^(i)(1)) / beta^i``
    for ``i = 0..m-1``, with ``F0`` the whole-line kernel smooth of ``G``.

    Parameters
    ----------
    g : callable
        ``G`` on [0, 1].
    g_derivative : callable
        ``g_derivative(i, x)`` returns ``G^(i)(x)``.
    """
    spec = solve_kernel_coefficients(m)
    split = min(0.5, 40.0 / beta)
    v = np.zeros(2 * m)
    for i in range(m):
        left = _quad(lambda s: (-1) ** i * kernel_derivative(spec, beta, i, s) * g(s), split)
        right = _quad(lambda s: kernel_derivative(spec, beta, i, 1.0 - s) * g(s), 1.0 - split)
        v[i] = -left / beta ** i
        v[m + i] = (g_derivative(i, 1.0) - right) / beta ** i
    return v


def _quad(func, split: float) -> float:
    a = integrate.quad(func, 0.0, split, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    b = integrate.quad(func, split, 1.0, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    return a + b


def eval_boundary_correction(coeffs: BoundaryCoeffs, t, order: int = 0):
    """``order``-th derivative of the homogeneous part ``J`` at ``t``."""
    m, beta = coeffs.m, coeffs.beta
    t = np.asarray(t, dtype=float)
    ec, modes = _mode_table(m)
    out = np.zeros_like(t)
    near, far = coeffs.near, coeffs.far
    col = 0
    if ec.has_real_mode:
        out = out + near[0] * (-beta) ** order * np.exp(-beta * t)
        out = out + far[0] * beta ** order * np.exp(-beta * (1 - t))
        col = 1
    for mu, om, step, ang in modes:
        ph = om * beta * t
        en = np.exp(-beta * mu * t)
        ef = np.exp(-beta * mu * (1 - t))
        out = out + beta ** order * en * (
            near[col] * np.cos(order * step + ph) + near[col + 1] * np.sin(order * step + ph)
        )
        out = out + beta ** order * ef * (
            far[col] * np.cos(order * ang + ph) + far[col + 1] * np.sin(order * ang + ph)
        )
        col += 2
    return float(out) if out.ndim == 0 else out


def whole_line_smooth(m: int, beta: float, g, t: float) -> float:
    """``F0(t) = int_0^1 L(|t - s|) G(s) ds``."""
    spec = solve_kernel_coefficients(m)

    def integrand(s):
        return kernel_profile(spec, beta, t - s) * g(s)

    pts = sorted({0.0, t, 1.0})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    return total


def solve_boundary_value_problem(m: int, beta: float, g, g_derivative, t, mode: str = "exact"):
    """``F = F0 + J`` at points ``t`` for data ``G``."""
    system = assemble_boundary_system(m, beta, mode)
    coeffs = solve_boundary_coeffs(system, boundary_data_vector(m, beta, g, g_derivative))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f0 = np.array([whole_line_smooth(m, beta, g, x) for x in t])
    return f0 + eval_boundary_correction(coeffs, t)


# boundary kernel


def q_vector(m: int, beta: float, t: float) -> np.ndarray:
    """Near-mode weights ``q(t)`` of the boundary kernel.

    Each pair is ``e^{-beta mu_l t} (cos(m theta_l + omega_l beta t), sin(...))``
    with ``theta_l`` the derivative phase step; odd ``m`` prepends
    ``(-1)^m e^{-beta t}``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    ec, modes = _mode_table(m)
    out = [(-1) ** m * math.exp(-beta * t)] if ec.has_real_mode else []
    for mu, om, step, _ in modes:
        ph = m * step + om * beta * t
        e = math.exp(-beta * mu * t)
        out += [e * math.cos(ph), e * math.sin(ph)]
    return np.array(out)


def r_vector(m: int, beta: float, s) -> np.ndarray:
    """Source-side vector ``r(s)`` of the boundary kernel, shape ``(m,)`` or ``(m, len(s))``.

    ``r_j(s) = sum_k beta e^{-beta mu_k s} (c_k cos psi + d_k sin psi)`` with
    ``psi = omega_k beta s - (m - j)(theta_k + pi)``, i.e. the first row of
    ``(-A_k)^{-(m-j)}`` applied by angle negation. Odd ``m`` adds
    ``c0 beta e^{-beta s}`` to every entry.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be >= 0")
    spec = solve_kernel_coefficients(m)
    _, modes = _mode_table(m)
    out = np.zeros((m,) + s.shape)
    for j in range(m):
        if spec.c0 is not None:
            out[j] += spec.c0 * beta * np.exp(-beta * s)
        for (mu, om, step, _), c, d in zip(modes, spec.c, spec.d):
            psi = om * beta * s - (m - j) * (step + math.pi)
            out[j] += beta * np.exp(-beta * mu * s) * (c * np.cos(psi) + d * np.sin(psi))
    return out


@dataclass(frozen=True)
class BoundaryKernelSpec:
    """Everything needed to evaluate the left-boundary kernel at one ``beta``."""

    m: int
    beta: float
    B11_inv: np.ndarray

    def correction(self, t: float, s) -> np.ndarray:
        return q_vector(self.m, self.beta, t) @ (-self.B11_inv @ r_vector(self.m, self.beta, s))

    def __call__(self, t: float, s):
        spec = solve_kernel_coefficients(self.m)
        out = kernel_profile(spec, self.beta, np.asarray(s, dtype=float) - t) + self.correction(t, s)
        return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=256)
def boundary_kernel_spec(m: int, beta: float) -> BoundaryKernelSpec:
    if beta < BETA_STAR:
        warnings.warn(
            f"beta={beta} is below {BETA_STAR}; boundary kernels may be inaccurate",
            SmallBetaWarning,
            stacklevel=3,
        )
    B11 = assemble_boundary_system(m, max(beta, 1.0), "asymptotic").B11
    return BoundaryKernelSpec(m, float(beta), np.linalg.inv(B11))


def boundary_kernel(m: int, beta: float, t: float, s, side: str = "left"):
    """Asymptotic boundary kernel ``K_b(t, s)``.

    ``side="left"`` corrects for the boundary at 0, ``"right"`` for the one at 1
    (by reflecting ``t -> 1 - t``, ``s -> 1 - s``), and ``"auto"`` picks the
    nearer boundary. Warns with :class:`SmallBetaWarning` below ``beta = 5``.
    """
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if side == "auto":
        side = "left" if t <= 0.5 else "right"
    if side not in ("left", "right"):
        raise UnsupportedError(f"side must be 'left', 'right' or 'auto', got {side!r}")
    if beta < BETA_STAR:
        warnings.warn(
            f"beta={beta} is below {BETA_STAR}; boundary kernels may be inaccurate",
            SmallBetaWarning,
            stacklevel=2,
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallBetaWarning)
        bk = boundary_kernel_spec(int(m), float(beta))
    if side == "right":
        return bk(1.0 - t, 1.0 - np.asarray(s, dtype=float))
    return bk(t, s)


def boundary_kernel_m2_at_zero(beta: float, s):
    """Reduced form of the ``m = 2`` boundary kernel at ``t = 0``."""
    x = beta / math.sqrt(2)
    s = np.asarray(s, dtype=float)
    return math.sqrt(2) * beta * np.exp(-x * s) * np.cos(x * s)


def _m2_near_term(beta: float, t, s):
    x = beta / math.sqrt(2)
    return beta / (2 * math.sqrt(2)) * np.exp(-x * (t + s)) * (
        np.cos(x * (t - s)) + 2 * np.cos(x * t) * np.cos(x * s) - np.sin(x * (t + s))
    )


def boundary_kernel_m2_closed_form(beta: float, t, s):
    """Closed form of the ``m = 2`` left-boundary kernel."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return kernel_profile(solve_kernel_coefficients(2), beta, t - s) + _m2_near_term(beta, t, s)


def finite_sample_kernel_m2(beta: float, t, s, m: int = 2):
    """``m = 2`` kernel keeping the correction terms from both boundaries.

    Raises
    ------
    UnsupportedError
        For any order other than 2.
    """
    if m != 2:
        raise UnsupportedError(f"the two-boundary closed form exists for m=2 only, got m={m}")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return boundary_kernel_m2_closed_form(beta, t, s) + _m2_near_term(beta, 1 - t, 1 - s)


def finite_sample_gap(beta: float, t: float, num: int = 4001) -> tuple[float, float]:
    """``sup_s |finite-sample - asymptotic|`` and ``sup_s |K_b|`` on a uniform grid."""
    s = np.linspace(0.0, 1.0, num)
    kb = boundary_kernel_m2_closed_form(beta, t, s)
    fs = finite_sample_kernel_m2(beta, t, s)
    return float(np.max(np.abs(fs - kb))), float(np.max(np.abs(kb)))
