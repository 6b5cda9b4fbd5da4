"""Interior equivalent kernels of difference-penalized splines.

For penalty order ``m`` the kernel profile is the Green's function of
``(-1)^m alpha F^(2m) + F = G`` on the real line. With ``beta = alpha^(-1/(2m))``
it is a sum of decaying modes::

    L(u) = beta * [c0 e^{-beta u}]
           + beta * sum_k e^{-beta mu_k u} (c_k cos(omega_k beta u) + d_k sin(omega_k beta u)),

for ``u >= 0``, with the real mode present only for odd ``m``. Each oscillatory
mode has an eigen-angle ``a_k`` (``mu_k = cos a_k``, ``omega_k = sin a_k``);
differentiating a mode once multiplies ``beta`` and rotates its phase by
``theta_k = pi - a_k``, so the ``j``-th derivative at 0 is the first row of the
rotation ``M(j theta_k)`` applied to ``(c_k, d_k)``. The coefficients come from
an ``m x m`` system that does not involve ``beta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate

from .exceptions import BoundaryTruncationWarning, InvalidOrderError, SingularSystemError

MAX_ORDER = 12
TAIL_TOL = 1e-12


def rotation(phi) -> np.ndarray:
    """``M(phi) = [[cos phi, sin phi], [-sin phi, cos phi]]``."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s], [-s, c]])


def _check_order(m) -> int:
    if int(m) != m or not 1 <= m <= MAX_ORDER:
        raise InvalidOrderError(f"penalty order must be an integer in [1, {MAX_ORDER}], got {m}")
    return int(m)


@dataclass(frozen=True)
class EigenComponents:
    """Decay rates ``mus`` and frequencies ``omegas`` of the oscillatory modes.

    ``angles`` holds the eigen-angles ``a_k`` with ``mu_k = cos a_k`` and
    ``omega_k = sin a_k``. Odd orders carry an extra non-oscillating mode
    ``e^{-beta u}`` (``has_real_mode``).
    """

    m: int
    angles: tuple
    has_real_mode: bool

    @property
    def mus(self) -> np.ndarray:
        return np.cos(np.array(self.angles, dtype=float))

    @property
    def omegas(self) -> np.ndarray:
        return np.sin(np.array(self.angles, dtype=float))

    @property
    def phase_steps(self) -> np.ndarray:
        """Phase rotation ``pi - a_k`` per derivative."""
        return math.pi - np.array(self.angles, dtype=float)

    @property
    def num_pairs(self) -> int:
        return len(self.angles)

    @property
    def slowest_decay(self) -> float:
        rates = list(self.mus) + ([1.0] if self.has_real_mode else [])
        return float(min(rates))


def eigen_angle_fractions(m: int) -> list[tuple[int, int]]:
    """Eigen-angles as exact fractions ``(num, den)`` of ``pi``."""
    if m % 2 == 0:
        return [(2 * k + 1, 2 * m) for k in range(m // 2)]
    return [(k, m) for k in range(1, (m - 1) // 2 + 1)]


def eigen_components(m: int) -> EigenComponents:
    """Eigen-components for penalty order ``m``.

    Examples
    --------
    >>> ec = eigen_components(3)
    >>> round(float(ec.mus[0]), 12), round(float(ec.omegas[0]), 12)
    (0.5, 0.866025403784)
    """
    m = _check_order(m)
    angles = tuple(math.pi * a / b for a, b in eigen_angle_fractions(m))
    return EigenComponents(m, angles, m % 2 == 1)


@dataclass(frozen=True)
class RotationGenerator:
    """Derivative generator of one oscillatory mode, ``A_k = M(pi - a_k)``.

    ``matrix`` equals ``[[-mu_k, omega_k], [-omega_k, -mu_k]]``.
    """

    k: int
    angle: float

    @property
    def matrix(self) -> np.ndarray:
        return rotation(self.angle)

    def power(self, j: int) -> np.ndarray:
        """``A_k^j`` by angle multiplication (negative ``j`` gives the inverse powers)."""
        return rotation(j * self.angle)


def rotation_generators(m: int) -> list[RotationGenerator]:
    ec = eigen_components(m)
    return [RotationGenerator(k, float(step)) for k, step in enumerate(ec.phase_steps)]


@dataclass(frozen=True)
class KernelSpec:
    """Coefficients of the interior kernel for penalty order ``m``.

    The coefficients are ``beta``-free; ``beta`` is a default used by the
    convenience evaluators only.
    """

    m: int
    c: tuple
    d: tuple
    c0: float | None = None
    beta: float = 1.0

    @property
    def parity(self) -> str:
        return "odd" if self.m % 2 else "even"

    @property
    def components(self) -> EigenComponents:
        return eigen_components(self.m)

    def with_beta(self, beta: float) -> "KernelSpec":
        return KernelSpec(self.m, self.c, self.d, self.c0, float(beta))

    def as_vector(self) -> np.ndarray:
        """Unknowns in system order: ``(c0,)`` then ``c_k, d_k`` pairs."""
        head = [self.c0] if self.c0 is not None else []
        return np.array(head + [x for pair in zip(self.c, self.d) for x in pair], dtype=float)

    def __call__(self, u):
        return kernel_profile(self, self.beta, u)


def assemble_coefficient_system(m: int):
    """Square system whose solution gives the kernel coefficients.

    Row ``r`` states the ``(2r+1)``-th derivative of the profile at ``0+``,
    divided by ``beta^(2r+2)``: zero for all but the last row, which is
    ``1/2`` (even ``m``) or ``-1/2`` (odd ``m``).

    Returns
    -------
    A : numpy.ndarray, shape (m, m)
    rhs : numpy.ndarray, shape (m,)
    """
    m = _check_order(m)
    gens = rotation_generators(m)
    rows = []
    for j in range(1, 2 * m, 2):
        row = [-1.0] if m % 2 else []
        for g in gens:
            row.extend(g.power(j)[0])
        rows.append(row)
    rhs = np.zeros(m)
    rhs[-1] = -0.5 if m % 2 else 0.5
    return np.array(rows), rhs


def _coefficient_columns(m: int, A: np.ndarray):
    """Split a system matrix into its real-mode column and its oscillatory block."""
    if m % 2:
        return A[:, :1], A[:, 1:]
    return A[:, :0], A


@lru_cache(maxsize=None)
def solve_kernel_coefficients(m: int) -> KernelSpec:
    """Unique kernel coefficients for penalty order ``m`` (``beta`` set to 1).

    Examples
    --------
    >>> spec = solve_kernel_coefficients(2)
    >>> round(spec.c[0] * 2 * 2 ** 0.5, 12), round(spec.d[0] * 2 * 2 ** 0.5, 12)
    (1.0, 1.0)
    """
    A, rhs = assemble_coefficient_system(m)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e10:
        raise SingularSystemError(f"kernel coefficient system for m={m} is singular (cond={cond:.3g})")
    x = np.linalg.solve(A, rhs)
    if m % 2:
        c0, rest = float(x[0]), x[1:]
    else:
        c0, rest = None, x
    return KernelSpec(m, tuple(float(v) for v in rest[0::2]), tuple(float(v) for v in rest[1::2]), c0)


def kernel_derivative(spec: KernelSpec, beta: float, order: int, u):
    """``order``-th derivative of the profile ``L`` at ``u >= 0`` (one-sided at 0)."""
    u = np.asarray(u, dtype=float)
    ec = spec.components
    out = np.zeros_like(u)
    if spec.c0 is not None:
        out = out + spec.c0 * (-1) ** order * np.exp(-beta * u)
    for mu, om, step, c, d in zip(ec.mus, ec.omegas, ec.phase_steps, spec.c, spec.d):
        phase = order * step + om * beta * u
        out = out + np.exp(-beta * mu * u) * (c * np.cos(phase) + d * np.sin(phase))
    out = beta ** (order + 1) * out
    return float(out) if out.ndim == 0 else out


def kernel_profile(spec: KernelSpec, beta: float, u):
    """Kernel profile ``L(|u|)`` (``P`` for odd orders) at scale ``beta``."""
    return kernel_derivative(spec, beta, 0, np.abs(np.asarray(u, dtype=float)))


def eval_kernel(spec: KernelSpec, beta: float, t, s):
    """Interior kernel ``K(t, s) = L(|t - s|)``; symmetric in ``t`` and ``s``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return kernel_profile(spec, beta, np.asarray(t, dtype=float) - np.asarray(s, dtype=float))


def defining_conditions(spec: KernelSpec, beta: float = 1.0) -> np.ndarray:
    """Odd derivatives ``L^(j)(0+)``, ``j = 1, 3, ..., 2m-1``, from the mode decomposition."""
    return np.array([kernel_derivative(spec, beta, j, 0.0) for j in range(1, 2 * spec.m, 2)])


def defining_conditions_hold(spec: KernelSpec, beta: float = 1.0, tol: float = 1e-9) -> bool:
    """Lower odd derivatives vanish and the top one equals ``+-beta^(2m)/2``."""
    vals = defining_conditions(spec, beta)
    target = (-0.5 if spec.m % 2 else 0.5) * beta ** (2 * spec.m)
    lower_ok = all(abs(v) <= tol * beta ** j for v, j in zip(vals[:-1], range(1, 2 * spec.m, 2)))
    return bool(lower_ok and abs(vals[-1] - target) <= tol * abs(target))


def mode_roots(m: int) -> np.ndarray:
    """Characteristic roots ``-mu_k +- i omega_k`` (and ``-1`` for odd ``m``) at ``beta = 1``."""
    ec = eigen_components(m)
    roots = [-1.0 + 0j] if ec.has_real_mode else []
    for a in ec.angles:
        roots += [-np.cos(a) + 1j * np.sin(a), -np.cos(a) - 1j * np.sin(a)]
    return np.array(roots)


def check_mode_equation(m: int, tol: float = 1e-12) -> bool:
    """Every mode solves the homogeneous equation: ``lambda^(2m) = -1`` (even) or ``+1`` (odd)."""
    target = 1.0 if m % 2 else -1.0
    return bool(np.all(np.abs(mode_roots(m) ** (2 * m) - target) <= tol))


def orthogonality_residual(m: int) -> float:
    """Deviation of the coefficient matrix from its orthogonality pattern.

    Even ``m``: ``max |A A^T - (m/2) I|``. Odd ``m``: largest off-diagonal
    entry of ``A^T A``, or ``inf`` if a diagonal entry is not positive.
    """
    A, _ = assemble_coefficient_system(m)
    if m % 2 == 0:
        return float(np.max(np.abs(A @ A.T - (m / 2) * np.eye(m))))
    G = A.T @ A
    if np.any(np.diag(G) <= 0):
        return math.inf
    return float(np.max(np.abs(G - np.diag(np.diag(G)))))


# moments


def _mp_coefficients(m: int):
    """Kernel coefficients re-solved at the current mpmath precision."""
    fr = eigen_angle_fractions(m)
    steps = [mpmath.pi - mpmath.pi * a / b for a, b in fr]
    rows = []
    for j in range(1, 2 * m, 2):
        row = [mpmath.mpf(-1)] if m % 2 else []
        for st in steps:
            row += [mpmath.cos(j * st), mpmath.sin(j * st)]
        rows.append(row)
    rhs = [mpmath.mpf(0)] * (m - 1) + [mpmath.mpf(-1) / 2 if m % 2 else mpmath.mpf(1) / 2]
    x = mpmath.lu_solve(mpmath.matrix(rows), mpmath.matrix(rhs))
    x = [x[i] for i in range(m)]
    c0 = x[0] if m % 2 else None
    rest = x[1:] if m % 2 else x
    modes = [
        (mpmath.cos(mpmath.pi * a / b), mpmath.sin(mpmath.pi * a / b), rest[2 * k], rest[2 * k + 1])
        for k, (a, b) in enumerate(fr)
    ]
    return c0, modes


def _moment_cutoff(m: int, order: int) -> tuple[float, float]:
    """Half-width ``T`` with two-sided tail bound below ``TAIL_TOL``, and the bound itself."""
    spec = solve_kernel_coefficients(m)
    rho = eigen_components(m).slowest_decay
    amp = sum(abs(c) + abs(d) for c, d in zip(spec.c, spec.d)) + abs(spec.c0 or 0.0)
    T = max(40.0, 40.0 / rho)

    def tail(T):
        # |L(u)| <= amp e^{-rho u}; int_T^inf u^k e^{-rho u} du = Gamma(k+1, rho T) / rho^(k+1)
        return 2 * amp * float(mpmath.gammainc(order + 1, rho * T) / mpmath.mpf(rho) ** (order + 1))

    while tail(T) >= TAIL_TOL:
        T *= 1.25
    return T, tail(T)


@lru_cache(maxsize=None)
def moment_table(m: int, max_order: int | None = None) -> tuple:
    """Moments ``int tau^j L(|tau|) d tau`` for ``j = 0..max_order`` at ``beta = 1``.

    The integral over ``[-T, T]`` is folded onto ``[0, T]`` (odd orders cancel
    exactly) and evaluated by composite Gauss-Legendre quadrature on unit
    panels in extended precision, since the high-order moments are
    differences of terms as large as ``j! / rho^(j+1)``.
    """
    m = _check_order(m)
    if max_order is None:
        max_order = 2 * m - 1
    T, _ = _moment_cutoff(m, max_order)
    rho = eigen_components(m).slowest_decay
    scale = math.lgamma(max_order + 1) / math.log(10) + (max_order + 1) * math.log10(1 / rho)
    with mpmath.workdps(int(max(30, scale + 20))):
        c0, modes = _mp_coefficients(m)
        gl = mpmath.calculus.quadrature.GaussLegendre(mpmath.mp)
        nodes = gl.calc_nodes(4, mpmath.mp.prec)
        panels = int(math.ceil(T))
        sums = [mpmath.mpf(0)] * (max_order + 1)
        for i in range(panels):
            for x, w in nodes:
                tau = i + (x + 1) / 2
                val = c0 * mpmath.exp(-tau) if c0 is not None else mpmath.mpf(0)
                for mu, om, c, d in modes:
                    val += mpmath.exp(-mu * tau) * (c * mpmath.cos(om * tau) + d * mpmath.sin(om * tau))
                val *= w / 2
                power = mpmath.mpf(1)
                for j in range(max_order + 1):
                    sums[j] += power * val
                    power *= tau
        return tuple(0.0 if j % 2 else float(2 * sums[j]) for j in range(max_order + 1))


def kernel_moment(spec: KernelSpec, order: int, beta: float = 1.0) -> float:
    """``int tau^order K(tau) d tau`` for the kernel at scale ``beta``.

    Order 0 gives 1 and orders ``1..2m-1`` vanish; the first nonzero moment
    beyond those is of order ``2m``.
    """
    if int(order) != order or order < 0:
        raise InvalidOrderError(f"moment order must be a non-negative integer, got {order}")
    table = moment_table(spec.m, max(2 * spec.m - 1, int(order)))
    return table[int(order)] / beta ** order


# variance constant


def sigma_k_squared(spec: KernelSpec, beta: float, t: float, *, min_reach: float = 20.0) -> float:
    """``(1/beta) int_0^1 K(t, s)^2 ds``.

    Warns with :class:`BoundaryTruncationWarning` when ``t * beta`` or
    ``(1 - t) * beta`` is below ``min_reach``, since the value then differs
    from its interior limit :func:`sigma_k_squared_limit`.
    """
    if not 0 < t < 1:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    reach = beta * min(t, 1 - t)
    if reach < min_reach:
        warnings.warn(
            f"t={t} is within {reach:.3g}/beta of the boundary; the value is affected by truncation",
            BoundaryTruncationWarning,
            stacklevel=2,
        )

    def integrand(s):
        return kernel_profile(spec, beta, t - s) ** 2

    left = integrate.quad(integrand, 0.0, t, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    right = integrate.quad(integrand, t, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return (left + right) / beta


@lru_cache(maxsize=None)
def sigma_k_squared_limit(m: int) -> float:
    """``int_R L_1(|u|)^2 du``, the interior limit of :func:`sigma_k_squared`."""
    spec = solve_kernel_coefficients(m)
    val = integrate.quad(lambda u: kernel_profile(spec, 1.0, u) ** 2, 0, np.inf, epsabs=1e-15, limit=400)[0]
    return 2 * val
