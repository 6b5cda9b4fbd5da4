"""Monte Carlo studies of the kernel representation of P-spline fits.

Replication ``r`` of sample size index ``i`` draws its noise from
``PCG64(SeedSequence(seed, spawn_key=(i, r)))``, so every replication is
reproducible on its own. Replications are processed in fixed blocks of
:data:`BLOCK_SIZE`; blocks may run on several threads, and results are
gathered in replication order, so the output does not depend on the number
of workers.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .. import __version__
from ..basis import design_matrix_sparse
from ..exceptions import BoundaryTruncationWarning, ConfigurationError, UnsupportedError
from ..fit import PSplineSmoother, correction_matrix
from ..kernel import eval_kernel, sigma_k_squared, solve_kernel_coefficients
from .scenario import SimScenario
from .truths import get_truth

BLOCK_SIZE = 50
MIN_BIAS_REPLICATIONS = 200
MIN_CLT_REPLICATIONS = 1000
MIN_RATE_LADDER = 4


@dataclass
class StudyReport:
    """Aggregates of one study; ``per_point`` holds arrays aligned with ``grid``."""

    study: str
    scenario: dict
    replications: int
    grid: list
    summary: dict = field(default_factory=dict)
    per_point: dict = field(default_factory=dict)
    per_size: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(
            {
                "study": self.study,
                "scenario": self.scenario,
                "replications": self.replications,
                "grid": self.grid,
                "summary": self.summary,
                "per_point": self.per_point,
                "per_size": self.per_size,
                "metadata": self.metadata,
            }
        )

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True, allow_nan=True)

    def point_table(self):
        """Column names and rows of the per-grid-point aggregates."""
        names = ["t"] + sorted(self.per_point)
        cols = [self.grid] + [self.per_point[k] for k in names[1:]]
        return names, [list(row) for row in zip(*cols)]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def replication_rng(seed: int, size_index: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(size_index, replication))))


def draw_noise(seed: int, size_index: int, replications, n: int, sigma: float) -> np.ndarray:
    """Noise matrix of shape ``(len(replications), n)``, one seeded stream per row."""
    out = np.empty((len(replications), n))
    for row, r in enumerate(replications):
        out[row] = sigma * replication_rng(seed, size_index, r).standard_normal(n)
    return out


def run_replications(scenario: SimScenario, n: int, size_index: int, per_block, workers: int = 1):
    """Apply ``per_block(coeffs, noise)`` to blocks of replications and stack the results.

    ``coeffs`` has shape ``(block, K + p)`` and ``noise`` ``(block, n)``; the
    return values of ``per_block`` (arrays with the block on axis 0) are
    concatenated in replication order.
    """
    cfg = scenario.fit_config(n)
    smoother = PSplineSmoother(cfg)
    truth = get_truth(scenario.truth)
    signal = truth(cfg.design_points())
    R = scenario.replications
    blocks = [range(s, min(s + BLOCK_SIZE, R)) for s in range(0, R, BLOCK_SIZE)]

    def work(block):
        noise = draw_noise(scenario.seed, size_index, block, n, scenario.sigma)
        coeffs = smoother.fit_many(signal[None, :] + noise)
        return per_block(coeffs, noise)

    if workers is None or workers <= 1:
        parts = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, blocks))
    return cfg, np.concatenate(parts, axis=0)


def bias_law(scenario: SimScenario, alpha: float, t) -> np.ndarray:
    """Leading bias ``(-1)^(m-1) alpha f^(2m)(t)``."""
    m = scenario.penalty_order
    return (-1) ** (m - 1) * alpha * get_truth(scenario.truth).derivative(2 * m, np.asarray(t, dtype=float))


def _grid(scenario: SimScenario) -> np.ndarray:
    return np.array(scenario.grid, dtype=float)


def _metadata(scenario: SimScenario, cfgs) -> dict:
    return {
        "package_version": __version__,
        "block_size": BLOCK_SIZE,
        "rng": "PCG64 via SeedSequence(seed, spawn_key=(size_index, replication))",
        "fits": [
            {
                "n": c.n,
                "num_intervals": c.num_intervals,
                "degree": c.degree,
                "penalty_order": c.penalty_order,
                "lambda_star": c.lambda_star,
                "alpha": c.alpha,
                "beta": c.beta,
            }
            for c in cfgs
        ],
    }


def run_equivalence_study(scenario: SimScenario, workers: int = 1) -> StudyReport:
    """Compare each fit with its kernel approximation on the same noise draw.

    The approximation is ``f(t) + (-1)^(m-1) alpha f^(2m)(t) + (1/n) sum_i K(t, t_i) eps_i``
    with the interior kernel. Reports the sup-norm gap over the grid per
    replication (median, mean, max) and per-point mean and sd of the difference.
    """
    if scenario.degree != scenario.penalty_order:
        raise UnsupportedError("the equivalence study needs degree == penalty_order; use the bias study")
    (n,) = scenario.sizes
    t = _grid(scenario)
    cfg = scenario.fit_config(n)
    spec = solve_kernel_coefficients(cfg.penalty_order)
    weights = eval_kernel(spec, cfg.beta, t[:, None], cfg.design_points()[None, :]) / n
    base = get_truth(scenario.truth)(t) + bias_law(scenario, cfg.alpha, t)
    Xg = design_matrix_sparse(cfg.grid, t)

    def per_block(coeffs, noise):
        return (Xg @ coeffs.T).T - (base[None, :] + noise @ weights.T)

    cfg, diff = run_replications(scenario, n, 0, per_block, workers)
    gaps = np.max(np.abs(diff), axis=1)
    return StudyReport(
        "equivalence",
        scenario.to_dict(),
        scenario.replications,
        list(t),
        summary={
            "median_gap": float(np.median(gaps)),
            "mean_gap": float(np.mean(gaps)),
            "max_gap": float(np.max(gaps)),
            "alpha": cfg.alpha,
            "beta": cfg.beta,
        },
        per_point={"mean_difference": diff.mean(axis=0), "sd_difference": _sd(diff)},
        metadata=_metadata(scenario, [cfg]),
    )


def _sd(values: np.ndarray) -> np.ndarray:
    if values.shape[0] < 2:
        return np.zeros(values.shape[1])
    return values.std(axis=0, ddof=1)


def run_bias_study(scenario: SimScenario, workers: int = 1) -> StudyReport:
    """Average error curve against the leading bias law.

    When ``degree != penalty_order`` the exact correction between the fit and
    its degree-``m`` companion is subtracted first. The slope and intercept
    of the least-squares line of mean error on ``alpha f^(2m)(t)`` are
    reported (``nan`` when the law vanishes on the grid).
    """
    if scenario.replications < MIN_BIAS_REPLICATIONS:
        raise ConfigurationError(f"the bias study needs at least {MIN_BIAS_REPLICATIONS} replications")
    (n,) = scenario.sizes
    t = _grid(scenario)
    cfg = scenario.fit_config(n)
    truth = get_truth(scenario.truth)
    Xg = design_matrix_sparse(cfg.grid, t)
    if cfg.degree != cfg.penalty_order:
        evaluator = Xg.toarray() - correction_matrix(cfg, t)
    else:
        evaluator = Xg
    ft = truth(t)

    def per_block(coeffs, noise):
        return (evaluator @ coeffs.T).T - ft[None, :]

    cfg, err = run_replications(scenario, n, 0, per_block, workers)
    mean = err.mean(axis=0)
    se = _sd(err) / math.sqrt(err.shape[0])
    scaled = cfg.alpha * truth.derivative(2 * cfg.penalty_order, t)
    if np.ptp(scaled) > 0:
        slope, intercept = np.polyfit(scaled, mean, 1)
    else:
        slope = intercept = math.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, mean / se, np.where(mean == 0, 0.0, np.inf))
    return StudyReport(
        "bias",
        scenario.to_dict(),
        scenario.replications,
        list(t),
        summary={
            "slope": float(slope),
            "intercept": float(intercept),
            "expected_slope": float((-1) ** (cfg.penalty_order - 1)),
            "max_abs_bias_z": float(np.max(np.abs(z))),
            "alpha": cfg.alpha,
            "beta": cfg.beta,
            "corrected": cfg.degree != cfg.penalty_order,
        },
        per_point={
            "mean_error": mean,
            "mc_standard_error": se,
            "scaled_derivative": scaled,
            "bias_law": bias_law(scenario, cfg.alpha, t),
        },
        metadata=_metadata(scenario, [cfg]),
    )


def compare_bias_reports(a: StudyReport, b: StudyReport, familywise: float = 0.01) -> dict:
    """Two-sample comparison of mean error curves from independent runs.

    Returns the pointwise z statistics, their maximum absolute value and the
    Bonferroni critical value for the given family-wise level.
    """
    if a.grid != b.grid:
        raise ConfigurationError("reports must share the same grid")
    ma, mb = np.asarray(a.per_point["mean_error"]), np.asarray(b.per_point["mean_error"])
    sa, sb = np.asarray(a.per_point["mc_standard_error"]), np.asarray(b.per_point["mc_standard_error"])
    z = (ma - mb) / np.sqrt(sa ** 2 + sb ** 2)
    crit = float(special.ndtri(1 - familywise / (2 * len(z))))
    return {
        "z": z.tolist(),
        "max_abs_z": float(np.max(np.abs(z))),
        "critical_value": crit,
        "max_abs_difference": float(np.max(np.abs(ma - mb))),
        "consistent": bool(np.max(np.abs(z)) <= crit),
    }


def anderson_darling_normal(z) -> float:
    """Anderson-Darling statistic of ``z`` against the standard normal (no estimated parameters)."""
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    logcdf = special.log_ndtr(z)
    logsf = special.log_ndtr(-z[::-1])
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (logcdf + logsf)) / n)


def run_clt_study(scenario: SimScenario, workers: int = 1, level: float = 0.95) -> StudyReport:
    """Standardized errors ``sqrt(n/beta) (f_hat - f - bias) / (sigma sigma_K)`` per grid point.

    ``sigma_K^2`` is the finite-``beta`` variance integral from the kernel
    module and ``bias`` the leading bias law. Reports the coverage of the
    nominal ``level`` interval and the Anderson-Darling statistic per point.
    """
    if scenario.replications < MIN_CLT_REPLICATIONS:
        raise ConfigurationError(f"the CLT study needs at least {MIN_CLT_REPLICATIONS} replications")
    if scenario.sigma <= 0:
        raise ConfigurationError("the CLT study needs sigma > 0")
    (n,) = scenario.sizes
    t = _grid(scenario)
    cfg = scenario.fit_config(n)
    spec = solve_kernel_coefficients(cfg.penalty_order)
    with warnings.catch_warnings():
        # the finite-beta integral is wanted here, boundary truncation included
        warnings.simplefilter("ignore", BoundaryTruncationWarning)
        s2 = np.array([sigma_k_squared(spec, cfg.beta, x) for x in t])
    centre = get_truth(scenario.truth)(t) + bias_law(scenario, cfg.alpha, t)
    scale = math.sqrt(n / cfg.beta) / (scenario.sigma * np.sqrt(s2))
    Xg = design_matrix_sparse(cfg.grid, t)

    def per_block(coeffs, noise):
        return ((Xg @ coeffs.T).T - centre[None, :]) * scale[None, :]

    cfg, z = run_replications(scenario, n, 0, per_block, workers)
    crit = float(special.ndtri(0.5 + level / 2))
    coverage = np.mean(np.abs(z) <= crit, axis=0)
    ad = np.array([anderson_darling_normal(z[:, j]) for j in range(z.shape[1])])
    return StudyReport(
        "clt",
        scenario.to_dict(),
        scenario.replications,
        list(t),
        summary={
            "level": level,
            "min_coverage": float(coverage.min()),
            "max_coverage": float(coverage.max()),
            "max_anderson_darling": float(ad.max()),
            "alpha": cfg.alpha,
            "beta": cfg.beta,
        },
        per_point={
            "coverage": coverage,
            "z_mean": z.mean(axis=0),
            "z_sd": _sd(z),
            "anderson_darling": ad,
            "sigma_k_squared": s2,
        },
        metadata=_metadata(scenario, [cfg]),
    )


def run_rate_study(scenario: SimScenario, workers: int = 1) -> StudyReport:
    """Slope of log mean squared error against log n over a ladder of sample sizes.

    The MSE at each size averages ``(f_hat(t) - f(t))^2`` over replications
    and grid points. The slope and its standard error come from ordinary
    least squares on the log-log points.
    """
    sizes = scenario.sizes
    if len(sizes) < MIN_RATE_LADDER:
        raise ConfigurationError(f"a rate study needs at least {MIN_RATE_LADDER} sample sizes")
    t = _grid(scenario)
    ft = get_truth(scenario.truth)(t)
    rows, cfgs = [], []
    for idx, n in enumerate(sizes):
        cfg = scenario.fit_config(n)
        Xg = design_matrix_sparse(cfg.grid, t)

        def per_block(coeffs, noise, Xg=Xg):
            return (Xg @ coeffs.T).T - ft[None, :]

        cfg, err = run_replications(scenario, n, idx, per_block, workers)
        cfgs.append(cfg)
        mse = float(np.mean(err ** 2))
        rows.append(
            {
                "n": n,
                "num_intervals": cfg.num_intervals,
                "alpha": cfg.alpha,
                "beta": cfg.beta,
                "mse": mse,
                "squared_bias": float(np.mean(err.mean(axis=0) ** 2)),
                "variance": float(np.mean(err.var(axis=0))),
            }
        )
    x = np.log([r["n"] for r in rows])
    y = np.log([r["mse"] for r in rows])
    (slope, intercept), cov = np.polyfit(x, y, 1, cov="unscaled")
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else math.nan
    m = scenario.penalty_order
    return StudyReport(
        "rate",
        scenario.to_dict(),
        scenario.replications,
        list(t),
        summary={
            "slope": float(slope),
            "slope_se": float(math.sqrt(cov[0, 0] * s2)),
            "intercept": float(intercept),
            "expected_slope": -4 * m / (4 * m + 1),
        },
        per_size=rows,
        metadata=_metadata(scenario, cfgs),
    )


RUNNERS = {
    "equivalence": run_equivalence_study,
    "bias": run_bias_study,
    "clt": run_clt_study,
    "rate": run_rate_study,
}


def run_study(scenario: SimScenario, workers: int = 1) -> StudyReport:
    """Dispatch on ``scenario.study``."""
    return RUNNERS[scenario.study](scenario, workers=workers)
