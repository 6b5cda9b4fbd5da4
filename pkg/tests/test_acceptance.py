"""Acceptance criteria, one test each; every test records a pass/fail line.

The lines are repeated in the terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from oracles import chebyshev_collocation
from pspline_kernels.boundary import (
    assemble_boundary_system,
    boundary_data_vector,
    boundary_kernel,
    boundary_kernel_m2_at_zero,
    finite_sample_gap,
    solve_boundary_coeffs,
    solve_boundary_value_problem,
)
from pspline_kernels.cli import main
from pspline_kernels.fit import FitConfig, fit, normal_equation_residual
from pspline_kernels.kernel import (
    assemble_coefficient_system,
    kernel_moment,
    kernel_profile,
    moment_table,
    solve_kernel_coefficients,
)
from pspline_kernels.lab import compare_bias_reports, load_tolerances, run_study, shipped_scenario
from pspline_kernels.penalty import build_difference_matrix
from test_kernel import closed_form

TOL = load_tolerances()


def clear_caches():
    solve_kernel_coefficients.cache_clear()
    moment_table.cache_clear()


@pytest.fixture(scope="module")
def bias_m2_report():
    start = time.perf_counter()
    report = run_study(shipped_scenario("bias_sin2pi_m2"))
    return report, time.perf_counter() - start


def test_criterion_01_closed_form_kernels(acceptance):
    clear_caches()
    start = time.perf_counter()
    u = np.linspace(0, 10, 1000)
    errors = {m: float(np.max(np.abs(kernel_profile(solve_kernel_coefficients(m), 1.0, u) - closed_form(m, u))))
              for m in (1, 2, 3, 4)}
    elapsed = time.perf_counter() - start
    ok = all(errors[m] < 1e-12 for m in (1, 2, 3)) and errors[4] < 5e-4 and elapsed < 1
    detail = ", ".join(f"m={m} err={e:.2e}" for m, e in errors.items()) + f", {elapsed:.2f}s"
    assert acceptance.record(1, "closed-form kernel reproduction", ok, detail)


def test_criterion_02_orthogonality_identities(acceptance):
    start = time.perf_counter()
    worst_even = worst_odd = 0.0
    diag_positive = True
    for m in (2, 4, 6, 8):
        A, _ = assemble_coefficient_system(m)
        worst_even = max(worst_even, float(np.max(np.abs(A @ A.T - m / 2 * np.eye(m)))))
    for m in (1, 3, 5, 7):
        A, _ = assemble_coefficient_system(m)
        G = A.T @ A
        diag_positive &= bool(np.all(np.diag(G) > 0))
        worst_odd = max(worst_odd, float(np.max(np.abs(G - np.diag(np.diag(G))))))
    elapsed = time.perf_counter() - start
    ok = worst_even < 1e-12 and worst_odd < 1e-12 and diag_positive and elapsed < 1
    detail = f"even residual {worst_even:.1e}, odd off-diagonal {worst_odd:.1e}, {elapsed:.2f}s"
    assert acceptance.record(2, "coefficient system orthogonality", ok, detail)


def test_criterion_03_moment_certificate(acceptance):
    clear_caches()
    start = time.perf_counter()
    worst = 0.0
    for m in range(1, 7):
        spec = solve_kernel_coefficients(m)
        worst = max(worst, abs(kernel_moment(spec, 0) - 1))
        worst = max([worst] + [abs(kernel_moment(spec, j)) for j in range(1, 2 * m)])
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 5
    assert acceptance.record(3, "kernel of order 2m (moments)", ok, f"max moment error {worst:.1e}, {elapsed:.2f}s")


def test_criterion_04_cumulative_difference_identity(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for m in (1, 2, 3, 4):
        dim = 2 * m + 6
        C = np.tril(np.ones((dim, dim)))
        D = np.diff(np.eye(dim), m, axis=0)
        assert np.array_equal(D, build_difference_matrix(m, dim))
        Cm = np.linalg.matrix_power(C, m)
        for _ in range(100):
            b = rng.standard_normal(dim)
            expected = (-1) ** m * np.concatenate([np.diff(b, m), np.zeros(m)])
            worst = max(worst, float(np.max(np.abs(Cm @ D.T @ D @ b - expected))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 5
    assert acceptance.record(4, "cumulative-sum difference identity", ok, f"max error {worst:.1e}, {elapsed:.2f}s")


def test_criterion_05_m2_boundary_kernel(acceptance):
    start = time.perf_counter()
    s = np.linspace(0, 1, 2001)
    reduced = {}
    for beta in (5.0, 10.0, 30.0):
        reduced[beta] = float(np.max(np.abs(boundary_kernel(2, beta, 0.0, s) - boundary_kernel_m2_at_zero(beta, s))))
    # the reduced form scales with beta; compare relative to sup |K_b| = sqrt(2) beta
    rel = max(err / (math.sqrt(2) * beta) for beta, err in reduced.items())
    gap4, _ = finite_sample_gap(4.0, 0.2)
    gap10, sup10 = finite_sample_gap(10.0, 0.2)
    elapsed = time.perf_counter() - start
    ok = rel < 1e-12 and gap10 < gap4 and gap10 < TOL["finite_sample_gap_ratio"] * sup10 and elapsed < 2
    detail = (f"t=0 reduced form rel err {rel:.1e}; gap(4)={gap4:.3f}, gap(10)={gap10:.4f}, "
              f"0.02 sup|K_b|={0.02 * sup10:.4f}, {elapsed:.2f}s")
    assert acceptance.record(5, "m=2 boundary kernel and finite-sample gap", ok, detail)


@pytest.mark.parametrize("m", [2, 3])
def test_criterion_06_exact_vs_asymptotic_boundary(m, acceptance):
    start = time.perf_counter()
    beta = 30.0
    g = Polynomial([0.3, -1.0, 2.0, 0.5, -0.7])

    def g_derivative(i, x):
        return (g.deriv(i) if i else g)(x)

    v = boundary_data_vector(m, beta, g, g_derivative)
    asym = solve_boundary_coeffs(assemble_boundary_system(m, beta, "asymptotic"), v).as_vector()
    exact = solve_boundary_coeffs(assemble_boundary_system(m, beta, "exact"), v).as_vector()
    coeff_gap = float(np.max(np.abs(asym - exact)))
    t = np.linspace(0, 1, 21)
    oracle_gap = float(np.max(np.abs(solve_boundary_value_problem(m, beta, g, g_derivative, t)
                                     - chebyshev_collocation(m, beta, g, t))))
    elapsed = time.perf_counter() - start
    ok = coeff_gap < 1e-8 and oracle_gap < 1e-8 and elapsed < 5
    detail = f"m={m}: |exact - asymptotic| = {coeff_gap:.1e}, |exact - collocation| = {oracle_gap:.1e}, {elapsed:.2f}s"
    assert acceptance.record(6, "exact vs asymptotic boundary solve", ok, detail)


def test_criterion_07_fit_correctness(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    count = 0
    while count < 20:
        K = int(rng.integers(2, 60))
        n = K * int(rng.integers(1, 15))
        p, m = int(rng.integers(0, 6)), int(rng.integers(1, 5))
        if K + p <= m:
            continue
        cfg = FitConfig(n, K, p, m, float(10 ** rng.uniform(-3, 6)))
        y = np.sin(5 * cfg.design_points()) + rng.standard_normal(n)
        worst = max(worst, normal_equation_residual(fit(y, cfg), y))
        count += 1
    const_err = 0.0
    for m in (1, 2, 3):
        for lam in (0.0, 1.0, 1e3):
            const_err = max(const_err, float(np.max(np.abs(fit(np.full(120, 3.5), FitConfig(120, 20, 3, m, lam)).coeffs - 3.5))))
    interp_err = 0.0
    for K, p in ((2, 2), (3, 3), (4, 4), (1, 3)):
        y = rng.standard_normal(K + p)
        interp_err = max(interp_err, float(np.max(np.abs(fit(y, FitConfig(K + p, K, p, 2, 0.0)).fitted_values - y))))
    elapsed = time.perf_counter() - start
    # constants are reproduced up to rounding in the factorization
    ok = worst < 1e-8 and const_err < 1e-10 and interp_err < 1e-8 and elapsed < 10
    detail = f"residual {worst:.1e}, constant {const_err:.1e}, interpolation {interp_err:.1e}, {elapsed:.2f}s"
    assert acceptance.record(7, "fit correctness", ok, detail)


def test_criterion_08_bias_law(bias_m2_report, acceptance):
    report, elapsed = bias_m2_report
    slope = report.summary["slope"]
    ok = abs(slope - (-1)) <= TOL["bias_slope_tolerance"] and elapsed < 180
    assert acceptance.record(8, "bias law slope", ok, f"slope {slope:.3f} (target -1 +- 0.25), {elapsed:.1f}s")


def test_criterion_09_clt_coverage(acceptance):
    start = time.perf_counter()
    lo, hi = TOL["coverage_interval"]
    coverages = {}
    for name in ("clt_m1", "clt_m2"):
        coverages[name] = run_study(shipped_scenario(name)).per_point["coverage"]
    elapsed = time.perf_counter() - start
    ok = all(lo <= c <= hi for cov in coverages.values() for c in cov) and elapsed < 300
    detail = "; ".join(f"{k}: {np.round(v, 4).tolist()}" for k, v in coverages.items()) + f", {elapsed:.1f}s"
    assert acceptance.record(9, "CI coverage", ok, detail)


def test_criterion_10_rate(acceptance):
    start = time.perf_counter()
    parts, ok = [], True
    for name in ("rate_m1", "rate_m2"):
        sc = shipped_scenario(name)
        m = sc.penalty_order
        target = -4 * m / (4 * m + 1)
        slope = run_study(sc).summary["slope"]
        doubled = run_study(sc.with_updates(knot_exponent=2 * sc.knot_exponent)).summary["slope"]
        ok &= abs(slope - target) <= TOL["rate_slope_tolerance"]
        ok &= abs(doubled - slope) < TOL["knot_exponent_slope_change"]
        parts.append(f"m={m} slope {slope:.3f} (target {target:.3f}), doubled knot exponent {doubled:.3f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 900
    assert acceptance.record(10, "MSE rate", ok, "; ".join(parts) + f", {elapsed:.1f}s")


def test_criterion_11_corrected_bias(bias_m2_report, acceptance):
    start = time.perf_counter()
    reference, _ = bias_m2_report
    corrected = run_study(shipped_scenario("bias_sin2pi_p3_m2"))
    cmp = compare_bias_reports(corrected, reference, TOL["two_sample_familywise_level"])
    elapsed = time.perf_counter() - start
    ok = cmp["consistent"] and elapsed < 180
    detail = (f"max |z| {cmp['max_abs_z']:.2f} vs Bonferroni {cmp['critical_value']:.2f}, "
              f"max |difference| {cmp['max_abs_difference']:.2e}, {elapsed:.1f}s")
    assert acceptance.record(11, "p != m corrected bias", ok, detail)


def test_criterion_12_determinism(tmp_path, acceptance):
    outputs = []
    for tag, workers in (("a", 1), ("b", 1), ("c", 4)):
        path = tmp_path / f"{tag}.json"
        code = main(["simulate", "--name", "bias_sin2pi_m2", "--seed", "31", "--workers", str(workers),
                     "--out", str(path)])
        assert code == 0
        outputs.append(path.read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    assert acceptance.record(12, "determinism", ok, "two runs with 1 worker and one with 4 are byte-identical" if ok
                             else "reports differ")
