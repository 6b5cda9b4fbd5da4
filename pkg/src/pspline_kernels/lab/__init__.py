"""Monte Carlo checks of the large-sample behaviour of P-spline fits."""

from .scenario import SimScenario, load_tolerances, nearest_divisor, shipped_scenario
from .studies import (
    StudyReport,
    anderson_darling_normal,
    compare_bias_reports,
    draw_noise,
    run_bias_study,
    run_clt_study,
    run_equivalence_study,
    run_rate_study,
    run_study,
)
from .truths import CATALOG, Truth, get_truth
