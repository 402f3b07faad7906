"""Power, sample size, and Monte Carlo validation for stepped wedge trials
with right-censored time-to-event outcomes."""

from .design import TrialDesign, build_balanced_design, parse_design_matrix, render_design_matrix
from .survmodel import CensoringSpec, CorrelationSpec, HazardSpec, solve_lambda0
from .varengine import (
    GICCProfile,
    ScoreMoments,
    VarianceReport,
    score_moments,
    treatment_effect_variance,
)
from .power import (
    PowerRequest,
    PowerResult,
    evaluate_power,
    power_score_sm,
    power_score_tang,
    power_wald,
    sensitivity_grid,
    solve_clusters,
)
from .simgen import TrialDataset, empirical_kendall_tau, generate_trial, sample_positive_stable
from .coxfit import StratifiedCoxPH, fit_cox, robust_score_test, robust_variance, wald_t_test
from .harness import SimConfig, SimResult, run_study

__version__ = "0.1.0"

__all__ = [
    "TrialDesign",
    "build_balanced_design",
    "parse_design_matrix",
    "render_design_matrix",
    "CensoringSpec",
    "CorrelationSpec",
    "HazardSpec",
    "solve_lambda0",
    "GICCProfile",
    "ScoreMoments",
    "VarianceReport",
    "score_moments",
    "treatment_effect_variance",
    "PowerRequest",
    "PowerResult",
    "evaluate_power",
    "power_wald",
    "power_score_sm",
    "power_score_tang",
    "sensitivity_grid",
    "solve_clusters",
    "TrialDataset",
    "generate_trial",
    "empirical_kendall_tau",
    "sample_positive_stable",
    "StratifiedCoxPH",
    "fit_cox",
    "robust_variance",
    "robust_score_test",
    "wald_t_test",
    "SimConfig",
    "SimResult",
    "run_study",
]
