"""Predicted power and required cluster counts.

Three testing paradigms are supported: the Wald test on the treatment effect
with the sandwich variance (t or normal reference), and two robust score
approximations that differ in how the critical value is scaled when the score
variance shifts between hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .design import TrialDesign, build_balanced_design
from .survmodel import CensoringSpec, CorrelationSpec, HazardSpec
from .varengine import ScoreMoments, VarianceReport, score_moments, treatment_effect_variance

__all__ = [
    "METHODS",
    "PowerRequest",
    "PowerResult",
    "power_wald",
    "power_score_sm",
    "power_score_tang",
    "evaluate_power",
    "solve_clusters",
    "sensitivity_grid",
]

METHODS = ("wald_t", "score_sm", "score_tang")
DOF_RULES = ("n-1", "n-2", "normal")


@dataclass(frozen=True)
class PowerRequest:
    """Inputs for one power or sample-size evaluation."""

    design: TrialDesign
    hazard: HazardSpec
    censoring: CensoringSpec
    corr: CorrelationSpec
    beta1: float
    beta0: float = 0.0
    alpha: float = 0.05
    dof_rule: str = "n-2"
    methods: tuple[str, ...] = METHODS
    nodes: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError(f"significance level must be in (0,1), got {self.alpha}")
        if self.dof_rule not in DOF_RULES:
            raise ValueError(f"dof_rule must be one of {DOF_RULES}, got {self.dof_rule!r}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.corr.mode == "gicc" and any(m.startswith("score") for m in self.methods):
            raise ValueError(
                "score-based power needs the generative (kendall) correlation mode; "
                "direct g-ICCs support the Wald method only"
            )

    @property
    def drift(self) -> float:
        return self.beta1 - self.beta0


@dataclass(frozen=True)
class PowerResult:
    """Per-method power with the moments that produced it."""

    powers: dict[str, float]
    variance: VarianceReport
    score: ScoreMoments | None
    request: PowerRequest = field(repr=False)


def _dof(rule: str, n: int) -> int:
    offset = 1 if rule == "n-1" else 2
    dof = n - offset
    if dof <= 0:
        raise ValueError(f"t reference undefined: n={n} leaves {dof} degrees of freedom")
    return dof


def _wald_power_from_variance(req: PowerRequest, var_beta: float, n: int) -> float:
    ncp = abs(req.drift) / math.sqrt(var_beta)
    if req.dof_rule == "normal":
        return float(stats.norm.cdf(ncp - stats.norm.ppf(1 - req.alpha / 2)))
    dof = _dof(req.dof_rule, n)
    tq = stats.t.ppf(1 - req.alpha / 2, dof)
    return float(stats.t.cdf(ncp - tq, dof))


def power_wald(req: PowerRequest, variance: VarianceReport | None = None) -> float:
    """Power of the two-sided Wald test at the design's cluster count."""
    if variance is None:
        variance = treatment_effect_variance(
            req.design, req.hazard, req.censoring, req.corr, beta1=req.beta1, nodes=req.nodes
        )
    return _wald_power_from_variance(req, variance.var_beta, req.design.n)


def _score_ncp(req: PowerRequest, moments: ScoreMoments, n: int) -> float:
    return math.sqrt(n) * abs(moments.mean_alt) / math.sqrt(moments.sigma2_alt)


def power_score_sm(req: PowerRequest, moments: ScoreMoments | None = None) -> float:
    """Robust score power with the critical value on the alternative scale."""
    moments = _moments(req) if moments is None else moments
    z = stats.norm.ppf(1 - req.alpha / 2)
    return float(stats.norm.cdf(_score_ncp(req, moments, req.design.n) - z))


def power_score_tang(req: PowerRequest, moments: ScoreMoments | None = None) -> float:
    """Robust score power with the critical value rescaled by the null/alt SD ratio."""
    moments = _moments(req) if moments is None else moments
    z = stats.norm.ppf(1 - req.alpha / 2)
    ratio = math.sqrt(moments.sigma2_null / moments.sigma2_alt)
    return float(stats.norm.cdf(_score_ncp(req, moments, req.design.n) - z * ratio))


def _moments(req: PowerRequest) -> ScoreMoments:
    return score_moments(
        req.design, req.hazard, req.censoring, req.corr,
        beta0=req.beta0, beta1=req.beta1, nodes=req.nodes,
    )


def evaluate_power(req: PowerRequest) -> PowerResult:
    """Evaluate every requested method, sharing the quadrature work."""
    variance = treatment_effect_variance(
        req.design, req.hazard, req.censoring, req.corr, beta1=req.beta1, nodes=req.nodes
    )
    need_score = any(m.startswith("score") for m in req.methods)
    moments = _moments(req) if need_score else None
    powers: dict[str, float] = {}
    for method in req.methods:
        if method == "wald_t":
            powers[method] = power_wald(req, variance)
        elif method == "score_sm":
            powers[method] = power_score_sm(req, moments)
        elif method == "score_tang":
            powers[method] = power_score_tang(req, moments)
    return PowerResult(powers=powers, variance=variance, score=moments, request=req)


@dataclass(frozen=True)
class ClusterSolution:
    """Required clusters per method, solved on the normal scale and rounded up."""

    clusters: dict[str, int]
    exact: dict[str, float]
    target_power: float
    balanced_ok: dict[str, bool]
    variance: VarianceReport
    score: ScoreMoments | None


def solve_clusters(req: PowerRequest, target_power: float) -> ClusterSolution:
    """Smallest cluster count reaching ``target_power`` under each method.

    Closed-form continuous solve with normal quantiles; the result is rounded
    up to an integer without forcing divisibility by the number of sequences,
    and flagged when an unbalanced allocation would be needed. The moments are
    computed on the allocation fractions, which do not depend on n for a
    balanced design.
    """
    if not req.alpha < target_power < 1:
        raise ValueError(f"target power must lie in ({req.alpha}, 1), got {target_power}")
    if req.drift == 0:
        raise ValueError("target power is unreachable with a null effect size")
    z_a = stats.norm.ppf(1 - req.alpha / 2)
    z_p = stats.norm.ppf(target_power)

    variance = treatment_effect_variance(
        req.design, req.hazard, req.censoring, req.corr, beta1=req.beta1, nodes=req.nodes
    )
    need_score = any(m.startswith("score") for m in req.methods)
    moments = _moments(req) if need_score else None

    exact: dict[str, float] = {}
    for method in req.methods:
        if method == "wald_t":
            s = math.sqrt(variance.unit_variance)
            exact[method] = ((z_a * s + z_p * s) / abs(req.drift)) ** 2
        else:
            assert moments is not None
            s1 = math.sqrt(moments.sigma2_alt)
            s0 = s1 if method == "score_sm" else math.sqrt(moments.sigma2_null)
            exact[method] = ((z_a * s0 + z_p * s1) / abs(moments.mean_alt)) ** 2

    clusters = {m: max(int(math.ceil(v - 1e-9)), 1) for m, v in exact.items()}
    seqs = len(req.design.sequences)
    return ClusterSolution(
        clusters=clusters,
        exact=exact,
        target_power=target_power,
        balanced_ok={m: c % seqs == 0 for m, c in clusters.items()},
        variance=variance,
        score=moments,
    )


def sensitivity_grid(
    req: PowerRequest,
    tau_w_values,
    ratio_values,
) -> dict[str, np.ndarray]:
    """Per-method power over a (tau_w, tau_b/tau_w) grid for contour rendering.

    Rows index ``tau_w_values``, columns index ``ratio_values``; each cell
    re-evaluates the full moment machinery at ``tau_b = ratio * tau_w``.
    """
    tau_w_values = np.asarray(tau_w_values, dtype=float)
    ratio_values = np.asarray(ratio_values, dtype=float)
    if np.any(ratio_values > 1.0) or np.any(ratio_values < 0.0):
        raise ValueError("tau_b/tau_w ratios must lie in [0, 1]")
    if np.any(tau_w_values < 0.0) or np.any(tau_w_values >= 1.0):
        raise ValueError("tau_w values must lie in [0, 1)")
    grids = {m: np.empty((len(tau_w_values), len(ratio_values))) for m in req.methods}
    for i, tw in enumerate(tau_w_values):
        for k, r in enumerate(ratio_values):
            corr = CorrelationSpec(mode="kendall", tau_w=float(tw), tau_b=float(r * tw))
            cell = evaluate_power(replace(req, corr=corr))
            for m in req.methods:
                grids[m][i, k] = cell.powers[m]
    return grids


def balanced_request(
    J: int,
    m: int,
    n: int,
    hazard: HazardSpec,
    censoring: CensoringSpec,
    corr: CorrelationSpec,
    beta1: float,
    **kwargs,
) -> PowerRequest:
    """Convenience constructor for the canonical balanced design."""
    design = build_balanced_design(J, n, m=m)
    return PowerRequest(
        design=design, hazard=hazard, censoring=censoring, corr=corr, beta1=beta1, **kwargs
    )
