"""Design-stage moments of the period-stratified working-independence score.

Everything here is an expectation over treatment assignment, censoring, and
correlated event times, evaluated by Gauss-Legendre quadrature: the limiting
at-risk ratio ``mu_j``, the marginal score variance pieces ``q0``, the
within/between-period score covariance pieces (four double integrals per
period pair), their allocation-weighted aggregates, the resulting variance of
the treatment effect estimator with its generalized ICCs, and the score mean
and variance under null and alternative data generation.

Two log hazard ratios appear throughout: ``data_beta`` drives the event-time
distributions (the data), while ``model_beta`` sits inside the at-risk
weights (the model evaluation point). They coincide for the estimator
variance; they differ when a null-evaluated score meets alternative data.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .design import TrialDesign
from .survmodel import CensoringSpec, CorrelationSpec, HazardSpec, censor_survival, gumbel_bivariate

__all__ = [
    "GICCProfile",
    "VarianceReport",
    "ScoreMoments",
    "QuadratureError",
    "default_nodes",
    "limit_mu",
    "q0",
    "q_cov",
    "upsilons",
    "treatment_effect_variance",
    "score_moments",
    "cluster_scores",
]

_NODES_ENV = "SWPOWER_QUAD_NODES"


class QuadratureError(RuntimeError):
    """Raised when node doubling moves an integral beyond tolerance."""


def default_nodes() -> int:
    """Quadrature order per axis; override via the SWPOWER_QUAD_NODES env var."""
    return int(os.environ.get(_NODES_ENV, "64"))


@lru_cache(maxsize=32)
def _gl_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def gl_nodes(n: int, upper: float, gamma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on (0, upper) under the substitution s = upper * x**gamma.

    ``gamma > 1`` clusters nodes near zero; the pair density of the dependence
    model has an integrable corner singularity at the time origin, and cubing
    the variable restores fast convergence of the tensor-product rule there.
    """
    x, w = _gl_unit(n)
    if gamma == 1.0:
        return x * upper, w * upper
    return upper * x**gamma, w * upper * gamma * x ** (gamma - 1.0)


_CORNER_GAMMA = 3.0


def limit_mu(
    s,
    j: int,
    design: TrialDesign,
    hazard: HazardSpec,
    data_beta: float | None = None,
    model_beta: float | None = None,
):
    """Limiting at-risk ratio for period ``j`` at time ``s``.

    The survival factors follow ``data_beta`` while the exponential weights
    use ``model_beta``; with both equal this is the correctly-specified limit.
    The censoring factor and cluster-period size cancel in the ratio.
    """
    s = np.asarray(s, dtype=float)
    db = hazard.beta if data_beta is None else data_beta
    mb = db if model_beta is None else model_beta
    p = design.marginal_treat_prob(j)
    lam = hazard.baseline_rate(j)
    num = p * np.exp(-lam * math.exp(db) * s) * math.exp(mb)
    den = num + (1.0 - p) * np.exp(-lam * s)
    return num / den


@dataclass(frozen=True)
class GICCProfile:
    """Generalized ICCs with the score-moment sums they are built from."""

    rho_w: float
    rho_b: float
    sum_upsilon0: float
    sum_upsilon1_within: float
    sum_upsilon1_between: float


@dataclass(frozen=True)
class VarianceReport:
    """Variance of the treatment effect estimator and its ingredients.

    ``var_beta`` is the sandwich variance at the design's cluster count;
    ``unit_variance`` is ``n * var_beta``, the n-free quantity used when
    back-solving for the number of clusters. ``model_based`` is the inverse
    information (no-clustering variance) and ``meat`` the per-cluster score
    variance.
    """

    var_beta: float
    model_based: float
    meat: float
    design_effect: float
    giccs: GICCProfile
    n: int
    m: int
    J: int

    @property
    def unit_variance(self) -> float:
        return self.var_beta * self.n


@dataclass(frozen=True)
class ScoreMoments:
    """Per-cluster moments of the null-evaluated score.

    ``mean_alt`` is the expectation under alternative data; ``sigma2_null``
    and ``sigma2_alt`` are the per-cluster score variances with data generated
    under the null and the alternative, respectively. The kappas are the
    hypothesis-specific generalized ICCs entering each variance.
    """

    mean_alt: float
    sigma2_null: float
    sigma2_alt: float
    kappa_null: tuple[float, float]
    kappa_alt: tuple[float, float]
    m: int
    J: int


class _Moments:
    """Shared per-period quadrature state for one (data_beta, model_beta) pair."""

    def __init__(
        self,
        design: TrialDesign,
        hazard: HazardSpec,
        censoring: CensoringSpec,
        data_beta: float,
        model_beta: float,
        nodes: int,
    ):
        hazard.check_periods(design.J)
        self.design = design
        self.hazard = hazard
        self.data_beta = data_beta
        self.model_beta = model_beta
        self.s, self.w = gl_nodes(nodes, censoring.c_star, gamma=_CORNER_GAMMA)
        self.G = censor_survival(self.s, censoring)
        self.mu = {
            j: limit_mu(self.s, j, design, hazard, data_beta, model_beta)
            for j in range(1, design.J + 1)
        }

    def rate(self, j: int, z: int) -> float:
        return self.hazard.rate(j, z, self.data_beta)

    def q0(self, j: int, z: int) -> float:
        lam = self.rate(j, z)
        dens = lam * np.exp(-lam * self.s)
        return float(np.sum(self.w * self.G * (z - self.mu[j]) ** 2 * dens))

    def score_mean(self, j: int, z: int) -> float:
        """E of one individual's observed-jump score term, given the arm."""
        lam = self.rate(j, z)
        dens = lam * np.exp(-lam * self.s)
        return float(np.sum(self.w * self.G * (z - self.mu[j]) * dens))

    def nu(self, j: int, z: int) -> float:
        """Information integrand: G * mu * (1 - mu) against the event density."""
        lam = self.rate(j, z)
        dens = lam * np.exp(-lam * self.s)
        return float(np.sum(self.w * self.G * self.mu[j] * (1.0 - self.mu[j]) * dens))

    def q_cov(self, j: int, l: int, zj: int, zl: int, theta: float) -> float:
        lam_j = self.rate(j, zj)
        lam_l = self.rate(l, zl)
        S = self.s[:, None]
        T = self.s[None, :]
        F, dF_ds, dF_dt, dens = gumbel_bivariate(lam_j * S, lam_l * T, lam_j, lam_l, theta)
        base = (
            (self.w * self.G)[:, None]
            * (self.w * self.G)[None, :]
            * (zj - self.mu[j])[:, None]
            * (zl - self.mu[l])[None, :]
        )
        # four-term martingale covariance: jumps, each jump against the other
        # compensator, and both compensators
        return float(np.sum(base * (dens + dF_dt * lam_j + dF_ds * lam_l + F * lam_j * lam_l)))


@dataclass(frozen=True)
class Upsilons:
    """Allocation-weighted aggregates over one beta configuration."""

    upsilon0: np.ndarray            # per period
    upsilon1: np.ndarray            # per period pair, diagonal = within-period
    nu0: np.ndarray                 # per period, information form
    mean_parts: np.ndarray          # per period, allocation-weighted score mean

    @property
    def sum0(self) -> float:
        return float(self.upsilon0.sum())

    @property
    def sum1_within(self) -> float:
        return float(np.trace(self.upsilon1))

    @property
    def sum1_between(self) -> float:
        return float(self.upsilon1.sum() - np.trace(self.upsilon1))

    def giccs(self) -> GICCProfile:
        J = len(self.upsilon0)
        return GICCProfile(
            rho_w=self.sum1_within / self.sum0,
            rho_b=self.sum1_between / ((J - 1) * self.sum0),
            sum_upsilon0=self.sum0,
            sum_upsilon1_within=self.sum1_within,
            sum_upsilon1_between=self.sum1_between,
        )


def _arm_probs(design: TrialDesign, j: int) -> dict[int, float]:
    p = design.marginal_treat_prob(j)
    return {0: 1.0 - p, 1: p}


def upsilons(
    design: TrialDesign,
    hazard: HazardSpec,
    censoring: CensoringSpec,
    corr: CorrelationSpec,
    data_beta: float | None = None,
    model_beta: float | None = None,
    nodes: int | None = None,
    marginal_only: bool = False,
) -> Upsilons:
    """Aggregate the q integrals with the design's allocation probabilities.

    ``marginal_only`` skips every covariance integral (used by the direct
    g-ICC path, which needs no generative dependence model).
    """
    nodes = default_nodes() if nodes is None else nodes
    db = hazard.beta if data_beta is None else data_beta
    mb = db if model_beta is None else model_beta
    mom = _Moments(design, hazard, censoring, db, mb, nodes)
    J = design.J

    u0 = np.zeros(J)
    nu0 = np.zeros(J)
    means = np.zeros(J)
    for j in range(1, J + 1):
        for z, pz in _arm_probs(design, j).items():
            if pz == 0.0:
                continue
            u0[j - 1] += pz * mom.q0(j, z)
            nu0[j - 1] += pz * mom.nu(j, z)
            means[j - 1] += pz * mom.score_mean(j, z)

    u1 = np.zeros((J, J))
    if not marginal_only:
        th_w = corr.theta_within
        th_b = corr.theta_between
        for j in range(1, J + 1):
            for z, pz in _arm_probs(design, j).items():
                if pz == 0.0:
                    continue
                u1[j - 1, j - 1] += pz * mom.q_cov(j, j, z, z, th_w)
        for j in range(1, J + 1):
            for l in range(j + 1, J + 1):
                joint = design.joint_treat_probs(j, l)
                val = 0.0
                for (a, b), p_ab in joint.items():
                    if p_ab == 0.0:
                        continue
                    val += p_ab * mom.q_cov(j, l, a, b, th_b)
                # relabeling the pair swaps the integration coordinates only
                u1[j - 1, l - 1] = val
                u1[l - 1, j - 1] = val

    return Upsilons(upsilon0=u0, upsilon1=u1, nu0=nu0, mean_parts=means)


def _design_effect(m: int, J: int, rho_w: float, rho_b: float) -> float:
    return 1.0 + (m - 1) * rho_w + m * (J - 1) * rho_b


def q0(
    j: int,
    z: int,
    design: TrialDesign,
    hazard: HazardSpec,
    censoring: CensoringSpec,
    data_beta: float | None = None,
    model_beta: float | None = None,
    nodes: int | None = None,
) -> float:
    """Marginal score variance piece for one period and arm."""
    nodes = default_nodes() if nodes is None else nodes
    db = hazard.beta if data_beta is None else data_beta
    mb = db if model_beta is None else model_beta
    return _Moments(design, hazard, censoring, db, mb, nodes).q0(j, z)


def q_cov(
    j: int,
    l: int,
    zj: int,
    zl: int,
    design: TrialDesign,
    hazard: HazardSpec,
    censoring: CensoringSpec,
    corr: CorrelationSpec,
    data_beta: float | None = None,
    model_beta: float | None = None,
    nodes: int | None = None,
) -> float:
    """Score covariance of two individuals (periods j and l, arms zj and zl)."""
    nodes = default_nodes() if nodes is None else nodes
    db = hazard.beta if data_beta is None else data_beta
    mb = db if model_beta is None else model_beta
    theta = corr.theta_within if j == l else corr.theta_between
    return _Moments(design, hazard, censoring, db, mb, nodes).q_cov(j, l, zj, zl, theta)


def treatment_effect_variance(
    design: TrialDesign,
    hazard: HazardSpec,
    censoring: CensoringSpec,
    corr: CorrelationSpec,
    beta1: float | None = None,
    nodes: int | None = None,
) -> VarianceReport:
    """Sandwich variance of the treatment effect estimator at the design stage.

    In kendall mode the g-ICCs come out of the covariance integrals; in gicc
    mode the user-supplied values are injected directly and only the marginal
    integrals are evaluated.
    """
    beta1 = hazard.beta if beta1 is None else beta1
    direct = corr.mode == "gicc"
    ups = upsilons(
        design, hazard, censoring, corr,
        data_beta=beta1, model_beta=beta1, nodes=nodes, marginal_only=direct,
    )
    J, m, n = design.J, design.m, design.n
    if direct:
        rho_w, rho_b = corr.rho_w, corr.rho_b
        gicc = GICCProfile(
            rho_w=rho_w,
            rho_b=rho_b,
            sum_upsilon0=ups.sum0,
            sum_upsilon1_within=rho_w * ups.sum0,
            sum_upsilon1_between=rho_b * (J - 1) * ups.sum0,
        )
    else:
        gicc = ups.giccs()
    de = _design_effect(m, J, gicc.rho_w, gicc.rho_b)
    model_based = 1.0 / (n * m * ups.sum0)
    return VarianceReport(
        var_beta=model_based * de,
        model_based=model_based,
        meat=m * ups.sum0 * de,
        design_effect=de,
        giccs=gicc,
        n=n,
        m=m,
        J=J,
    )


def score_moments(
    design: TrialDesign,
    hazard: HazardSpec,
    censoring: CensoringSpec,
    corr: CorrelationSpec,
    beta0: float = 0.0,
    beta1: float | None = None,
    nodes: int | None = None,
) -> ScoreMoments:
    """Mean and variance of the null-evaluated per-cluster score.

    The score drift ``mean_alt`` mixes hypotheses: data generated at ``beta1``
    against at-risk weights held at ``beta0``. The variances follow the
    contiguous-alternative convention: each one is the correctly-specified
    per-cluster score variance evaluated at its own hypothesis (``beta0`` for
    the null, ``beta1`` for the alternative), which is also what the
    simulation oracle measures when the working model matches the data.
    """
    if corr.mode != "kendall":
        raise ValueError("score moments need the generative (kendall) correlation mode")
    beta1 = hazard.beta if beta1 is None else beta1
    J, m = design.J, design.m

    null = upsilons(design, hazard, censoring, corr, data_beta=beta0, model_beta=beta0, nodes=nodes)
    alt = upsilons(design, hazard, censoring, corr, data_beta=beta1, model_beta=beta1, nodes=nodes)
    mixed = upsilons(
        design, hazard, censoring, corr,
        data_beta=beta1, model_beta=beta0, nodes=nodes, marginal_only=True,
    )

    g0, g1 = null.giccs(), alt.giccs()
    sigma2_null = m * null.sum0 * _design_effect(m, J, g0.rho_w, g0.rho_b)
    sigma2_alt = m * alt.sum0 * _design_effect(m, J, g1.rho_w, g1.rho_b)
    mean_alt = m * float(mixed.mean_parts.sum())
    return ScoreMoments(
        mean_alt=mean_alt,
        sigma2_null=sigma2_null,
        sigma2_alt=sigma2_alt,
        kappa_null=(g0.rho_w, g0.rho_b),
        kappa_alt=(g1.rho_w, g1.rho_b),
        m=m,
        J=J,
    )


def cluster_scores(
    times: np.ndarray,
    events: np.ndarray,
    periods: np.ndarray,
    treatments: np.ndarray,
    clusters: np.ndarray,
    design: TrialDesign,
    hazard: HazardSpec,
    model_beta: float,
    data_beta: float | None = None,
    nodes: int = 32,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster scores against the analytic at-risk limit.

    Returns ``(martingale_form, jump_form)`` per cluster: the jump form sums
    the observed-event terms only (its mean is the score drift), while the
    martingale form subtracts each individual's compensator under the
    data-generating intensity (mean zero by construction, so its variance is
    the per-cluster score variance). Used to cross-check the quadrature
    moments against simulation.
    """
    db = hazard.beta if data_beta is None else data_beta
    x, w = _gl_unit(nodes)
    labels, cluster_idx = np.unique(clusters, return_inverse=True)
    jump = np.zeros(len(labels))
    mart = np.zeros(len(labels))
    for j in range(1, design.J + 1):
        sel = periods == j
        if not np.any(sel):
            continue
        t_j = times[sel]
        z_j = treatments[sel].astype(float)
        d_j = events[sel].astype(float)
        mu_at_t = limit_mu(t_j, j, design, hazard, data_beta=db, model_beta=model_beta)
        jumps = d_j * (z_j - mu_at_t)
        # int_0^t mu_j via Gauss-Legendre on (0, t), vectorized over rows
        mu_int = t_j * (
            limit_mu(np.outer(t_j, x), j, design, hazard, data_beta=db, model_beta=model_beta) @ w
        )
        lam = hazard.baseline_rate(j) * np.exp(db * z_j)
        comp = lam * (z_j * t_j - mu_int)
        np.add.at(jump, cluster_idx[sel], jumps)
        np.add.at(mart, cluster_idx[sel], jumps - comp)
    return mart, jump
