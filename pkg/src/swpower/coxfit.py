"""Period-stratified marginal Cox fitting and cluster-robust inference.

The model has one unspecified baseline hazard per period and a single
treatment log hazard ratio, estimated under working independence: risk sets
pool all clusters within a period stratum. Clustering is handled afterwards
through the sandwich variance built from cluster-level score residuals, with
optional leverage-based small-sample corrections, and through a robust score
test evaluated at the null without iterating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .simgen import TrialDataset

__all__ = [
    "CoxFit",
    "TestResult",
    "StratifiedCoxPH",
    "fit_cox",
    "robust_variance",
    "wald_t_test",
    "robust_score_test",
]

CORRECTIONS = ("none", "FG", "KC", "MD")
GROUPINGS = ("cluster", "cluster-period")


@dataclass(frozen=True)
class _Stratum:
    """Pre-sorted per-period data: ascending observed time."""

    time: np.ndarray
    event: np.ndarray
    z: np.ndarray
    rows: np.ndarray  # indices into the original dataset


def _strata(dataset: TrialDataset) -> list[_Stratum]:
    out = []
    for j in np.unique(dataset.period):
        sel = np.flatnonzero(dataset.period == j)
        order = np.argsort(dataset.time[sel], kind="stable")
        rows = sel[order]
        out.append(
            _Stratum(
                time=dataset.time[rows],
                event=dataset.event[rows].astype(float),
                z=dataset.treatment[rows].astype(float),
                rows=rows,
            )
        )
    return out


def _stratum_quantities(st: _Stratum, beta: float):
    """Score, information, log-likelihood, and per-event risk-set ratios.

    Breslow handling of ties: all events at one time share the risk set that
    includes every tied observation.
    """
    w = np.exp(beta * st.z)
    # reverse cumulative risk sums at each sorted position
    rs0 = np.cumsum(w[::-1])[::-1]
    rs1 = np.cumsum((w * st.z)[::-1])[::-1]
    # risk set for an event at time t starts at the first index with that time
    first = np.searchsorted(st.time, st.time, side="left")
    ev = st.event > 0
    s0 = rs0[first[ev]]
    s1 = rs1[first[ev]]
    mu = s1 / s0
    v = mu - mu**2  # binary covariate: S2 = S1
    z_ev = st.z[ev]
    score = float(np.sum(z_ev - mu))
    info = float(np.sum(v))
    loglik = float(np.sum(beta * z_ev - np.log(s0)))
    return score, info, loglik, ev, s0, mu, v


@dataclass(frozen=True)
class CoxFit:
    """Fitted period-stratified Cox model with cluster-level score pieces."""

    beta_hat: float
    information: float
    converged: bool
    iterations: int
    message: str
    residuals: np.ndarray          # per-row score residuals at beta_hat
    cluster_labels: np.ndarray
    cluster_scores: np.ndarray     # residual sums per cluster
    cluster_leverage: np.ndarray   # information share per cluster
    cp_keys: np.ndarray            # (cluster, period) pairs, row per group
    cp_scores: np.ndarray
    cp_leverage: np.ndarray
    n_events: int

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_labels)

    def summary(self) -> dict:
        return {
            "beta_hat": self.beta_hat,
            "information": self.information,
            "converged": self.converged,
            "iterations": self.iterations,
            "n_clusters": self.n_clusters,
            "n_events": self.n_events,
        }


def _score_pieces(dataset: TrialDataset, beta: float):
    """Per-row score residuals, total score, information, and per-row event info.

    The residual of one individual is the observed-jump term minus the
    integral of its at-risk weight against the Breslow hazard increments; the
    residuals sum to the total score.
    """
    strata = _strata(dataset)
    n_rows = len(dataset)
    residuals = np.zeros(n_rows)
    event_info = np.zeros(n_rows)  # per-event information, attributed to the event's row
    total_score = 0.0
    total_info = 0.0
    n_events = 0
    for st in strata:
        score, info, _, ev, s0, mu, v = _stratum_quantities(st, beta)
        total_score += score
        total_info += info
        n_events += int(ev.sum())
        if not np.any(ev):
            continue
        t_ev = st.time[ev]
        # Breslow increments and their mu-weighted cumulatives over event times
        dlam = 1.0 / s0
        cum_lam = np.cumsum(dlam)
        cum_mulam = np.cumsum(mu * dlam)
        # number of event times <= each observed time
        pos = np.searchsorted(t_ev, st.time, side="right")
        lam_at = np.concatenate(([0.0], cum_lam))[pos]
        mulam_at = np.concatenate(([0.0], cum_mulam))[pos]
        w = np.exp(beta * st.z)
        mu_at_x = np.zeros(len(st.time))
        mu_at_x[ev] = mu
        res = st.event * (st.z - mu_at_x) - w * (st.z * lam_at - mulam_at)
        residuals[st.rows] = res
        info_rows = st.rows[ev]
        event_info[info_rows] = v
    return residuals, event_info, total_score, total_info, n_events


def _group_sums(keys: np.ndarray, values: np.ndarray):
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    sums = np.zeros(len(uniq))
    np.add.at(sums, inv, values)
    return uniq, sums


def fit_cox(
    dataset: TrialDataset,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> CoxFit:
    """Newton-Raphson on the stratified partial likelihood, starting at zero.

    Uses step-halving when a step decreases the partial likelihood. Monotone
    likelihoods (no treatment variation among contributing risk sets) and
    event-free data are flagged as non-converged rather than raised.
    """
    strata = _strata(dataset)
    if not any(st.event.sum() > 0 for st in strata):
        return _failed_fit(dataset, "no observed events")

    beta = 0.0
    message = "ok"
    converged = False
    iterations = 0

    def objective(b: float):
        score = info = loglik = 0.0
        for st in strata:
            s, i, ll, *_ = _stratum_quantities(st, b)
            score += s
            info += i
            loglik += ll
        return score, info, loglik

    score, info, loglik = objective(beta)
    # absolute score tolerance, floored by the roundoff scale of the event sum
    threshold = max(tol, 1e-14 * sum(st.event.sum() for st in strata))
    if info <= 0:
        return _failed_fit(dataset, "no treatment variation in any contributing risk set")
    for iterations in range(1, max_iter + 1):
        step = score / info
        new_beta = beta + step
        new_score, new_info, new_loglik = objective(new_beta)
        halvings = 0
        # decrease tolerance scales with the log-likelihood magnitude: near the
        # optimum the change is below float noise and must not trigger halving
        slack = 1e-9 * max(1.0, abs(loglik))
        while new_loglik < loglik - slack and halvings < 20:
            step /= 2.0
            new_beta = beta + step
            new_score, new_info, new_loglik = objective(new_beta)
            halvings += 1
        beta, score, info, loglik = new_beta, new_score, new_info, new_loglik
        if abs(beta) > 50:
            return _failed_fit(dataset, "estimate diverging: monotone partial likelihood")
        if abs(score) < threshold:
            converged = True
            break
    # a vanishing score with vanishing curvature is a flat likelihood tail,
    # not a maximum: treat as monotone-likelihood divergence
    if converged and (info < 1e-4 or abs(beta) > 20):
        return _failed_fit(dataset, "estimate diverging: monotone partial likelihood")
    if not converged:
        message = f"score {score:.3g} after {iterations} iterations"

    residuals, event_info, total_score, total_info, n_events = _score_pieces(dataset, beta)
    labels, cl_scores = _group_sums(dataset.cluster[:, None], residuals)
    _, cl_info = _group_sums(dataset.cluster[:, None], event_info)
    cp = np.column_stack([dataset.cluster, dataset.period])
    cp_keys, cp_scores = _group_sums(cp, residuals)
    _, cp_info = _group_sums(cp, event_info)

    return CoxFit(
        beta_hat=beta,
        information=total_info,
        converged=converged,
        iterations=iterations,
        message=message,
        residuals=residuals,
        cluster_labels=labels.ravel(),
        cluster_scores=cl_scores,
        cluster_leverage=cl_info / total_info,
        cp_keys=cp_keys,
        cp_scores=cp_scores,
        cp_leverage=cp_info / total_info,
        n_events=n_events,
    )


def _failed_fit(dataset: TrialDataset, message: str) -> CoxFit:
    labels = np.unique(dataset.cluster)
    empty = np.zeros(len(labels))
    cp = np.unique(np.column_stack([dataset.cluster, dataset.period]), axis=0)
    return CoxFit(
        beta_hat=math.nan,
        information=0.0,
        converged=False,
        iterations=0,
        message=message,
        residuals=np.zeros(len(dataset)),
        cluster_labels=labels,
        cluster_scores=empty,
        cluster_leverage=empty,
        cp_keys=cp,
        cp_scores=np.zeros(len(cp)),
        cp_leverage=np.zeros(len(cp)),
        n_events=int(dataset.event.sum()),
    )


def robust_variance(
    fit: CoxFit,
    correction: str = "none",
    grouping: str = "cluster",
    kc_bound: float = 0.75,
) -> float:
    """Sandwich variance with optional leverage-based small-sample corrections.

    Group scores are inflated by functions of the group's information share h:
    FG uses (1-h)**-1/2, KC the same with h capped at ``kc_bound``, MD
    (1-h)**-1. Grouping at the cluster level keeps cross-period covariance
    inside the meat; cluster-period grouping discards it.
    """
    if correction not in CORRECTIONS:
        raise ValueError(f"correction must be one of {CORRECTIONS}, got {correction!r}")
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    if not fit.converged:
        raise ValueError(f"cannot form a variance from a non-converged fit: {fit.message}")
    if grouping == "cluster":
        scores, leverage = fit.cluster_scores, fit.cluster_leverage
    else:
        scores, leverage = fit.cp_scores, fit.cp_leverage

    if correction == "none":
        c = np.ones_like(scores)
    elif correction == "FG":
        c = (1.0 - leverage) ** -0.5
    elif correction == "KC":
        c = (1.0 - np.minimum(kc_bound, leverage)) ** -0.5
    else:  # MD
        if np.any(leverage >= 1.0 - 1e-9):
            worst = float(leverage.max())
            raise ValueError(
                f"a group carries leverage {worst:.3f} >= 1; the MD correction is singular "
                "(one group holds the entire information)"
            )
        c = (1.0 - leverage) ** -1.0
    meat = float(np.sum((c * scores) ** 2))
    return meat / fit.information**2


@dataclass(frozen=True)
class TestResult:
    """Decision record for one hypothesis test."""

    method: str
    statistic: float
    p_value: float
    reject: bool
    alpha: float
    dof: int | None = None

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "dof": self.dof,
        }


def wald_t_test(
    fit: CoxFit,
    variance: float,
    dof: int,
    beta0: float = 0.0,
    alpha: float = 0.05,
) -> TestResult:
    """Two-sided Wald t-test of the treatment effect against ``beta0``."""
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    if dof <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    t = abs(fit.beta_hat - beta0) / math.sqrt(variance)
    p = 2.0 * float(stats.t.sf(t, dof))
    return TestResult("wald_t", t, p, p < alpha, alpha, dof=dof)


def robust_score_test(
    dataset: TrialDataset,
    beta0: float = 0.0,
    modified: bool = False,
    alpha: float = 0.05,
) -> TestResult:
    """Robust score test at ``beta0`` without iterating the fit.

    The statistic compares the total score to the empirical cluster-level
    score variance; the modified form scales that variance by (n-1)/n.
    """
    residuals, _, total_score, _, _ = _score_pieces(dataset, beta0)
    _, cl_scores = _group_sums(dataset.cluster[:, None], residuals)
    meat = float(np.sum(cl_scores**2))
    if meat <= 0:
        raise ValueError("empirical score variance is zero; no events or no variation")
    c = (len(cl_scores) - 1) / len(cl_scores) if modified else 1.0
    stat = abs(total_score) / math.sqrt(c * meat)
    p = 2.0 * float(stats.norm.sf(stat))
    method = "score_modified" if modified else "score"
    return TestResult(method, stat, p, p < alpha, alpha)


class StratifiedCoxPH:
    """Estimator-style wrapper: ``fit`` ingests a dataset and sets attributes.

    Fitted state lives in trailing-underscore attributes (``coef_``,
    ``information_``, ``fit_``); ``robust_variance_`` evaluates the requested
    correction on the stored fit.
    """

    def __init__(self, tol: float = 1e-10, max_iter: int = 50):
        self.tol = tol
        self.max_iter = max_iter

    def get_params(self) -> dict:
        return {"tol": self.tol, "max_iter": self.max_iter}

    def fit(self, dataset: TrialDataset) -> "StratifiedCoxPH":
        self.fit_ = fit_cox(dataset, tol=self.tol, max_iter=self.max_iter)
        self.coef_ = self.fit_.beta_hat
        self.information_ = self.fit_.information
        self.converged_ = self.fit_.converged
        return self

    def robust_variance_(self, correction: str = "none", grouping: str = "cluster") -> float:
        self._check_fitted()
        return robust_variance(self.fit_, correction=correction, grouping=grouping)

    def _check_fitted(self) -> None:
        if not hasattr(self, "fit_"):
            raise AttributeError("call fit() before inspecting fitted state")
