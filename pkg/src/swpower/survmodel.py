"""Marginal event-time model, censoring model, and Gumbel dependence.

Event times are exponential within each period with a period-additive
baseline rate and a proportional treatment effect on the hazard scale.
Censoring is uniform loss to follow-up on ``(0, C*)``. Within-cluster
dependence is a nested Gumbel structure: pairs in the same period share a
stronger dependence parameter than pairs in different periods, both
parameterized through Kendall's tau as ``theta = 1/(1 - tau)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HazardSpec",
    "CensoringSpec",
    "CorrelationSpec",
    "solve_lambda0",
    "event_survival",
    "event_density",
    "censor_survival",
    "bivariate_event_survival",
    "gumbel_bivariate",
]

TREND_MODES = ("constant", "additive")


@dataclass(frozen=True)
class HazardSpec:
    """Period-varying exponential event-time model.

    ``lambda0`` is the period-1 baseline rate; under ``trend="additive"`` the
    period-j rate is ``lambda0 + trend_delta * (j - 1)``. ``beta`` is the log
    hazard ratio of intervention vs control.
    """

    lambda0: float
    beta: float = 0.0
    trend: str = "constant"
    trend_delta: float = 0.0
    p_a: float | None = None

    def __post_init__(self) -> None:
        if self.lambda0 <= 0:
            raise ValueError(f"baseline rate must be positive, got {self.lambda0}")
        if self.trend not in TREND_MODES:
            raise ValueError(f"trend must be one of {TREND_MODES}, got {self.trend!r}")
        if self.p_a is not None and not 0 < self.p_a < 1:
            raise ValueError(f"administrative censoring proportion must be in (0,1), got {self.p_a}")

    def baseline_rate(self, j: int) -> float:
        """Baseline hazard rate for period ``j`` (1-based)."""
        if self.trend == "constant":
            return self.lambda0
        return self.lambda0 + self.trend_delta * (j - 1)

    def rate(self, j: int, z: int, beta: float | None = None) -> float:
        """Hazard rate ``lambda_0j * exp(beta*z)`` for arm ``z`` in period ``j``."""
        b = self.beta if beta is None else beta
        return self.baseline_rate(j) * math.exp(b * z)

    def check_periods(self, J: int) -> None:
        """Reject specs whose trend drives some period's rate nonpositive."""
        for j in range(1, J + 1):
            if self.baseline_rate(j) <= 0:
                raise ValueError(
                    f"baseline rate is {self.baseline_rate(j):.4g} in period {j}; "
                    "the additive trend must keep all period rates positive"
                )


@dataclass(frozen=True)
class CensoringSpec:
    """Uniform loss to follow-up on ``(0, c_star)`` with maximum follow-up ``c_star``."""

    c_star: float = 1.0
    loss_model: str = "uniform"

    def __post_init__(self) -> None:
        if self.c_star <= 0:
            raise ValueError(f"maximum follow-up must be positive, got {self.c_star}")
        if self.loss_model != "uniform":
            raise ValueError(f"only uniform loss to follow-up is supported, got {self.loss_model!r}")


@dataclass(frozen=True)
class CorrelationSpec:
    """Within/between-period dependence, as Kendall's tau or as direct g-ICCs.

    ``kendall`` mode carries (tau_w, tau_b) and maps to Gumbel dependence
    parameters; it supports both the generative variance engine and the
    simulator. ``gicc`` mode carries user-supplied (rho_w, rho_b) and bypasses
    the copula machinery entirely.
    """

    mode: str = "kendall"
    tau_w: float = 0.0
    tau_b: float = 0.0
    rho_w: float = 0.0
    rho_b: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("kendall", "gicc"):
            raise ValueError(f"mode must be 'kendall' or 'gicc', got {self.mode!r}")
        if self.mode == "kendall":
            if not 0 <= self.tau_b <= self.tau_w < 1:
                raise ValueError(
                    f"need 0 <= tau_b <= tau_w < 1, got tau_w={self.tau_w}, tau_b={self.tau_b}"
                )

    @property
    def theta_within(self) -> float:
        """Gumbel parameter for same-period pairs: 1/(1 - tau_w)."""
        self._require_kendall()
        return 1.0 / (1.0 - self.tau_w)

    @property
    def theta_between(self) -> float:
        """Gumbel parameter for cross-period pairs: 1/(1 - tau_b)."""
        self._require_kendall()
        return 1.0 / (1.0 - self.tau_b)

    def _require_kendall(self) -> None:
        if self.mode != "kendall":
            raise ValueError(
                "this operation needs the generative (kendall) correlation mode; "
                "direct g-ICCs carry no survival distribution"
            )


def solve_lambda0(p_a: float, c_star: float, trend: str = "constant", trend_delta: float = 0.0) -> float:
    """Baseline rate such that a period-1 control event survives past ``c_star`` w.p. ``p_a``."""
    if not 0 < p_a < 1:
        raise ValueError(f"administrative censoring proportion must be in (0,1), got {p_a}")
    del trend, trend_delta  # anchored in period 1; the trend does not move lambda0
    return -math.log(p_a) / c_star


def event_survival(t, j: int, z: int, spec: HazardSpec, beta: float | None = None):
    """P(T > t) for arm ``z`` in period ``j``; exponential margin."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("event times are nonnegative")
    return np.exp(-spec.rate(j, z, beta) * t)


def event_density(t, j: int, z: int, spec: HazardSpec, beta: float | None = None):
    """Density of T for arm ``z`` in period ``j``."""
    lam = spec.rate(j, z, beta)
    return lam * event_survival(t, j, z, spec, beta)


def censor_survival(t, spec: CensoringSpec):
    """P(C >= t) under uniform loss on ``(0, c_star)``; clamps to 0 past ``c_star``."""
    t = np.asarray(t, dtype=float)
    return np.clip(1.0 - t / spec.c_star, 0.0, 1.0)


def gumbel_bivariate(ch_s, ch_t, haz_s, haz_t, theta: float):
    """Gumbel joint survival of two event times from their cumulative hazards.

    Takes the marginal cumulative hazards ``ch = -log(marginal survival)`` and
    the hazard rates at the evaluation points, so the same kernel serves any
    pair of margins. Returns ``(F, dF_ds, dF_dt, density)`` elementwise.
    """
    if theta < 1:
        raise ValueError(f"Gumbel dependence parameter must be >= 1, got {theta}")
    ch_s = np.asarray(ch_s, dtype=float)
    ch_t = np.asarray(ch_t, dtype=float)
    u = ch_s**theta
    v = ch_t**theta
    total = u + v
    # joint survival exp(-(u+v)^(1/theta)); guard the s=t=0 corner where total=0
    with np.errstate(divide="ignore", invalid="ignore"):
        w = total ** (1.0 / theta)
        joint = np.exp(-w)
        g1 = np.where(total > 0, total ** (1.0 / theta - 1.0), 0.0)
        g2 = np.where(total > 0, total ** (1.0 / theta - 2.0), 0.0)
        du = np.where(ch_s > 0, ch_s ** (theta - 1.0), (1.0 if theta == 1 else 0.0)) * haz_s
        dv = np.where(ch_t > 0, ch_t ** (theta - 1.0), (1.0 if theta == 1 else 0.0)) * haz_t
    dF_ds = -joint * g1 * du
    dF_dt = -joint * g1 * dv
    density = joint * g2 * du * dv * (w + theta - 1.0)
    return joint, dF_ds, dF_dt, density


def bivariate_event_survival(
    s,
    t,
    margins: tuple[tuple[int, int], tuple[int, int]],
    spec: HazardSpec,
    corr: CorrelationSpec,
    same_period: bool | None = None,
    beta: float | None = None,
):
    """Joint survival of two event times in one cluster, with partials and density.

    ``margins`` gives the (period, arm) pair for each coordinate. Same-period
    pairs use the within-period Gumbel parameter, cross-period pairs the
    between-period one; ``same_period`` overrides the default inferred from
    the margins.
    """
    (j, zj), (l, zl) = margins
    if same_period is None:
        same_period = j == l
    theta = corr.theta_within if same_period else corr.theta_between
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("event times are nonnegative")
    lam_s = spec.rate(j, zj, beta)
    lam_t = spec.rate(l, zl, beta)
    return gumbel_bivariate(lam_s * s, lam_t * t, lam_s, lam_t, theta)
