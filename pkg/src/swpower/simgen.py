"""Correlated trial data generation.

Event times are built from a shared cluster-level positive stable variate,
per-period inner variates, and individual exponentials, so that pairs in the
same cluster-period follow a Gumbel dependence at the within-period Kendall's
tau and pairs across periods follow the weaker between-period value, while
every margin stays exactly exponential. Censoring is uniform loss to
follow-up capped at the maximum follow-up time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .design import TrialDesign
from .survmodel import CensoringSpec, CorrelationSpec, HazardSpec

__all__ = [
    "TrialDataset",
    "rng_for",
    "sample_positive_stable",
    "sample_cluster",
    "generate_trial",
    "empirical_kendall_tau",
]

CSV_HEADER = "cluster,period,individual,time,event,treatment"


def rng_for(seed: int, replicate: int = 0, cluster: int = 0) -> np.random.Generator:
    """Counter-based stream: one generator per (replicate, cluster).

    Streams depend only on the key, not on draw order elsewhere, so parallel
    harness runs replay bit-for-bit at any worker count.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, cluster)))


def sample_positive_stable(alpha: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """One-sided positive stable variates with Laplace transform exp(-t**alpha).

    Kanter's representation: V = (A(U)/E)**((1-alpha)/alpha) with U uniform on
    (0, pi) and E unit exponential. Degenerate at alpha=1 (V = 1).
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"stable index must be in (0, 1], got {alpha}")
    if alpha == 1.0:
        return np.ones(size) if size is not None else np.float64(1.0)
    # (0, pi]: sin never underflows to zero, and the tails are computed in
    # log space so extreme angles cannot produce 0/0
    u = np.pi * (1.0 - rng.random(size))
    e = rng.standard_exponential(size=size)
    log_a = (
        np.log(np.sin((1.0 - alpha) * u))
        + (alpha / (1.0 - alpha)) * np.log(np.sin(alpha * u))
        - (1.0 / (1.0 - alpha)) * np.log(np.sin(u))
    )
    return np.exp(((1.0 - alpha) / alpha) * (log_a - np.log(e)))


def sample_cluster(
    schedule: np.ndarray,
    m: int,
    hazard: HazardSpec,
    corr: CorrelationSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Correlated event times for one cluster: a (J, m) array.

    ``schedule`` is the cluster's binary treatment row. The outer stable index
    is 1 - tau_b; the inner index is the ratio (1 - tau_w)/(1 - tau_b), so
    equal taus collapse the inner level and zero taus give independence.
    """
    if corr.mode != "kendall":
        raise ValueError("data generation needs the generative (kendall) correlation mode")
    schedule = np.asarray(schedule, dtype=int)
    J = len(schedule)
    alpha_w = 1.0 - corr.tau_w
    alpha_b = 1.0 - corr.tau_b

    v0 = sample_positive_stable(alpha_b, rng)
    vj = sample_positive_stable(alpha_w / alpha_b, rng, size=J)
    e = rng.standard_exponential(size=(J, m))

    # unit-exponential margins with nested Gumbel dependence
    w = (e / vj[:, None]) ** alpha_w / v0**alpha_b

    rates = np.array([hazard.rate(j, int(z)) for j, z in enumerate(schedule, start=1)])
    return w / rates[:, None]


@dataclass(frozen=True)
class TrialDataset:
    """Observed trial records: one row per individual.

    ``time`` is the observed follow-up in (0, c_star], ``event`` is 1 for an
    observed event and 0 for censoring, and ``treatment`` matches the design
    cell of (cluster, period).
    """

    cluster: np.ndarray
    period: np.ndarray
    individual: np.ndarray
    time: np.ndarray
    event: np.ndarray
    treatment: np.ndarray
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.time)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for c, j, k, t, d, z in zip(
            self.cluster, self.period, self.individual, self.time, self.event, self.treatment
        ):
            buf.write(f"{c},{j},{k},{float(t)!r},{d},{z}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, seed: int | None = None) -> "TrialDataset":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"expected header {CSV_HEADER!r}")
        rows = [ln.split(",") for ln in lines[1:]]
        if any(len(r) != 6 for r in rows):
            raise ValueError("every data row needs 6 comma-separated fields")
        cols = list(zip(*rows)) if rows else [[]] * 6
        return cls(
            cluster=np.array(cols[0], dtype=int),
            period=np.array(cols[1], dtype=int),
            individual=np.array(cols[2], dtype=int),
            time=np.array(cols[3], dtype=float),
            event=np.array(cols[4], dtype=int),
            treatment=np.array(cols[5], dtype=int),
            seed=seed,
        )


def generate_trial(
    design: TrialDesign,
    hazard: HazardSpec,
    censoring: CensoringSpec,
    corr: CorrelationSpec,
    seed: int,
    replicate: int = 0,
) -> TrialDataset:
    """Simulate one trial: correlated events, uniform loss, administrative cap."""
    hazard.check_periods(design.J)
    rows = design.cluster_rows()
    J, m = design.J, design.m
    n = rows.shape[0]

    cluster_ids = np.repeat(np.arange(1, n + 1), J * m)
    periods = np.tile(np.repeat(np.arange(1, J + 1), m), n)
    individuals = np.tile(np.arange(1, m + 1), n * J)
    treatments = np.repeat(rows, m).astype(int)

    times = np.empty(n * J * m)
    events = np.empty(n * J * m, dtype=int)
    c_star = censoring.c_star
    for i in range(n):
        rng = rng_for(seed, replicate, i)
        t = sample_cluster(rows[i], m, hazard, corr, rng)
        loss = rng.uniform(0.0, c_star, size=(J, m))
        censor = np.minimum(loss, c_star)
        x = np.minimum(t, censor)
        d = (t <= censor).astype(int)
        sl = slice(i * J * m, (i + 1) * J * m)
        times[sl] = x.ravel()
        events[sl] = d.ravel()

    return TrialDataset(
        cluster=cluster_ids,
        period=periods,
        individual=individuals,
        time=times,
        event=events,
        treatment=treatments,
        seed=seed,
    )


def empirical_kendall_tau(x, y) -> float:
    """Concordance-based Kendall's tau of paired samples (continuous, no ties)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need at least two pairs of equal length")
    return float(stats.kendalltau(x, y).statistic)
