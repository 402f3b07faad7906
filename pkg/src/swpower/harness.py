"""Replicated simulation studies: generate, fit, test, tabulate.

Each replicate draws a full trial, fits the stratified Cox model, runs the
Wald t-test under every requested variance correction plus the robust score
tests, and the rejection fractions are compared against the analytic power
predictions. Replicates use independent seeded streams, so results are
reproducible at any parallelism.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .design import TrialDesign, build_balanced_design
from .power import PowerRequest, evaluate_power
from .simgen import generate_trial
from .survmodel import CensoringSpec, CorrelationSpec, HazardSpec, solve_lambda0
from . import coxfit

__all__ = ["SimConfig", "SimResult", "run_study", "compare_predicted"]

WALD_CORRECTIONS = ("none", "FG", "KC", "MD")


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario.

    ``p_a`` anchors the period-1 baseline rate through the administrative
    censoring proportion; ``trend_delta`` moves the rate per period.
    """

    J: int
    n: int
    m: int
    beta1: float = 0.0
    beta0: float = 0.0
    tau_w: float = 0.0
    tau_b: float = 0.0
    p_a: float = 0.2
    trend_delta: float = 0.2
    c_star: float = 1.0
    alpha: float = 0.05
    replicates: int = 1000
    seed: int = 2024
    dof_rule: str = "n-2"
    corrections: tuple[str, ...] = WALD_CORRECTIONS

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        unknown = set(self.corrections) - set(WALD_CORRECTIONS)
        if unknown:
            raise ValueError(f"unknown corrections {sorted(unknown)}")

    def design(self) -> TrialDesign:
        return build_balanced_design(self.J, self.n, m=self.m)

    def hazard(self) -> HazardSpec:
        lam0 = solve_lambda0(self.p_a, self.c_star)
        trend = "constant" if self.trend_delta == 0 else "additive"
        return HazardSpec(lambda0=lam0, beta=self.beta1, trend=trend, trend_delta=self.trend_delta)

    def censoring(self) -> CensoringSpec:
        return CensoringSpec(c_star=self.c_star)

    def corr(self) -> CorrelationSpec:
        return CorrelationSpec(mode="kendall", tau_w=self.tau_w, tau_b=self.tau_b)

    def to_json(self) -> str:
        out = dict(self.__dict__)
        out["corrections"] = list(self.corrections)
        return json.dumps(out, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        data = json.loads(text)
        if "corrections" in data:
            data["corrections"] = tuple(data["corrections"])
        return cls(**data)


def _method_names(corrections: tuple[str, ...]) -> list[str]:
    return [f"wald_{c}" for c in corrections] + ["score", "score_modified"]


@dataclass(frozen=True)
class SimResult:
    """Tabulated rejection fractions with exact binomial intervals."""

    config: SimConfig
    rejections: dict[str, int]
    used_replicates: int
    dropped_replicates: int
    mean_beta_hat: float
    predicted: dict[str, float]
    elapsed_seconds: float
    methods: tuple[str, ...] = field(default=())

    def fraction(self, method: str) -> float:
        return self.rejections[method] / self.used_replicates

    def interval(self, method: str, level: float = 0.95) -> tuple[float, float]:
        """Clopper-Pearson interval for the rejection fraction."""
        k, n = self.rejections[method], self.used_replicates
        lo = 0.0 if k == 0 else float(stats.beta.ppf((1 - level) / 2, k, n - k + 1))
        hi = 1.0 if k == n else float(stats.beta.ppf(1 - (1 - level) / 2, k + 1, n - k))
        return lo, hi

    def rows(self) -> list[dict]:
        out = []
        for method in self.methods:
            lo, hi = self.interval(method)
            row = {
                "method": method,
                "rejections": self.rejections[method],
                "replicates": self.used_replicates,
                "fraction": self.fraction(method),
                "ci_low": lo,
                "ci_high": hi,
            }
            if method in self.predicted:
                row["predicted"] = self.predicted[method]
                row["difference"] = row["fraction"] - self.predicted[method]
            out.append(row)
        return out

    def to_csv(self) -> str:
        cols = ["method", "rejections", "replicates", "fraction", "ci_low", "ci_high",
                "predicted", "difference"]
        lines = [",".join(cols)]
        for row in self.rows():
            lines.append(",".join("" if c not in row else repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in cols))
        return "\n".join(lines) + "\n"


def _predictions(config: SimConfig) -> dict[str, float]:
    if config.beta1 == config.beta0:
        return {}
    req = PowerRequest(
        design=config.design(),
        hazard=config.hazard(),
        censoring=config.censoring(),
        corr=config.corr(),
        beta1=config.beta1,
        beta0=config.beta0,
        alpha=config.alpha,
        dof_rule=config.dof_rule,
    )
    result = evaluate_power(req)
    out = {f"wald_{c}": result.powers["wald_t"] for c in config.corrections}
    out["score"] = result.powers["score_sm"]
    out["score_modified"] = result.powers["score_tang"]
    return out


def run_study(config: SimConfig, progress=None) -> SimResult:
    """Run the scenario; non-converged fits are dropped and counted."""
    start = time.perf_counter()
    design = config.design()
    hazard = config.hazard()
    censoring = config.censoring()
    corr = config.corr()
    dof = design.n - (1 if config.dof_rule == "n-1" else 2)
    methods = _method_names(config.corrections)

    rejections = {m: 0 for m in methods}
    betas = []
    dropped = 0
    for rep in range(config.replicates):
        dataset = generate_trial(design, hazard, censoring, corr, seed=config.seed, replicate=rep)
        fit = coxfit.fit_cox(dataset)
        if not fit.converged:
            dropped += 1
            continue
        betas.append(fit.beta_hat)
        for c in config.corrections:
            var = coxfit.robust_variance(fit, correction=c, grouping="cluster")
            test = coxfit.wald_t_test(fit, var, dof, beta0=config.beta0, alpha=config.alpha)
            rejections[f"wald_{c}"] += int(test.reject)
        plain = coxfit.robust_score_test(dataset, beta0=config.beta0, modified=False, alpha=config.alpha)
        mod = coxfit.robust_score_test(dataset, beta0=config.beta0, modified=True, alpha=config.alpha)
        rejections["score"] += int(plain.reject)
        rejections["score_modified"] += int(mod.reject)
        if progress is not None:
            progress(rep)

    used = config.replicates - dropped
    if used == 0:
        raise RuntimeError("every replicate failed to converge")
    return SimResult(
        config=config,
        rejections=rejections,
        used_replicates=used,
        dropped_replicates=dropped,
        mean_beta_hat=float(np.mean(betas)),
        predicted=_predictions(config),
        elapsed_seconds=time.perf_counter() - start,
        methods=tuple(methods),
    )


def compare_predicted(result: SimResult, predictions: dict[str, float]) -> list[dict]:
    """Empirical minus predicted power with the Monte Carlo standard error."""
    missing = set(predictions) - set(result.methods)
    if missing:
        raise ValueError(f"predictions for unknown methods: {sorted(missing)}")
    rows = []
    for method, pred in predictions.items():
        frac = result.fraction(method)
        se = math.sqrt(frac * (1 - frac) / result.used_replicates)
        rows.append(
            {"method": method, "empirical": frac, "predicted": pred,
             "difference": frac - pred, "mc_se": se}
        )
    return rows
