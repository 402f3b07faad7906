import math

import numpy as np
import pytest
from scipy import optimize, stats

from swpower.coxfit import (
    StratifiedCoxPH,
    fit_cox,
    robust_score_test,
    robust_variance,
    wald_t_test,
    _score_pieces,
)
from swpower.design import build_balanced_design
from swpower.simgen import TrialDataset, generate_trial
from swpower.survmodel import CensoringSpec, CorrelationSpec, HazardSpec, solve_lambda0

LN5 = math.log(5)


def brute_force_partial_loglik(time, event, z, beta):
    """Independent O(n^2) Breslow partial log-likelihood for one stratum."""
    ll = 0.0
    for i in range(len(time)):
        if event[i]:
            at_risk = time >= time[i]
            ll += beta * z[i] - math.log(np.sum(np.exp(beta * z[at_risk])))
    return ll


def two_group_dataset(seed=0, n_per_arm=60):
    rng = np.random.default_rng(seed)
    t0 = rng.exponential(1.0, size=n_per_arm)
    t1 = rng.exponential(1.0 / math.exp(0.5), size=n_per_arm)
    time = np.concatenate([t0, t1])
    z = np.concatenate([np.zeros(n_per_arm, dtype=int), np.ones(n_per_arm, dtype=int)])
    return TrialDataset(
        cluster=np.arange(1, 2 * n_per_arm + 1),
        period=np.ones(2 * n_per_arm, dtype=int),
        individual=np.ones(2 * n_per_arm, dtype=int),
        time=time,
        event=np.ones(2 * n_per_arm, dtype=int),
        treatment=z,
    )


def simulated_trial(beta=0.4, seed=3, J=3, n=12, m=10, tau_w=0.05, tau_b=0.01):
    design = build_balanced_design(J, n, m=m)
    hazard = HazardSpec(lambda0=LN5, beta=beta, trend="additive", trend_delta=0.2)
    corr = CorrelationSpec(mode="kendall", tau_w=tau_w, tau_b=tau_b)
    return generate_trial(design, hazard, CensoringSpec(), corr, seed=seed)


def test_matches_brute_force_maximizer():
    ds = two_group_dataset()
    fit = fit_cox(ds)
    assert fit.converged
    res = optimize.minimize_scalar(
        lambda b: -brute_force_partial_loglik(ds.time, ds.event, ds.treatment, b),
        bounds=(-3, 3), method="bounded", options={"xatol": 1e-10},
    )
    assert fit.beta_hat == pytest.approx(res.x, abs=1e-6)


def test_score_vanishes_at_estimate():
    ds = simulated_trial()
    fit = fit_cox(ds)
    assert fit.converged
    _, _, total_score, _, _ = _score_pieces(ds, fit.beta_hat)
    assert abs(total_score) < 1e-8


def test_null_process_estimate_near_zero():
    # n*m*J = 9000 observations generated under no treatment effect
    ds = simulated_trial(beta=0.0, J=3, n=30, m=100, seed=8)
    fit = fit_cox(ds)
    se = math.sqrt(robust_variance(fit, "none"))
    assert abs(fit.beta_hat) < 3 * se


def test_residuals_sum_to_score():
    ds = simulated_trial(seed=5)
    for beta in (0.0, 0.3, -0.2):
        residuals, _, total, _, _ = _score_pieces(ds, beta)
        assert residuals.sum() == pytest.approx(total, abs=1e-9)


def test_uncorrected_sandwich_is_sum_of_squared_cluster_scores():
    ds = simulated_trial(seed=7)
    fit = fit_cox(ds)
    var = robust_variance(fit, "none", grouping="cluster")
    assert var == pytest.approx(np.sum(fit.cluster_scores**2) / fit.information**2, rel=1e-12)


def test_correction_ordering():
    for seed in (1, 2, 3):
        ds = simulated_trial(seed=seed)
        fit = fit_cox(ds)
        v_none = robust_variance(fit, "none")
        v_fg = robust_variance(fit, "FG")
        v_kc = robust_variance(fit, "KC")
        v_md = robust_variance(fit, "MD")
        assert v_md >= v_fg >= v_none
        assert v_kc <= v_fg  # the KC leverage cap can only shrink the inflation


def test_grouping_cross_terms_algebra():
    ds = simulated_trial(seed=9)
    fit = fit_cox(ds)
    meat_cluster = np.sum(fit.cluster_scores**2)
    meat_cp = np.sum(fit.cp_scores**2)
    cross = 0.0
    for label in fit.cluster_labels:
        rows = fit.cp_keys[:, 0] == label
        parts = fit.cp_scores[rows]
        cross += np.sum(np.outer(parts, parts)) - np.sum(parts**2)
    assert meat_cluster == pytest.approx(meat_cp + cross, rel=1e-10)
    assert robust_variance(fit, "none", grouping="cluster-period") == pytest.approx(
        meat_cp / fit.information**2, rel=1e-12
    )


def test_independent_data_robust_close_to_model_based():
    # independence: the sandwich and inverse-information variances agree asymptotically
    ratios = []
    for seed in range(12):
        ds = simulated_trial(beta=0.3, seed=seed, J=3, n=150, m=10, tau_w=0.0, tau_b=0.0)
        fit = fit_cox(ds)
        ratios.append(robust_variance(fit, "none") * fit.information)
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.1)


def test_cluster_relabeling_invariance():
    ds = simulated_trial(seed=13)
    perm = np.random.default_rng(0).permutation(np.unique(ds.cluster))
    relabeled = TrialDataset(
        cluster=perm[ds.cluster - 1], period=ds.period, individual=ds.individual,
        time=ds.time, event=ds.event, treatment=ds.treatment,
    )
    f1, f2 = fit_cox(ds), fit_cox(relabeled)
    assert f1.beta_hat == f2.beta_hat
    assert robust_variance(f1, "MD") == pytest.approx(robust_variance(f2, "MD"), rel=1e-12)
    assert np.allclose(np.sort(f1.cluster_scores), np.sort(f2.cluster_scores))


def test_strata_absorb_secular_trend():
    # shifting the baseline hazard profile moves the risk sets, not the estimate's mean
    fits_flat, fits_trend = [], []
    design = build_balanced_design(3, 12, m=15)
    corr = CorrelationSpec(mode="kendall", tau_w=0.05, tau_b=0.01)
    for rep in range(150):
        for store, delta in ((fits_flat, 0.0), (fits_trend, 0.4)):
            hazard = HazardSpec(
                lambda0=LN5, beta=0.4,
                trend="constant" if delta == 0 else "additive", trend_delta=delta,
            )
            ds = generate_trial(design, hazard, CensoringSpec(), corr, seed=200 + rep)
            fit = fit_cox(ds)
            if fit.converged:
                store.append(fit.beta_hat)
    mean_flat, mean_trend = np.mean(fits_flat), np.mean(fits_trend)
    se = math.sqrt(np.var(fits_flat) / len(fits_flat) + np.var(fits_trend) / len(fits_trend))
    assert abs(mean_flat - mean_trend) < 3.5 * se


def test_no_events_flagged():
    ds = simulated_trial(seed=1)
    dead = TrialDataset(
        cluster=ds.cluster, period=ds.period, individual=ds.individual,
        time=ds.time, event=np.zeros_like(ds.event), treatment=ds.treatment,
    )
    fit = fit_cox(dead)
    assert not fit.converged
    assert "events" in fit.message
    with pytest.raises(ValueError, match="non-converged"):
        robust_variance(fit, "none")


def test_monotone_likelihood_flagged():
    # treated events all early, controls all censored: estimate diverges
    n = 40
    time = np.concatenate([np.linspace(0.01, 0.3, n // 2), np.full(n // 2, 1.0)])
    event = np.concatenate([np.ones(n // 2, dtype=int), np.zeros(n // 2, dtype=int)])
    z = np.concatenate([np.ones(n // 2, dtype=int), np.zeros(n // 2, dtype=int)])
    ds = TrialDataset(
        cluster=np.arange(1, n + 1), period=np.ones(n, dtype=int),
        individual=np.ones(n, dtype=int), time=time, event=event, treatment=z,
    )
    fit = fit_cox(ds)
    assert not fit.converged


def test_wald_t_test_behavior():
    ds = simulated_trial(seed=2)
    fit = fit_cox(ds)
    var = robust_variance(fit, "MD")
    null_at_estimate = wald_t_test(fit, var, dof=10, beta0=fit.beta_hat)
    assert null_at_estimate.p_value == pytest.approx(1.0)
    assert not null_at_estimate.reject
    p_small_dof = wald_t_test(fit, var, dof=3).p_value
    p_big_dof = wald_t_test(fit, var, dof=30).p_value
    assert p_small_dof > p_big_dof
    with pytest.raises(ValueError):
        wald_t_test(fit, var, dof=0)
    with pytest.raises(ValueError):
        wald_t_test(fit, -1.0, dof=10)


def test_score_test_modification_algebra():
    ds = simulated_trial(seed=4)
    plain = robust_score_test(ds, modified=False)
    mod = robust_score_test(ds, modified=True)
    n = len(np.unique(ds.cluster))
    assert mod.statistic == pytest.approx(plain.statistic * math.sqrt(n / (n - 1)), rel=1e-12)
    assert mod.p_value <= plain.p_value


def test_score_test_statistic_grows_with_effect_and_n():
    stats_by_beta = [
        robust_score_test(simulated_trial(beta=b, seed=6, n=24, m=20)).statistic
        for b in (0.0, 0.4, 0.8)
    ]
    assert stats_by_beta[0] < stats_by_beta[1] < stats_by_beta[2]
    small = robust_score_test(simulated_trial(beta=0.5, seed=6, n=12, m=20)).statistic
    large = robust_score_test(simulated_trial(beta=0.5, seed=6, n=30, m=20)).statistic
    assert large > small


def test_md_singular_when_one_group_has_all_information():
    ds = two_group_dataset(n_per_arm=20)
    one_cluster = TrialDataset(
        cluster=np.ones(len(ds), dtype=int), period=ds.period, individual=ds.individual,
        time=ds.time, event=ds.event, treatment=ds.treatment,
    )
    fit = fit_cox(one_cluster)
    with pytest.raises(ValueError, match="leverage"):
        robust_variance(fit, "MD")


def test_estimator_wrapper():
    ds = simulated_trial(seed=10)
    est = StratifiedCoxPH()
    assert est.get_params() == {"tol": 1e-10, "max_iter": 50}
    with pytest.raises(AttributeError):
        est.robust_variance_()
    est.fit(ds)
    assert est.converged_
    assert est.coef_ == fit_cox(ds).beta_hat
    assert est.robust_variance_("MD") == robust_variance(est.fit_, "MD")


def test_csv_ingest_path():
    ds = simulated_trial(seed=11)
    again = TrialDataset.from_csv(ds.to_csv())
    assert fit_cox(again).beta_hat == fit_cox(ds).beta_hat
