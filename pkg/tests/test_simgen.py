import math

import numpy as np
import pytest
from scipy import stats

from swpower.design import build_balanced_design
from swpower.simgen import (
    TrialDataset,
    empirical_kendall_tau,
    generate_trial,
    rng_for,
    sample_cluster,
    sample_positive_stable,
)
from swpower.survmodel import CensoringSpec, CorrelationSpec, HazardSpec, solve_lambda0

LN5 = math.log(5)


def test_stable_degenerate_at_one():
    rng = np.random.default_rng(0)
    v = sample_positive_stable(1.0, rng, size=100)
    assert np.all(v == 1.0)


def test_stable_laplace_transform_oracle():
    rng = np.random.default_rng(42)
    v = sample_positive_stable(0.95, rng, size=10**6)
    lt = np.exp(-v)
    se = lt.std(ddof=1) / math.sqrt(len(v))
    assert abs(lt.mean() - math.exp(-1.0)) < 3 * se


def test_stable_half_matches_levy_median():
    # alpha = 1/2 is the one-sided stable with Laplace transform exp(-sqrt(t)),
    # i.e. a Levy distribution with scale 1/2
    rng = np.random.default_rng(7)
    v = sample_positive_stable(0.5, rng, size=10**6)
    target = stats.levy(scale=0.5).median()
    assert np.median(v) == pytest.approx(target, rel=0.01)


def test_stable_rejects_bad_index():
    rng = np.random.default_rng(0)
    for alpha in (0.0, -0.5, 1.2):
        with pytest.raises(ValueError):
            sample_positive_stable(alpha, rng)


def test_cluster_independence_limit_ks():
    hazard = HazardSpec(lambda0=LN5, beta=0.4, trend="additive", trend_delta=0.2)
    corr = CorrelationSpec(mode="kendall", tau_w=0.0, tau_b=0.0)
    rng = np.random.default_rng(5)
    schedule = np.array([0, 1, 1])
    draws = np.stack([sample_cluster(schedule, 4, hazard, corr, rng) for _ in range(25000)])
    for j in range(3):
        lam = hazard.rate(j + 1, int(schedule[j]))
        cell = draws[:, j, 0]
        assert stats.kstest(cell, "expon", args=(0, 1 / lam)).pvalue > 0.01


def test_cluster_dependence_reproduces_taus():
    hazard = HazardSpec(lambda0=LN5, beta=0.0, trend="constant")
    corr = CorrelationSpec(mode="kendall", tau_w=0.1, tau_b=0.05)
    rng = np.random.default_rng(11)
    n_pairs = 60000
    within = np.empty((n_pairs, 2))
    between = np.empty((n_pairs, 2))
    schedule = np.array([0, 1])
    for i in range(n_pairs):
        t = sample_cluster(schedule, 2, hazard, corr, rng)
        within[i] = t[0]
        between[i] = (t[0, 0], t[1, 1])
    assert empirical_kendall_tau(within[:, 0], within[:, 1]) == pytest.approx(0.10, abs=0.01)
    assert empirical_kendall_tau(between[:, 0], between[:, 1]) == pytest.approx(0.05, abs=0.01)


def test_cluster_margins_invariant_under_dependence():
    hazard = HazardSpec(lambda0=LN5, beta=0.4, trend="additive", trend_delta=0.2)
    corr = CorrelationSpec(mode="kendall", tau_w=0.2, tau_b=0.1)
    rng = np.random.default_rng(13)
    schedule = np.array([0, 1, 1])
    draws = np.stack([sample_cluster(schedule, 2, hazard, corr, rng) for _ in range(25000)])
    for j in range(3):
        lam = hazard.rate(j + 1, int(schedule[j]))
        assert stats.kstest(draws[:, j, 1], "expon", args=(0, 1 / lam)).pvalue > 0.01


def test_cluster_requires_kendall_mode():
    hazard = HazardSpec(lambda0=1.0)
    direct = CorrelationSpec(mode="gicc", rho_w=0.1, rho_b=0.02)
    with pytest.raises(ValueError, match="generative"):
        sample_cluster(np.array([0, 1]), 2, hazard, direct, np.random.default_rng(0))


def test_nested_ordering_on_generated_data():
    hazard = HazardSpec(lambda0=LN5, beta=0.0)
    corr = CorrelationSpec(mode="kendall", tau_w=0.15, tau_b=0.03)
    rng = np.random.default_rng(17)
    n = 20000
    within = np.empty((n, 2))
    between = np.empty((n, 2))
    schedule = np.array([0, 1])
    for i in range(n):
        t = sample_cluster(schedule, 2, hazard, corr, rng)
        within[i] = t[0]
        between[i] = (t[0, 1], t[1, 0])
    tw = empirical_kendall_tau(within[:, 0], within[:, 1])
    tb = empirical_kendall_tau(between[:, 0], between[:, 1])
    assert tw > tb


def make_trial(beta=0.4, tau_w=0.05, tau_b=0.01, seed=99, J=3, n=12, m=8, trend=0.2):
    design = build_balanced_design(J, n, m=m)
    hazard = HazardSpec(lambda0=LN5, beta=beta, trend="additive", trend_delta=trend)
    corr = CorrelationSpec(mode="kendall", tau_w=tau_w, tau_b=tau_b)
    return design, generate_trial(design, hazard, CensoringSpec(), corr, seed=seed)


def test_trial_dataset_invariants():
    design, ds = make_trial()
    assert len(ds) == 12 * 3 * 8
    assert np.all((ds.time > 0) & (ds.time <= 1.0))
    assert np.all((ds.event == 0) | (ds.event == 1))
    rows = design.cluster_rows()
    for c in range(1, 13):
        for j in range(1, 4):
            cell = (ds.cluster == c) & (ds.period == j)
            assert cell.sum() == 8
            assert np.all(ds.treatment[cell] == rows[c - 1, j - 1])
    # uniform loss always binds before the administrative cap
    assert np.all(ds.time[ds.event == 0] < 1.0)


def test_trial_determinism_and_stream_independence():
    _, a = make_trial(seed=4)
    _, b = make_trial(seed=4)
    _, c = make_trial(seed=5)
    assert np.array_equal(a.time, b.time) and np.array_equal(a.event, b.event)
    assert not np.array_equal(a.time, c.time)
    # distinct per-cluster streams: generators keyed by (seed, replicate, cluster)
    r1 = rng_for(4, 0, 0).standard_normal(4)
    r2 = rng_for(4, 0, 1).standard_normal(4)
    assert not np.array_equal(r1, r2)


def test_trial_censoring_fraction_matches_analytic():
    # one non-null scenario: J=4, n=21, m=40, beta=0.4, trend +0.2
    design = build_balanced_design(4, 21, m=40)
    hazard = HazardSpec(lambda0=LN5, beta=0.4, trend="additive", trend_delta=0.2)
    corr = CorrelationSpec(mode="kendall", tau_w=0.05, tau_b=0.01)
    frac = []
    for rep in range(40):
        ds = generate_trial(design, hazard, CensoringSpec(), corr, seed=21, replicate=rep)
        frac.append(1.0 - ds.event.mean())
    observed = float(np.mean(frac))

    # analytic: P(censored) = integral of (1 - F_T(c)) over the uniform loss law
    def censored_prob(lam):
        return (1 - math.exp(-lam)) / lam

    total = 0.0
    for j in range(1, 5):
        p = design.marginal_treat_prob(j)
        lam = hazard.baseline_rate(j)
        total += p * censored_prob(lam * math.exp(0.4)) + (1 - p) * censored_prob(lam)
    expect = total / 4
    n_obs = 40 * len(ds)
    assert 0.38 <= expect <= 0.42
    assert observed == pytest.approx(expect, abs=4 * math.sqrt(0.25 / n_obs))


def test_extreme_negative_effect_censors_all_treated():
    design = build_balanced_design(3, 4, m=6)
    hazard = HazardSpec(lambda0=LN5, beta=-30.0)
    corr = CorrelationSpec(mode="kendall", tau_w=0.05, tau_b=0.01)
    ds = generate_trial(design, hazard, CensoringSpec(), corr, seed=1)
    treated = ds.treatment == 1
    assert np.all(ds.event[treated] == 0)


def test_exchangeability_within_cluster_period():
    # permuting individuals within every cluster-period leaves cluster-level
    # statistics untouched
    from swpower.coxfit import fit_cox

    design, ds = make_trial(seed=31)
    rng = np.random.default_rng(0)
    order = np.arange(len(ds))
    for c in np.unique(ds.cluster):
        for j in np.unique(ds.period):
            cell = np.flatnonzero((ds.cluster == c) & (ds.period == j))
            order[cell] = rng.permutation(cell)
    shuffled = TrialDataset(
        cluster=ds.cluster[order], period=ds.period[order],
        individual=ds.individual, time=ds.time[order],
        event=ds.event[order], treatment=ds.treatment[order],
    )
    assert fit_cox(ds).beta_hat == fit_cox(shuffled).beta_hat


def test_kendall_tau_estimator():
    x = np.arange(50, dtype=float)
    assert empirical_kendall_tau(x, 2 * x + 1) == 1.0
    rng = np.random.default_rng(2)
    u, v = rng.uniform(size=10**5), rng.uniform(size=10**5)
    assert abs(empirical_kendall_tau(u, v)) < 0.01
    with pytest.raises(ValueError):
        empirical_kendall_tau([1.0], [2.0])


def test_kendall_tau_gumbel_theta_two():
    # tau = 1 - 1/theta: theta = 2 gives tau = 1/2
    hazard = HazardSpec(lambda0=1.0)
    corr = CorrelationSpec(mode="kendall", tau_w=0.5, tau_b=0.0)
    rng = np.random.default_rng(23)
    pairs = np.empty((40000, 2))
    for i in range(len(pairs)):
        pairs[i] = sample_cluster(np.array([0, 1]), 2, hazard, corr, rng)[0]
    assert empirical_kendall_tau(pairs[:, 0], pairs[:, 1]) == pytest.approx(0.5, abs=0.01)


def test_csv_round_trip_bit_exact():
    _, ds = make_trial(seed=12)
    again = TrialDataset.from_csv(ds.to_csv())
    assert np.array_equal(ds.time, again.time)
    assert np.array_equal(ds.event, again.event)
    assert np.array_equal(ds.cluster, again.cluster)
    assert np.array_equal(ds.period, again.period)
    assert np.array_equal(ds.individual, again.individual)
    assert np.array_equal(ds.treatment, again.treatment)


def test_csv_rejects_bad_header():
    with pytest.raises(ValueError, match="header"):
        TrialDataset.from_csv("a,b,c\n1,2,3\n")
