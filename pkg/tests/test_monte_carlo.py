"""Seeded sampling, empirical distance estimators, and the audit driver.

Estimator oracles: chi-square quantile grids (closed-form expected distances),
a dense direct integration of |F_N - F| that shares no code with the shipped
piecewise-exact route, characteristic-function values for the smooth targets,
and exact enumeration for discrete statistics.
"""

import cmath
import math

import numpy as np
import pytest
import scipy.stats
from scipy.integrate import quad

from steinaudit.limit_bounds import SumSpecification, make_moment_oracle
from steinaudit.monte_carlo import (
    SMOOTH_BATTERY,
    AuditExperiment,
    DistanceEstimate,
    RngSeed,
    audit,
    chi2_1_expectation,
    empirical_kolmogorov_chi2_1,
    empirical_wasserstein_chi2_1,
    make_smoothing_bump,
    sample_component_sum,
    sample_statistic,
    smooth_discrepancy,
    splitmix64,
)
from steinaudit.power_divergence import (
    CountVector,
    MultinomialModel,
    power_divergence_statistic,
)


# --------------------------------------------------------------------------
# seeding


def test_splitmix_known_values():
    # published trajectory of the SplitMix64 generator from seed 0 / seed 1
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4
    assert splitmix64(1) == 0x910A2DEC89025CC1


def test_child_seed_separation():
    seed = RngSeed(42)
    a = seed.child_seed("exp-a", 0)
    assert a == seed.child_seed("exp-a", 0)
    assert a != seed.child_seed("exp-a", 1)
    assert a != seed.child_seed("exp-b", 0)
    assert a != RngSeed(43).child_seed("exp-a", 0)
    g1 = seed.generator("exp-a", 0)
    g2 = seed.generator("exp-a", 0)
    assert np.array_equal(g1.random(5), g2.random(5))
    with pytest.raises(ValueError):
        RngSeed(-1)
    with pytest.raises(ValueError):
        RngSeed(1 << 64)


def test_sampling_is_thread_invariant():
    model = MultinomialModel(50, 0.3)
    # two full chunks plus a remainder
    N = (1 << 18) + 1000
    one = sample_statistic("pearson", model, N, 7, threads=1)
    four = sample_statistic("pearson", model, N, 7, threads=4)
    assert np.array_equal(one, four)
    again = sample_statistic("pearson", model, N, 7, threads=2)
    assert np.array_equal(one, again)
    other_seed = sample_statistic("pearson", model, N, 8, threads=1)
    assert not np.array_equal(one, other_seed)


def test_pearson_samples_live_on_the_exact_support():
    model = MultinomialModel(12, 0.3)
    table = np.sort(
        np.unique(
            [
                (u1 - 12 * 0.3) ** 2 / (12 * 0.3 * 0.7)
                for u1 in range(13)
            ]
        )
    )
    samples = sample_statistic("pearson", model, 5000, 3)
    idx = np.searchsorted(table, samples)
    idx = np.clip(idx, 0, len(table) - 1)
    left = np.abs(table[np.maximum(idx - 1, 0)] - samples)
    right = np.abs(table[idx] - samples)
    assert float(np.minimum(left, right).max()) < 1e-12


def test_pearson_sampling_frequencies_match_binomial():
    # exact pmf comparison cell by cell, 5 sigma per cell
    n, p1, N = 5, 0.5, 200_000
    model = MultinomialModel(n, p1)
    samples = sample_statistic("pearson", model, N, 11)
    w2 = np.array([(u1 - n * p1) ** 2 / (n * p1 * (1 - p1)) for u1 in range(n + 1)])
    pmf = np.array([math.comb(n, u1) * p1**u1 * (1 - p1) ** (n - u1) for u1 in range(n + 1)])
    for value in np.unique(w2):
        prob = pmf[np.abs(w2 - value) < 1e-12].sum()
        hits = int(np.sum(np.abs(samples - value) < 1e-12))
        se = math.sqrt(N * prob * (1.0 - prob))
        assert abs(hits - N * prob) <= 5.0 * se, value


def test_pd_samples_match_statistic_enumeration():
    model = MultinomialModel(9, 0.4)
    lam = 2.0 / 3.0
    table = np.array(
        [
            power_divergence_statistic(CountVector(u1, 9 - u1), model, lam)
            for u1 in range(10)
        ]
    )
    samples = sample_statistic("power_divergence", model, 3000, 13, lam=lam)
    assert all(np.min(np.abs(table - s)) < 1e-12 for s in samples)
    with pytest.raises(ValueError):
        sample_statistic("power_divergence", model, 100, 13)  # lam missing


def test_w_sum_sampler_families():
    rad = SumSpecification([1], [make_moment_oracle("rademacher")])
    vals = sample_statistic("w_sum", rad, 4000, 17)
    assert set(np.unique(vals)) == {-1.0, 1.0}

    uni = SumSpecification([2], [make_moment_oracle("uniform_standardized")])
    u = sample_statistic("w_sum", uni, 50_000, 19)
    assert float(np.abs(u).max()) <= math.sqrt(6.0) + 1e-12
    var = float(np.var(u))
    se = math.sqrt(2.0 / 50_000)  # rough variance-of-variance scale
    assert abs(var - 1.0) < 5.0 * se

    table_spec = SumSpecification(
        [4],
        [
            make_moment_oracle(
                "table",
                abs_moments={k: 1.0 for k in range(1, 9)},
                signed_moments={k: (0.0 if k % 2 else 1.0) for k in range(1, 9)},
                matching_order=3,
            )
        ],
    )
    with pytest.raises(ValueError):
        sample_statistic("w_sum", table_spec, 100, 17)
    with pytest.raises(ValueError):
        sample_statistic("spin", rad, 100, 17)
    with pytest.raises(ValueError):
        sample_statistic("w_sum", rad, 0, 17)


def test_component_sum_fourth_moment_matches_identity():
    p1 = 0.3
    spec = SumSpecification([200], [make_moment_oracle("bernoulli_standardized", p1=p1)])
    draws = sample_component_sum(spec, 0, 200_000, 23)
    powered = draws**4
    mean = float(powered.mean())
    se = float(powered.std(ddof=1) / math.sqrt(len(powered)))
    m4 = spec.oracles[0].signed_moment(4)
    exact = 3.0 * 199.0 / 200.0 + m4 / 200.0
    assert abs(mean - exact) <= 5.0 * se


# --------------------------------------------------------------------------
# Wasserstein estimator


def test_wasserstein_point_mass_at_zero():
    # empirical CDF jumps to 1 at 0, so the distance is the reference mean: 1
    est = empirical_wasserstein_chi2_1(np.zeros(100), n_boot=0)
    assert est.estimate == pytest.approx(1.0, abs=1e-12)
    assert est.standard_error == 0.0
    assert est.sample_count == 100


def test_wasserstein_quantile_grid_against_direct_integration():
    N = 10_000
    qs = scipy.stats.chi2.ppf((np.arange(1, N + 1) - 0.5) / N, df=1)
    est = empirical_wasserstein_chi2_1(qs, n_boot=0)
    assert est.estimate == pytest.approx(0.0005093281273958101, abs=1e-12)

    # independent route: trapezoid integration of |F_N - F| on a dense grid,
    # with scipy's chi-square CDF and an analytic tail beyond the last sample
    grid = np.linspace(0.0, float(qs[-1]), 2_000_000)
    emp = np.searchsorted(qs, grid, side="right") / N
    ref = scipy.stats.chi2.cdf(grid, df=1)
    body = float(np.trapezoid(np.abs(emp - ref), grid))
    last = float(qs[-1])
    tail = (1.0 - scipy.stats.gamma.cdf(last / 2.0, 1.5)) - last * (
        1.0 - scipy.stats.chi2.cdf(last, df=1)
    )
    assert abs(est.estimate - (body + tail)) < 1e-8


def test_wasserstein_needs_enough_samples():
    with pytest.raises(ValueError):
        empirical_wasserstein_chi2_1(np.ones(99))
    with pytest.raises(ValueError):
        empirical_wasserstein_chi2_1(-np.ones(200))
    with pytest.raises(ValueError):
        empirical_wasserstein_chi2_1(np.full(200, np.nan))
    with pytest.raises(ValueError):
        empirical_wasserstein_chi2_1(np.ones((10, 20)))


def test_wasserstein_bootstrap_is_seeded():
    rng = np.random.default_rng(31)
    samples = rng.standard_normal(2000) ** 2
    a = empirical_wasserstein_chi2_1(samples, seed=5, n_boot=50)
    b = empirical_wasserstein_chi2_1(samples, seed=5, n_boot=50)
    c = empirical_wasserstein_chi2_1(samples, seed=6, n_boot=50)
    assert a.standard_error == b.standard_error
    assert a.standard_error > 0
    assert a.standard_error != c.standard_error
    assert a.estimate == c.estimate  # the point estimate ignores the bootstrap


def test_estimators_shrink_with_sample_size():
    # one seeded realization; the error of the empirical law scales like
    # 1/sqrt(N), so a 100x budget should shrink both distances by roughly 10x
    z_small = np.random.default_rng(5).standard_normal(10_000) ** 2
    z_big = np.random.default_rng(5).standard_normal(1_000_000) ** 2
    w_small = empirical_wasserstein_chi2_1(z_small, n_boot=0).estimate
    w_big = empirical_wasserstein_chi2_1(z_big, n_boot=0).estimate
    k_small = empirical_kolmogorov_chi2_1(z_small, n_boot=0).estimate
    k_big = empirical_kolmogorov_chi2_1(z_big, n_boot=0).estimate
    assert 10.0 / 3.0 < w_small / w_big < 30.0
    assert 10.0 / 3.0 < k_small / k_big < 30.0


# --------------------------------------------------------------------------
# Kolmogorov estimator


def test_kolmogorov_single_point_at_median():
    median = scipy.stats.chi2.ppf(0.5, df=1)
    est = empirical_kolmogorov_chi2_1(np.array([median]), n_boot=0)
    assert est.estimate == pytest.approx(0.5, abs=1e-12)
    assert est.sample_count == 1


def test_kolmogorov_quantile_grid_is_half_step():
    N = 10_000
    qs = scipy.stats.chi2.ppf((np.arange(1, N + 1) - 0.5) / N, df=1)
    est = empirical_kolmogorov_chi2_1(qs, n_boot=0)
    assert est.estimate == pytest.approx(0.5 / N, rel=1e-6)


def test_kolmogorov_point_mass_and_bounds():
    est = empirical_kolmogorov_chi2_1(np.zeros(50), n_boot=0)
    assert est.estimate == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        DistanceEstimate(1.5, 0.0, 10, "kolmogorov")
    with pytest.raises(ValueError):
        DistanceEstimate(-0.1, 0.0, 10, "wasserstein")


# --------------------------------------------------------------------------
# smooth discrepancies


def test_reference_expectations_closed_forms():
    assert chi2_1_expectation(lambda y: 1.0) == pytest.approx(1.0, abs=1e-10)
    assert chi2_1_expectation(lambda y: y) == pytest.approx(1.0, abs=1e-10)
    assert chi2_1_expectation(lambda y: y * y) == pytest.approx(3.0, abs=1e-9)
    # E[sin(Z^2)] = Im[(1 - 2i)^{-1/2}], E[exp(-Z^2)] = 3^{-1/2}
    assert chi2_1_expectation(np.sin) == pytest.approx(
        ((1 - 2j) ** -0.5).imag, abs=1e-10
    )
    assert chi2_1_expectation(np.sin) == pytest.approx(0.3515775842541429, abs=1e-10)
    assert chi2_1_expectation(lambda y: math.exp(-y)) == pytest.approx(
        1.0 / math.sqrt(3.0), abs=1e-10
    )


def test_reference_expectation_against_scipy_density():
    # dual quadrature route through the chi-square density itself
    for fn in (np.sin, lambda y: 1.0 / (1.0 + y)):
        want, err = quad(
            lambda y: fn(y) * scipy.stats.chi2.pdf(y, df=1), 0.0, np.inf, limit=200
        )
        assert err < 1e-6
        assert chi2_1_expectation(fn) == pytest.approx(want, abs=5e-8)


def test_reference_expectation_rejects_divergent_targets():
    with pytest.raises(ValueError):
        chi2_1_expectation(lambda y: math.exp(y))  # overflows in double precision
    with pytest.raises(ValueError):
        chi2_1_expectation(lambda y: math.exp(0.5 * y))  # divergent but finite pointwise


def test_smooth_discrepancy_constant_sample():
    est = smooth_discrepancy(np.zeros(10), SMOOTH_BATTERY["exp-neg"])
    assert est.estimate == pytest.approx(1.0 - 1.0 / math.sqrt(3.0), abs=1e-10)
    assert est.standard_error == 0.0
    assert est.metric == "smooth"


def test_smoothing_bump_shape_and_norms():
    h = make_smoothing_bump(1.0, 0.5)
    assert h.derivative_sup_norms == (4.0, 16.0)
    xs = np.array([0.0, 1.0, 1.25, 1.5, 2.0, 5.0])
    vals = h.fn(xs)
    assert vals[0] == 1.0 and vals[1] == 1.0
    assert vals[2] == pytest.approx(0.5)
    assert vals[3] == 0.0 and vals[4] == 0.0
    fine = h.fn(np.linspace(0.5, 2.0, 2001))
    assert np.all(np.diff(fine) <= 1e-12)  # monotone descent
    # steepest slope sits at the midpoint and equals the recorded norm
    mid = 1.0 + 0.25
    slope = (h.fn(mid + 1e-7) - h.fn(mid - 1e-7)) / 2e-7
    assert abs(slope) == pytest.approx(4.0, rel=1e-5)
    with pytest.raises(ValueError):
        make_smoothing_bump(1.0, 0.0)


def test_battery_contents():
    assert set(SMOOTH_BATTERY) == {"sin", "exp-neg", "reciprocal", "bump-1-1"}
    assert SMOOTH_BATTERY["sin"].derivative_sup_norms == (1.0, 1.0)
    assert SMOOTH_BATTERY["exp-neg"].derivative_sup_norms == (1.0, 1.0)
    assert SMOOTH_BATTERY["reciprocal"].derivative_sup_norms == (1.0, 2.0)
    assert SMOOTH_BATTERY["bump-1-1"].derivative_sup_norms == (2.0, 4.0)


# --------------------------------------------------------------------------
# audit driver


def test_audit_pearson_wasserstein_row():
    exp = AuditExperiment(
        kind="pearson",
        metric="wasserstein",
        grid=((500, 0.5),),
        N=20_000,
        seed=0,
        n_boot=10,
    )
    rows = audit(exp)
    assert len(rows) == 1
    row = rows[0]
    assert row.params == {"n": 500, "p1": 0.5}
    assert row.bound == 2.0  # 25/sqrt(125) exceeds the trivial cap
    assert row.estimate + 5.0 * row.standard_error <= row.bound
    assert row.passed and row.certified
    assert row.margin == pytest.approx(
        row.bound - row.estimate - 5.0 * row.standard_error
    )
    rows_again = audit(exp)
    assert rows_again == rows
    rows_threaded = audit(exp, threads=3)
    assert rows_threaded == rows


def test_audit_family_smooth_rows():
    exp = AuditExperiment(
        kind="power_divergence",
        metric="smooth",
        grid=((400, 0.3),),
        N=10_000,
        seed=1,
        lambdas=(1.0, 2.0 / 3.0),
        battery=("sin", "bump-1-1"),
        n_boot=5,
    )
    rows = audit(exp)
    assert len(rows) == 4
    keys = {(r.params["lambda"], r.params["h"]) for r in rows}
    assert keys == {(1.0, "sin"), (1.0, "bump-1-1"), (2.0 / 3.0, "sin"), (2.0 / 3.0, "bump-1-1")}
    for row in rows:
        assert row.certified
        assert row.margin == pytest.approx(
            row.bound - row.estimate - 5.0 * row.standard_error
        )


def test_audit_experiment_validation():
    with pytest.raises(ValueError):
        AuditExperiment(kind="pearson", metric="total-variation", grid=((10, 0.5),))
    with pytest.raises(ValueError):
        AuditExperiment(kind="binomial", metric="smooth", grid=((10, 0.5),))
    with pytest.raises(ValueError):
        AuditExperiment(kind="pearson", metric="smooth", grid=())
    with pytest.raises(ValueError):
        AuditExperiment(
            kind="pearson", metric="smooth", grid=((10, 0.5),), battery=("sin", "tanh")
        )
    with pytest.raises(ValueError):
        AuditExperiment(kind="pearson", metric="smooth", grid=((10, 0.5),), N=0)
