"""Two-cell divergence statistics and their certified distance bounds.

scipy.stats.power_divergence is the independent route for the statistic
values; the bound constants are checked against independently simplified
closed forms and against each other where one bound specializes another.
"""

import math

import numpy as np
import pytest
import scipy.stats

from steinaudit.limit_bounds import make_moment_oracle
from steinaudit.power_divergence import (
    AlphaPolicy,
    CountVector,
    MultinomialModel,
    bound_pearson,
    bound_power_divergence,
    kolmogorov_bound_pd,
    pearson_statistic,
    power_divergence_statistic,
    sqrt_representation_components,
    square_root_representation,
    w2_generic_bounds,
    w3h_prime_bound,
)

SQ2PI = math.sqrt(2.0 / math.pi)


def _random_pairs(rng, n, count):
    return [int(v) for v in rng.binomial(n, 0.37, size=count)]


# --------------------------------------------------------------------------
# statistics


def test_pearson_equals_squared_standardized_count():
    rng = np.random.default_rng(101)
    model = MultinomialModel(50, 0.3)
    for u1 in _random_pairs(rng, 50, 300):
        U = CountVector(u1, 50 - u1)
        t = pearson_statistic(U, model)
        w = square_root_representation(U, model)
        assert abs(t - w * w) <= 1e-12 * max(1.0, t)


def test_power_divergence_at_one_is_pearson():
    rng = np.random.default_rng(202)
    model = MultinomialModel(80, 0.3)
    for u1 in _random_pairs(rng, 80, 300):
        U = CountVector(u1, 80 - u1)
        t1 = power_divergence_statistic(U, model, 1.0)
        tp = pearson_statistic(U, model)
        assert abs(t1 - tp) <= 1e-12 * max(1.0, tp)


def test_statistic_matches_scipy_family():
    rng = np.random.default_rng(303)
    model = MultinomialModel(60, 0.25)
    expected = [60 * 0.25, 60 * 0.75]
    for u1 in _random_pairs(rng, 60, 100):
        U = CountVector(u1, 60 - u1)
        for lam in (0.0, 2.0 / 3.0, 1.0, 2.0, 5.0, -0.5):
            want = scipy.stats.power_divergence(
                f_obs=[U.u1, U.u2], f_exp=expected, lambda_=lam
            ).statistic
            got = power_divergence_statistic(U, model, lam)
            assert abs(got - want) <= 1e-10 * max(1.0, abs(want)), (u1, lam)


def test_zero_lambda_is_log_likelihood_ratio():
    model = MultinomialModel(30, 0.4)
    U = CountVector(18, 12)
    want = 2.0 * (18.0 * math.log(18.0 / 12.0) + 12.0 * math.log(12.0 / 18.0))
    assert abs(power_divergence_statistic(U, model, 0.0) - want) < 1e-12


def test_small_lambda_approaches_the_log_limit():
    rng = np.random.default_rng(404)
    model = MultinomialModel(100, 0.5)
    for u1 in _random_pairs(rng, 100, 100):
        U = CountVector(u1, 100 - u1)
        t0 = power_divergence_statistic(U, model, 0.0)
        t_eps = power_divergence_statistic(U, model, 1e-6)
        assert abs(t_eps - t0) <= 1e-4


def test_statistic_nonnegative_and_zero_only_at_expectation():
    model = MultinomialModel(40, 0.5)
    for lam in (0.0, 2.0 / 3.0, 1.0, 2.0):
        for u1 in range(0, 41, 4):
            val = power_divergence_statistic(CountVector(u1, 40 - u1), model, lam)
            assert val >= -1e-13
        assert power_divergence_statistic(CountVector(20, 20), model, lam) == pytest.approx(
            0.0, abs=1e-13
        )


def test_zero_counts_are_finite():
    model = MultinomialModel(25, 0.2)
    for lam in (0.0, 2.0 / 3.0, 2.0):
        val = power_divergence_statistic(CountVector(0, 25), model, lam)
        assert math.isfinite(val) and val > 0.0


def test_statistic_input_validation():
    model = MultinomialModel(10, 0.5)
    with pytest.raises(ValueError):
        power_divergence_statistic(CountVector(4, 5), model, 1.0)  # counts sum != n
    with pytest.raises(ValueError):
        power_divergence_statistic(CountVector(5, 5), model, -1.0)  # family boundary
    with pytest.raises(ValueError):
        CountVector(-1, 11)
    with pytest.raises(ValueError):
        MultinomialModel(0, 0.5)
    with pytest.raises(ValueError):
        MultinomialModel(10, 0.0)
    with pytest.raises(ValueError):
        MultinomialModel(10, 0.5, 0.6)


def test_sqrt_representation_components_identities():
    model = MultinomialModel(50, 0.3)
    U = CountVector(22, 28)
    w, s1, s2 = sqrt_representation_components(U, model)
    assert abs(w - (22.0 - 15.0) / math.sqrt(50.0 * 0.3 * 0.7)) < 1e-14
    assert abs(s1 - math.sqrt(0.7) * w) < 1e-14
    assert abs(s2 - math.sqrt(0.3) * w) < 1e-14
    assert abs(s1 * s1 + s2 * s2 - w * w) < 1e-12


# --------------------------------------------------------------------------
# Pearson bounds


def test_pearson_wasserstein_values():
    rep = bound_pearson("wasserstein", MultinomialModel(10_000, 0.5))
    assert rep.value == pytest.approx(0.5)
    assert rep.combination == "min"
    assert rep.certified
    assert rep.extras["unsimplified_constants"] == (24.0, 17.0)
    assert rep.extras["unsimplified_value"] == pytest.approx((24.0 + 17.0 / 50.0) / 50.0)
    assert rep.extras["sharper_of_the_two"] == pytest.approx((24.0 + 17.0 / 50.0) / 50.0)
    # tiny samples fall back to the trivial cap
    small = bound_pearson("wasserstein", MultinomialModel(4, 0.5))
    assert small.value == 2.0
    assert small.term("trivial-cap").value == 2.0


def test_pearson_simplification_crossover():
    # the two-constant form is sharper than 25/s exactly when s >= 17
    at = bound_pearson("wasserstein", MultinomialModel(1156, 0.5))  # s = 17
    assert at.extras["unsimplified_value"] == pytest.approx(25.0 / 17.0)
    assert at.value == pytest.approx(25.0 / 17.0)
    below = bound_pearson("wasserstein", MultinomialModel(100, 0.5))  # s = 5
    assert below.extras["unsimplified_value"] > below.value


def test_pearson_kolmogorov_values():
    rep = bound_pearson("kolmogorov", MultinomialModel(10_000, 0.5))
    assert rep.value == pytest.approx(0.9496 / 50.0)
    tiny = bound_pearson("kolmogorov", MultinomialModel(4, 0.5))
    assert tiny.value == pytest.approx(0.9496)  # still below the trivial cap 1


def test_pearson_smooth_value():
    rep = bound_pearson("smooth", MultinomialModel(10_000, 0.5), norms=(1.0, 1.0))
    assert rep.value == pytest.approx(892.0 * 2.0 / 2500.0)
    assert rep.term("norm-sum-term").detail["constant"] == 892.0
    with pytest.raises(ValueError):
        bound_pearson("smooth", MultinomialModel(100, 0.5))
    with pytest.raises(ValueError):
        bound_pearson("total-variation", MultinomialModel(100, 0.5))


# --------------------------------------------------------------------------
# family bounds


def test_family_wasserstein_constant():
    model = MultinomialModel(10_000, 0.5)
    at_one = bound_power_divergence("wasserstein", model, 1.0)
    assert at_one.extras["constant"] == pytest.approx(25.0)
    assert at_one.value == pytest.approx(bound_pearson("wasserstein", model).value)
    lam = 2.0 / 3.0
    rep = bound_power_divergence("wasserstein", model, lam)
    want = 25.0 + math.sqrt(2.0) * abs((lam - 1.0) * (4.0 * lam + 7.0)) / (lam + 1.0)
    assert rep.extras["constant"] == pytest.approx(want)
    assert rep.extras["constant"] == pytest.approx(25.0 + math.sqrt(2.0) * 29.0 / 15.0)
    assert rep.value == pytest.approx(want / 50.0)
    capped = bound_power_divergence("wasserstein", MultinomialModel(4, 0.5), 5.0)
    assert capped.value == 2.0


def test_family_smooth_reduces_to_pearson_at_one():
    model = MultinomialModel(10_000, 0.5)
    fam = bound_power_divergence("smooth", model, 1.0, norms=(1.0, 1.0))
    base = bound_pearson("smooth", model, norms=(1.0, 1.0))
    assert fam.value == pytest.approx(base.value)
    assert fam.term("curvature-term").value == 0.0
    assert fam.term("odd-skew-term").value == 0.0


def test_family_smooth_piecewise_structure():
    model = MultinomialModel(10_000, 0.5)
    q = 2500.0
    rep = bound_power_divergence("smooth", model, 2.0, norms=(1.0, 1.0))
    # lambda = 2 zeroes the odd piece through the (lambda - 2) factor
    assert rep.term("odd-skew-term").value == 0.0
    assert rep.term("norm-sum-term").value == pytest.approx((892.0 + 496.0) * 2.0 / q)
    assert rep.term("curvature-term").value == pytest.approx(19.0 / 9.0 / q)
    assert rep.value == pytest.approx((2776.0 + 19.0 / 9.0) / q)

    lam = 2.0 / 3.0
    rep2 = bound_power_divergence("smooth", model, lam, norms=(2.0, 0.5))
    base = (892.0 + 496.0 / 3.0) * 2.5 / q
    curvature = (19.0 / 9.0) * (1.0 / 9.0) * 0.5 / q
    odd = (1.0 / 3.0) * (4.0 / 3.0) * 21.0 * 2.0 / (6.0 * (5.0 / 3.0) * q)
    assert rep2.value == pytest.approx(base + curvature + odd)


def test_family_rejects_boundary_lambda_and_bad_metric():
    model = MultinomialModel(100, 0.5)
    with pytest.raises(ValueError):
        bound_power_divergence("wasserstein", model, -1.0)
    with pytest.raises(ValueError):
        bound_power_divergence("smooth", model, 1.0)  # norms missing
    with pytest.raises(ValueError):
        bound_power_divergence("kolmogorov", model, 1.0)  # separate entry point


# --------------------------------------------------------------------------
# Kolmogorov bound for the family


def test_kolmogorov_fixed_matches_closed_form():
    # raw value below the trivial cap: needs a very large sample
    model = MultinomialModel(100_000_000, 0.5)
    q = model.np1p2
    alpha = 0.05
    rep = kolmogorov_bound_pd(model, 1.0, AlphaPolicy.fixed(alpha))
    c1 = 2.0 * 892.0 / q
    c2 = 4.0 * 892.0 / q
    want = c1 / alpha + c2 / alpha**2 + SQ2PI * math.sqrt(alpha)
    assert want < 1.0
    assert rep.value == pytest.approx(want)
    assert rep.extras["objective_coefficients"] == pytest.approx((c1, c2, SQ2PI))
    # raw value above the cap: the closed form survives in the term breakdown
    small = MultinomialModel(10_000, 0.5)
    rep2 = kolmogorov_bound_pd(small, 1.0, AlphaPolicy.fixed(2.0))
    raw = (2.0 * 892.0 / 2500.0) / 2.0 + (4.0 * 892.0 / 2500.0) / 4.0 + SQ2PI * math.sqrt(2.0)
    assert raw > 1.0
    assert rep2.value == 1.0
    assert rep2.term("smoothed-total").value == pytest.approx(raw)


def test_kolmogorov_optimizer_beats_fixed_and_dense_grid():
    model = MultinomialModel(100_000_000, 0.5)
    for lam in (0.0, 2.0 / 3.0, 1.0, 2.0):
        opt = kolmogorov_bound_pd(model, lam, AlphaPolicy.optimize())
        for alpha in (0.01, 0.1, 1.0, 10.0):
            fixed = kolmogorov_bound_pd(model, lam, AlphaPolicy.fixed(alpha))
            assert opt.value <= fixed.value * (1.0 + 1e-12)
        # independent dense scan of the same objective
        c1, c2, c3 = opt.extras["objective_coefficients"]
        grid = np.geomspace(1e-6, 1e4, 20000)
        dense = float(np.min(c1 / grid + c2 / grid**2 + c3 * np.sqrt(grid)))
        assert dense < 1.0  # scan sits below the cap at this sample size
        assert opt.value <= dense * (1.0 + 1e-9)
        assert opt.value >= dense * (1.0 - 1e-6)
        assert opt.extras["alpha"] > 0


def test_kolmogorov_structure_and_cap():
    rep = kolmogorov_bound_pd(MultinomialModel(100_000_000, 0.5), 1.0, AlphaPolicy.optimize())
    assert rep.value < 1.0
    assert {t.label for t in rep.terms} == {"smoothing", "gaussian-tail"}
    assert rep.value == pytest.approx(
        rep.extras["smoothing_term"] + rep.extras["tail_term"]
    )
    # moderate samples still sit above the trivial cap on this route
    capped = kolmogorov_bound_pd(MultinomialModel(10_000, 0.5), 1.0, AlphaPolicy.optimize())
    assert capped.value == 1.0
    assert capped.combination == "min"


def test_kolmogorov_rate_form_is_not_certified():
    model = MultinomialModel(10_000, 0.5)
    lam = 2.0
    rep = kolmogorov_bound_pd(model, lam, AlphaPolicy.paper_form(3.0, 1.0, 0.5))
    q = model.np1p2
    want = q ** (-0.2) * (
        3.0
        + 1.0 * (lam - 1.0) ** 2
        + 0.5 * abs((lam - 1.0) * (lam - 2.0) * (12.0 * lam + 13.0)) / ((lam + 1.0) * q**0.4)
    )
    assert rep.value == pytest.approx(min(want, 1.0))
    assert not rep.certified
    assert any(a.status == "asserted" for a in rep.assumptions)


def test_alpha_policy_validation():
    with pytest.raises(ValueError):
        AlphaPolicy.fixed(0.0)
    with pytest.raises(ValueError):
        AlphaPolicy.paper_form(-1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        kolmogorov_bound_pd(MultinomialModel(100, 0.5), -1.5, AlphaPolicy.optimize())


# --------------------------------------------------------------------------
# odd cubic-weighted term


def test_odd_cubic_flat_constant_and_chain():
    model = MultinomialModel(10_000, 0.5)
    rep = w3h_prime_bound(model, (1.0, 1.0))
    assert rep.value == pytest.approx(2976.0 * 2.0 / 50.0)
    cc = rep.extras["chain_constants"]
    assert cc["alpha4_times_base"] == pytest.approx(21.0 / 2.0)
    assert cc["c4_beta4"] == pytest.approx(72.0)
    assert cc["gamma4"] == pytest.approx(40.0 * SQ2PI, abs=1e-9)
    assert cc["hprime_flat"] == pytest.approx(63.0 / 4.0 + 1944.0 + 360.0 * SQ2PI, abs=1e-9)
    assert cc["hsecond_flat"] == pytest.approx(2592.0 + 480.0 * SQ2PI, abs=1e-9)
    assert math.ceil(cc["hprime_flat"]) == 2247 == cc["hprime_flat_ceiling"]
    assert math.ceil(cc["hsecond_flat"]) == 2975 == cc["hsecond_flat_ceiling"]
    assert cc["hprime_eps"] == 648.0 and cc["hprime_eps2"] == 648.0
    assert cc["hsecond_eps"] == 864.0 and cc["hsecond_eps2"] == 864.0
    # ceiled contract dominates the sharp evaluation it rounds up
    assert rep.extras["chain_value_sharp"] <= rep.extras["chain_value"] * (1.0 + 1e-12)
    eps = 1.0 / model.np1p2
    assert rep.extras["chain_value"] == pytest.approx(
        (2975.0 + 864.0 * eps + 864.0 * eps**2) * 2.0 * math.sqrt(eps)
    )
    assert rep.certified  # chain stays below the flat constant at this size


def test_odd_cubic_chain_dominance_across_models():
    for n, p1 in ((100, 0.5), (1000, 0.3), (10_000, 0.1), (250, 0.5)):
        rep = w3h_prime_bound(MultinomialModel(n, p1), (1.0, 0.5))
        assert rep.extras["chain_value_sharp"] <= rep.extras["chain_value"] * (1.0 + 1e-12)


def test_odd_cubic_flags_small_samples():
    rep = w3h_prime_bound(MultinomialModel(4, 0.5), (1.0, 1.0))
    assert not rep.certified
    assert any("flat constant" in a.clause for a in rep.assumptions)
    with pytest.raises(ValueError):
        w3h_prime_bound(MultinomialModel(100, 0.5), (-1.0, 1.0))


# --------------------------------------------------------------------------
# generic squared-sum bounds


def test_generic_squared_sum_wasserstein():
    rad = make_moment_oracle("rademacher")
    rep = w2_generic_bounds("wasserstein", rad, 400)
    assert rep.value == pytest.approx(24.0 / 20.0 + 17.0 / 400.0)
    assert rep.term("abs-moment-3").detail["constant"] == 24.0
    assert rep.term("moment-4").detail["constant"] == 17.0

    p1, p2 = 0.3, 0.7
    bern = make_moment_oracle("bernoulli_standardized", p1=p1)
    scale = math.sqrt(p1 * p2)
    m3 = (p1 * p2**3 + p2 * p1**3) / scale**3
    m4 = (p1 * p2**4 + p2 * p1**4) / scale**4
    rep2 = w2_generic_bounds("wasserstein", bern, 900)
    assert rep2.value == pytest.approx(24.0 * m3 / 30.0 + 17.0 * m4 / 900.0)


def test_generic_bound_never_beats_capped_moments():
    # the two-cell Pearson form uses moment caps; the exact-moment route must
    # come in at or below it for every cell probability
    for p1 in (0.1, 0.3, 0.5):
        model = MultinomialModel(400, p1)
        bern = make_moment_oracle("bernoulli_standardized", p1=p1)
        generic = w2_generic_bounds("wasserstein", bern, 400)
        capped = bound_pearson("wasserstein", model).extras["unsimplified_value"]
        assert generic.value <= capped * (1.0 + 1e-12)


def test_generic_squared_sum_smooth():
    uni = make_moment_oracle("uniform_standardized")
    rep = w2_generic_bounds("smooth", uni, 100, norms=(1.0, 1.0))
    m4 = uni.abs_moment(4)
    m6 = uni.abs_moment(6)
    assert rep.term("skew-times-abs-3").value == 0.0  # symmetric law
    assert rep.term("skew-times-abs-5-over-n").value == 0.0
    assert rep.value == pytest.approx((2.0 / 100.0) * (187.0 * m4 + 131.0 * m6 / 100.0))

    bern = make_moment_oracle("bernoulli_standardized", p1=0.3)
    rep2 = w2_generic_bounds("smooth", bern, 100, norms=(1.0, 0.0))
    skew = abs(bern.signed_moment(3))
    want = (1.0 / 100.0) * (
        187.0 * bern.abs_moment(4)
        + 131.0 * bern.abs_moment(6) / 100.0
        + skew * (704.0 * bern.abs_moment(3) + 468.0 * bern.abs_moment(5) / 100.0)
    )
    assert rep2.value == pytest.approx(want)


def test_generic_bounds_validation():
    rad = make_moment_oracle("rademacher")
    with pytest.raises(ValueError):
        w2_generic_bounds("wasserstein", rad, 0)
    with pytest.raises(ValueError):
        w2_generic_bounds("smooth", rad, 100)
    with pytest.raises(ValueError):
        w2_generic_bounds("kolmogorov", rad, 100)
