import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ppm_lab._numeric import golden_section_max, harmonic
from ppm_lab.distributions import (
    DomainError,
    Exponential,
    OrderStatsTable,
    Uniform,
    Weibull,
    check_babaioff_ratio,
    check_quantile_maximum,
    check_quantiles1,
    check_quantiles2,
    conditional_mean_above,
    hazard_monotone_check,
    max_expectation,
    order_stat_mean,
    parse_distribution,
    quantile,
    quantiles2_rank,
)

DISTS = [Exponential(), Exponential(2.5), Uniform(0, 1), Uniform(1, 3), Weibull(2, 1), Weibull(1.5, 2)]


def scipy_twin(d):
    if isinstance(d, Exponential):
        return stats.expon(scale=1 / d.rate)
    if isinstance(d, Uniform):
        return stats.uniform(loc=d.a, scale=d.b - d.a)
    return stats.weibull_min(d.shape, scale=d.scale)


def test_harmonic_small_and_large():
    assert harmonic(0) == 0.0
    assert harmonic(5) == pytest.approx(137 / 60, abs=1e-15)
    assert harmonic(1000) == pytest.approx(float(mpmath.harmonic(1000)), rel=1e-15)
    assert harmonic(10**6) == pytest.approx(float(mpmath.harmonic(10**6)), rel=1e-14)
    arr = harmonic(np.array([1, 2, 100]))
    assert arr.shape == (3,)
    assert arr[1] == 1.5


def test_golden_section_finds_interior_and_boundary_maxima():
    x, v = golden_section_max(lambda t: -((t - 0.3) ** 2), 0, 1)
    assert x == pytest.approx(0.3, abs=1e-6)
    x, v = golden_section_max(lambda t: t, 0, 2)
    assert x == 2.0 and v == 2.0


@pytest.mark.parametrize("d", DISTS, ids=lambda d: d.spec())
def test_cdf_pdf_ppf_match_scipy(d):
    ref = scipy_twin(d)
    x = np.linspace(d.lower, d.lower + 3.0, 41)
    np.testing.assert_allclose(d.cdf(x), ref.cdf(x), atol=1e-14)
    np.testing.assert_allclose(d.pdf(x[1:-1]), ref.pdf(x[1:-1]), rtol=1e-12)
    q = np.linspace(0.001, 0.999, 99)
    np.testing.assert_allclose(d.ppf(q), ref.ppf(q), rtol=1e-12)


@pytest.mark.parametrize("d", DISTS, ids=lambda d: d.spec())
def test_quantile_round_trip(d):
    for q in np.linspace(0.001, 0.999, 200):
        assert abs(float(d.cdf(quantile(d, q))) - q) <= 1e-9
        assert abs(float(d.cdf(quantile(d, q, method="bisect"))) - q) <= 1e-9


def test_quantile_examples():
    q = 1 - math.exp(-1)
    assert quantile(Exponential(), q) == pytest.approx(1.0, abs=1e-12)
    assert quantile(Uniform(0, 1), 0.25) == 0.25
    w = Weibull(2, 1)
    assert quantile(w, q, method="bisect") == pytest.approx(1.0, abs=1e-9)
    assert quantile(w, q) == pytest.approx(math.sqrt(-math.log(1 - q)), abs=1e-14)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_quantile_rejects_levels_outside_open_interval(q):
    with pytest.raises(DomainError):
        quantile(Exponential(), q)


def test_hazard_checks_and_weibull_rejection():
    assert hazard_monotone_check(Exponential()) == (True, None)
    assert hazard_monotone_check(Uniform(0, 1))[0]
    assert hazard_monotone_check(Weibull(3, 2))[0]
    np.testing.assert_allclose(Exponential().hazard(np.linspace(0, 10, 11)), 1.0)
    with pytest.raises(DomainError):
        Weibull(0.5, 1)


@pytest.mark.parametrize("bad", ["exp(-1)", "unif(2,1)", "weibull(1,0)"])
def test_invalid_parameters_are_rejected(bad):
    with pytest.raises(ValueError):
        parse_distribution(bad)


def test_parse_distribution_round_trip():
    for d in DISTS:
        assert parse_distribution(d.spec()) == d
    assert parse_distribution("weibull(2)") == Weibull(2, 1)
    with pytest.raises(ValueError):
        parse_distribution("gamma(2)")


def test_sampling_is_deterministic_and_in_support():
    for d in DISTS:
        a = d.sample(np.random.default_rng(5), 1000)
        b = d.sample(np.random.default_rng(5), 1000)
        np.testing.assert_array_equal(a, b)
        assert np.all(a >= d.lower) and np.all(a <= d.upper)


def test_order_stat_examples():
    e = Exponential()
    assert order_stat_mean(e, 5, 1) == pytest.approx(137 / 60, rel=1e-10)
    assert order_stat_mean(e, 5, 3) == pytest.approx(harmonic(5) - harmonic(2), rel=1e-10)
    assert order_stat_mean(Uniform(0, 1), 4, 2) == pytest.approx(0.6, abs=1e-10)
    assert max_expectation(e, 1) == pytest.approx(1.0, abs=1e-10)
    assert max_expectation(e, 1000) == pytest.approx(harmonic(1000), rel=1e-9)
    assert max_expectation(Uniform(0, 1), 9) == pytest.approx(0.9, abs=1e-10)
    with pytest.raises(DomainError):
        order_stat_mean(e, 5, 6)


def test_order_stats_of_exponential_telescope():
    e = Exponential()
    for n in (10, 40, 200):
        for k in range(1, n + 1, max(1, n // 7)):
            assert order_stat_mean(e, n, k) == pytest.approx(harmonic(n) - harmonic(k - 1), rel=1e-6)


def _order_stat_mp(d, n, k):
    # independent oracle: integrate x * f_(k)(x) with mpmath
    ref = scipy_twin(d)
    c = math.comb(n, k) * k

    def dens(x):
        x = float(x)
        F = ref.cdf(x)
        return x * c * ref.pdf(x) * (1 - F) ** (k - 1) * F ** (n - k)

    hi = float(ref.ppf(1 - 1e-15)) if not math.isfinite(d.upper) else d.upper
    return float(mpmath.quad(dens, [d.lower, float(ref.ppf(0.5)), float(ref.ppf(0.99)), hi]))


@pytest.mark.parametrize("d", [Uniform(1, 3), Weibull(2, 1), Weibull(1.5, 2)], ids=lambda d: d.spec())
def test_order_stats_match_density_quadrature(d):
    for n, k in [(3, 1), (7, 4), (12, 12)]:
        assert order_stat_mean(d, n, k) == pytest.approx(_order_stat_mp(d, n, k), rel=1e-7)


@pytest.mark.parametrize("d", [Exponential(), Uniform(0, 1), Weibull(2, 1)], ids=lambda d: d.spec())
def test_order_stats_match_monte_carlo(d):
    rng = np.random.default_rng(11)
    n = 20
    draws = -np.sort(-d.sample(rng, (50_000, n)), axis=1)
    table = OrderStatsTable.build(d, n)
    for k in range(1, n + 1):
        col = draws[:, k - 1]
        se = col.std(ddof=1) / math.sqrt(len(col))
        assert abs(col.mean() - table[k]) <= 4 * se


def test_conditional_mean_above():
    assert conditional_mean_above(Exponential(), 2.0) == pytest.approx(3.0, rel=1e-10)
    assert conditional_mean_above(Uniform(0, 1), 0.5) == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(DomainError):
        conditional_mean_above(Uniform(0, 1), 1.0)


def test_quantiles1_examples():
    assert check_quantiles1(Uniform(0, 1), 10, 1, 0.5)
    with pytest.raises(DomainError):
        check_quantiles1(Exponential(), 10, 5, 0.5 * math.exp(harmonic(4) - harmonic(10)))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 60), data=st.data())
def test_quantiles1_is_tight_for_exponential(n, data):
    j = data.draw(st.integers(1, n))
    gap = harmonic(n) - harmonic(j - 1)
    q = data.draw(st.floats(math.exp(-gap), 1.0, exclude_max=True))
    e = Exponential()
    assert check_quantiles1(e, n, j, q)
    lhs = float(e.ppf(1 - q))
    rhs = -math.log(q) / gap * order_stat_mean(e, n, j)
    assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-12)


def test_quantiles2_examples():
    k = quantiles2_rank(100, 0.1)
    assert k == math.floor(10 + math.sqrt(100 * math.log(100)))
    assert check_quantiles2(Exponential(), 100, 0.1)
    assert check_quantiles2(Uniform(0, 1), 400, 0.05)
    assert check_quantiles2(Weibull(2, 1), 4, 0.9)  # rank beyond n: vacuous


def test_quantile_maximum_examples():
    # the listed Exp example (z=0.1, k=20) has alpha < 1, so it is outside the
    # admissible set; k = 8 keeps alpha >= 1 and alpha * k <= 1/z
    alpha = (1 + math.log(10)) / harmonic(20)
    with pytest.raises(DomainError):
        check_quantile_maximum(Exponential(), 0.1, 20, alpha)
    alpha8 = max(1.0, (1 + math.log(10)) / harmonic(8))
    assert check_quantile_maximum(Exponential(), 0.1, 8, alpha8)
    # z=0.2, k=4 with the tightest alpha gives alpha * k = 5.01 > 1/z; k = 3 fits
    tight4 = (1 + math.log(5)) / harmonic(4)
    with pytest.raises(DomainError):
        check_quantile_maximum(Uniform(0, 1), 0.2, 4, tight4)
    tight3 = (1 + math.log(5)) / harmonic(3)
    assert check_quantile_maximum(Uniform(0, 1), 0.2, 3, tight3)
    with pytest.raises(DomainError):
        check_quantile_maximum(Exponential(), 0.5, 3, 0.5)


def test_babaioff_examples():
    e = Exponential()
    assert check_babaioff_ratio(e, 10, 100)
    ratio = max_expectation(e, 10) / max_expectation(e, 100)
    assert ratio == pytest.approx(harmonic(10) / harmonic(100), rel=1e-9)
    assert check_babaioff_ratio(Uniform(0, 1), 2, 8)
    assert check_babaioff_ratio(Weibull(2, 1), 7, 7)
    with pytest.raises(DomainError):
        check_babaioff_ratio(e, 5, 3)
