import math

import numpy as np
import pytest
from scipy import integrate

from ppm_lab._numeric import harmonic
from ppm_lab.distributions import DomainError, Exponential, Uniform, Weibull
from ppm_lab.market import ValidationError
from ppm_lab.pricing import (
    ConfigurationError,
    additive_dynamic_prices,
    additive_static_prices,
    dynamic_independent_prices,
    dynamic_separable_prices,
    mdp_optimal_prices,
    mdp_step,
    quantile_allocate,
    single_item_ladder,
    static_independent_prices,
    static_separable_prices,
    subadditive_group_prices,
    subadditive_static_prices,
    vcg_separable,
    virtual_value,
)


def test_ladder_examples():
    np.testing.assert_allclose(single_item_ladder(Exponential(), 2), [math.log(2), 0.0], atol=1e-15)
    assert single_item_ladder(Exponential(), 4)[0] == pytest.approx(math.log(4), abs=1e-14)
    np.testing.assert_allclose(single_item_ladder(Uniform(0, 1), 3), [2 / 3, 1 / 2, 0.0], atol=1e-15)
    with pytest.raises(ConfigurationError):
        single_item_ladder(Exponential(), 0)


def test_mdp_examples():
    t = mdp_optimal_prices(Exponential(), 10)
    assert t.remaining(0) == 0.0
    assert t.remaining(1) == pytest.approx(1.0, abs=1e-12)
    assert t.remaining(2) == pytest.approx(1 + 1 / math.e, abs=1e-12)
    assert t.offered[-1] == 0.0
    assert np.all(np.diff(t.values) <= 0)
    assert t.welfare <= harmonic(10)


@pytest.mark.parametrize("d", [Uniform(0, 1), Uniform(1, 3), Weibull(2, 1), Weibull(1, 1)], ids=lambda d: d.spec())
def test_mdp_step_is_expected_maximum(d):
    for p in (0.0, 0.4, 1.5):
        hi = d.upper if math.isfinite(d.upper) else 60.0
        ref = integrate.quad(lambda x: max(x, p) * float(d.pdf(x)), d.lower, hi, points=[p] if d.lower < p < hi else None)[0]
        assert mdp_step(d, p) == pytest.approx(ref, abs=1e-9)


def test_mdp_weibull_one_equals_exponential():
    a = mdp_optimal_prices(Weibull(1, 1), 30).values
    b = mdp_optimal_prices(Exponential(), 30).values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_static_independent_examples():
    n = math.exp(math.e**2)
    p = static_independent_prices([Exponential()], int(round(n)))
    nn = int(round(n))
    assert p[0] == pytest.approx(math.log(nn / math.log(math.log(nn))), rel=1e-12)
    assert p[0] == pytest.approx(math.log(n) - math.log(2), abs=1e-3)
    p = static_independent_prices([Uniform(0, 1)], 100)
    assert p[0] == pytest.approx(1 - math.log(math.log(100)) / 100, abs=1e-14)
    assert p[0] == pytest.approx(0.98473, abs=1e-5)
    with pytest.raises(ConfigurationError, match="n >= 16"):
        static_independent_prices([Exponential()], 8)
    with pytest.raises(ConfigurationError, match="m <="):
        static_independent_prices([Exponential()] * 16, 16)
    assert math.isinf(static_independent_prices([Exponential(), None], 100)[1])


def test_dynamic_independent_single_item_is_ladder():
    res = dynamic_independent_prices([Uniform(0, 1)], [1.0], 4)
    assert res.prices[0] == pytest.approx(0.75, abs=1e-9)


def test_static_separable_prices():
    prices, m_hat = static_separable_prices([0, 0, 0], Exponential(), 100)
    np.testing.assert_array_equal(prices, 0.0)
    assert m_hat == math.floor(100 - 100 ** (5 / 6))
    prices, m_hat = static_separable_prices([1.0] * 100, Exponential(), 100)
    # constant alphas telescope to a single term that only the last item below the cutoff pays
    assert np.all(prices[: m_hat - 1] == prices[0])
    assert np.all(np.isinf(prices[m_hat:]))
    prices, _ = static_separable_prices([3, 2, 1], Uniform(0, 1), 50)
    assert np.all(np.diff(prices) <= 0)
    with pytest.raises(ConfigurationError):
        static_separable_prices([1], Exponential(), 1)


def test_dynamic_separable_examples():
    np.testing.assert_allclose(dynamic_separable_prices([0, 1], [1, 0], Exponential()), [math.log(2), 0.0], atol=1e-15)
    assert dynamic_separable_prices([5], [1, 1, 1, 1, 1, 0.5], Exponential())[0] == 0.0
    # order of the remaining ids does not matter
    a = dynamic_separable_prices([0, 2, 3], [1, 0.8, 0.5, 0.1], Uniform(0, 1))
    b = dynamic_separable_prices([3, 0, 2], [1, 0.8, 0.5, 0.1], Uniform(0, 1))
    np.testing.assert_allclose(a[[2, 0, 1]], b)


def test_dynamic_separable_band_choice():
    # a type in band k (1 = top) weakly prefers the k-th remaining item
    alphas = np.array([1.0, 0.7, 0.4, 0.0])
    d = Exponential()
    p = dynamic_separable_prices([0, 1, 2, 3], alphas, d)
    cuts = d.ppf(1 - np.arange(1, 4) / 4)
    for v in np.linspace(0.01, 4, 120):
        band = int(np.sum(v < cuts))
        util = alphas * v - p
        assert util[band] >= util.max() - 1e-12
        assert util[band] >= 0


def test_subadditive_group_prices():
    m1 = subadditive_group_prices([Exponential()], 5)
    np.testing.assert_allclose(m1[:, 0], single_item_ladder(Exponential(), 5))
    g = subadditive_group_prices([Exponential(), Uniform(0, 1)], 5)
    assert g.shape == (5, 2)
    np.testing.assert_allclose(g[:2, 0], single_item_ladder(Exponential(), 2))
    np.testing.assert_allclose(g[2:4, 1], single_item_ladder(Uniform(0, 1), 2))
    assert np.all(np.isinf(g[4]))
    assert np.all(np.isinf(g[:2, 1])) and np.all(np.isinf(g[2:4, 0]))
    with pytest.raises(ConfigurationError):
        subadditive_group_prices([Exponential()] * 3, 2)


def test_subadditive_static_prices():
    n = 10**4
    p = subadditive_static_prices([Exponential(), Exponential()], n)
    assert p[0] == pytest.approx(math.log(n / (2 * math.log(math.log(n)))), rel=1e-12)
    assert p[0] == pytest.approx(7.72, abs=0.01)
    u = subadditive_static_prices([Uniform(0, 1), Uniform(0, 1)], n)
    assert u[0] == pytest.approx(1 - 2 * math.log(math.log(n)) / n, abs=1e-15)
    with pytest.raises(ConfigurationError, match="static_separable"):
        subadditive_static_prices([Exponential()], n)
    with pytest.raises(ConfigurationError):
        subadditive_static_prices([Exponential()] * 12, 8)


def test_additive_prices():
    t = additive_dynamic_prices([Exponential()], 6)
    np.testing.assert_allclose(t[:, 0], single_item_ladder(Exponential(), 6))
    t = additive_dynamic_prices([Exponential(), None], 3)
    assert np.all(np.isinf(t[:, 1]))
    p = additive_static_prices([Uniform(0, 1)], 100)
    assert p[0] == pytest.approx(1 - math.log(math.log(100)) / 100)
    with pytest.raises(ConfigurationError):
        additive_static_prices([Uniform(0, 1)], 10)


def test_quantile_allocate_all_ones_is_top_quantile():
    rng = np.random.default_rng(0)
    marg = [Exponential(), Uniform(0, 2), Weibull(2, 1)]
    for _ in range(200):
        v = [float(d.sample(rng, 1)[0]) for d in marg]
        j = quantile_allocate(v, marg, [1, 1, 1], rng)
        assert j == int(np.argmax([float(d.cdf(x)) for d, x in zip(marg, v)]))


def test_quantile_allocate_real_item_gets_its_share():
    rng = np.random.default_rng(1)
    marg = [Exponential(), None, None, None]
    hits = sum(quantile_allocate([rng.exponential(), 0, 0, 0], marg, [1] * 4, rng) == 0 for _ in range(20_000))
    se = math.sqrt(0.25 * 0.75 / 20_000)
    assert abs(hits / 20_000 - 0.25) <= 4 * se
    with pytest.raises(ValidationError):
        quantile_allocate([1.0], [Exponential()], [0.0], rng)


def test_vcg_examples():
    out = vcg_separable([1, 0], [5, 3])
    assert out.assignment[0] == 0 and out.payments[0] == 3
    out = vcg_separable([1, 1], [5, 3, 2])
    assert out.payments == {0: 2, 1: 2}
    out = vcg_separable([0, 0], [5, 3])
    assert all(v == 0 for v in out.payments.values())


def test_vcg_payments_are_individually_rational():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n, m = rng.integers(1, 8, size=2)
        a = -np.sort(-rng.uniform(0, 2, size=m))
        t = rng.exponential(size=n)
        out = vcg_separable(a, t)
        for j, buyer in out.assignment.items():
            assert out.payments[buyer] <= a[j] * t[buyer] + 1e-12
            assert out.payments[buyer] >= -1e-12


def test_virtual_values():
    assert virtual_value(Exponential(), 2.5) == pytest.approx(1.5)
    for t in (0.0, 0.3, 0.9):
        assert virtual_value(Uniform(0, 1), t) == pytest.approx(2 * t - 1, abs=1e-12)
    w = Weibull(2, 1)
    grid = np.linspace(0.01, 3.0, 300)
    phi = np.array([virtual_value(w, t) for t in grid])
    assert np.all(np.diff(phi) > 0)
    with pytest.raises(DomainError):
        virtual_value(w, 0.0)
    with pytest.raises(DomainError):
        virtual_value(Uniform(0, 1), 1.0)
