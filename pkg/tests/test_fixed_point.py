import math

import numpy as np
import pytest

from ppm_lab.distributions import Exponential, Uniform, Weibull
from ppm_lab.fixed_point import (
    FixedPointError,
    purchase_probabilities,
    purchase_probabilities_mc,
    solve_dynamic_prices,
)
from ppm_lab.pricing import single_item_ladder


@pytest.mark.parametrize(
    "marginals, prices",
    [
        ([Exponential(), Exponential()], [0.3, 1.1]),
        ([Uniform(0, 1), Exponential(2)], [0.2, 0.4]),
        ([Weibull(2, 1), Uniform(0, 2), Exponential()], [0.5, 0.9, 0.1]),
        ([Weibull(1.5, 2), Exponential()], [0.0, 0.0]),
    ],
)
def test_purchase_probabilities_match_monte_carlo(marginals, prices):
    r = purchase_probabilities(marginals, prices)
    mc = purchase_probabilities_mc(marginals, prices, samples=400_000, rng=9)
    se = np.sqrt(mc * (1 - mc) / 400_000)
    assert np.all(np.abs(r - mc) <= 4 * se + 1e-12)


def test_purchase_probabilities_of_one_item_is_survival():
    for d in (Exponential(), Uniform(0, 1), Weibull(2, 1)):
        for x in (0.1, 0.5, 0.9):
            assert purchase_probabilities([d], [x])[0] == pytest.approx(float(d.sf(x)), abs=1e-12)


def test_forced_choice_sums_to_one():
    r = purchase_probabilities([Exponential(), Uniform(0, 2), Weibull(2, 1)], [0.4, 0.1, 0.7], outside=False)
    assert r.sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 4, 10])
def test_single_item_matches_ladder(k):
    res = solve_dynamic_prices([Exponential()], [1.0], k)
    assert res.prices[0] == pytest.approx(single_item_ladder(Exponential(), k)[0], abs=1e-9)
    assert res.residual <= 1e-8


def test_two_iid_exponentials_split_evenly():
    res = solve_dynamic_prices([Exponential(), Exponential()], [1.0, 1.0], 2)
    assert res.residual <= 1e-6
    assert res.prices[0] == pytest.approx(res.prices[1], abs=1e-8)
    np.testing.assert_allclose(res.purchase_prob, [0.5, 0.5], atol=1e-8)
    mc = purchase_probabilities_mc([Exponential(), Exponential()], res.prices, samples=10**6, rng=0)
    se = math.sqrt(0.25 / 10**6)
    assert np.all(np.abs(mc - 0.5) <= 4 * se)


@pytest.mark.parametrize(
    "marginals, q, k",
    [
        ([Exponential(), Uniform(0, 2)], [1.0, 1.0], 3),
        ([Exponential(), Weibull(2, 1), Uniform(1, 2)], [1.0, 1.0, 1.0], 3),
        ([Exponential(), Exponential(3)], [0.7, 0.4], 1),
        ([Weibull(1.5, 1), Exponential()], [1.0, 1.0], 5),
    ],
)
def test_solver_hits_targets(marginals, q, k):
    res = solve_dynamic_prices(marginals, q, k)
    np.testing.assert_allclose(res.purchase_prob, np.asarray(q) / k if sum(q) <= k else np.asarray(q) / sum(q), atol=1e-8)
    assert np.all(res.prices >= [d.lower for d in marginals])


def test_full_demand_uses_the_root_polish():
    # q / k sums to one, so the buyer always buys and one price sits at the floor
    res = solve_dynamic_prices([Exponential(), Uniform(0, 2)], [1.0, 1.0], 2)
    assert res.purchase_prob.sum() == pytest.approx(1.0, abs=1e-9)
    assert min(res.prices[0] - 0.0, res.prices[1] - 0.0) == pytest.approx(0.0, abs=1e-9)


def test_solution_does_not_depend_on_start():
    m = [Exponential(), Uniform(0, 2), Weibull(2, 1)]
    a = solve_dynamic_prices(m, [1, 1, 1], 4).prices
    b = solve_dynamic_prices(m, [1, 1, 1], 4, initial=[0.01, 0.01, 0.01]).prices
    np.testing.assert_allclose(a, b, atol=1e-7)


def test_non_convergence_reports_residuals(monkeypatch):
    import ppm_lab.fixed_point as fp

    monkeypatch.setattr(fp, "_polish", lambda marginals, targets, outside, lowers, x: x)
    with pytest.raises(FixedPointError) as info:
        solve_dynamic_prices([Exponential(), Exponential()], [1, 0.5], 3, max_iter=1)
    assert info.value.residuals.shape == (2,)


def test_zero_target_is_rejected():
    with pytest.raises(ValueError):
        solve_dynamic_prices([Exponential(), Exponential()], [1, 0], 2)
