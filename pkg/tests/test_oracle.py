import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from ppm_lab._numeric import harmonic
from ppm_lab.distributions import Exponential, Uniform
from ppm_lab.market import IndependentUnitDemand, Separable, ValidationError, pad_to_square
from ppm_lab.oracle import (
    MatchProbabilityCache,
    estimate_match_probabilities,
    exante_item_bound,
    max_weight_matching,
    separable_optimum,
    subadditive_upper_bound,
)


def brute(w):
    n, m = w.shape
    if n <= m:
        return max(sum(w[i, c[i]] for i in range(n)) for c in itertools.permutations(range(m), n))
    return max(sum(w[r[j], j] for j in range(m)) for r in itertools.permutations(range(n), m))


def test_matching_examples():
    r = max_weight_matching([[3, 1], [2, 4]])
    assert r.assignment == {0: 0, 1: 1}
    assert r.welfare == 7
    assert max_weight_matching([[5]]).welfare == 5
    types = np.array([3.0, 5.0])
    vals = np.outer(types, [2.0, 1.0])
    assert max_weight_matching(vals).welfare == 13 == separable_optimum([2, 1], types)


@pytest.mark.parametrize("shape", [(3, 3), (2, 5), (5, 2), (6, 6), (1, 4)])
def test_matching_equals_brute_force_and_scipy(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(30):
        w = rng.integers(0, 20, size=shape).astype(float)
        r = max_weight_matching(w)
        assert r.welfare == brute(w)
        rows, cols = linear_sum_assignment(w, maximize=True)
        assert r.welfare == w[rows, cols].sum()
        assert len(set(r.assignment.values())) == len(r.assignment) == min(shape)
        assert r.matched.sum() == min(shape)


def test_matching_on_separable_profiles_equals_assortative_optimum():
    rng = np.random.default_rng(8)
    for _ in range(100):
        n, m = rng.integers(1, 7, size=2)
        a = -np.sort(-rng.exponential(size=m))
        t = rng.exponential(size=n)
        vals = np.outer(t, a)
        assert max_weight_matching(vals).welfare == pytest.approx(separable_optimum(a, t), rel=1e-14)


def test_matching_rejects_bad_matrices():
    for bad in ([[1, float("nan")]], [[1, -1]], [1, 2], [[math.inf]]):
        with pytest.raises(ValidationError):
            max_weight_matching(bad)


def test_separable_optimum_examples():
    assert separable_optimum([1, 0], [2, 7, 4]) == 7
    assert separable_optimum([1, 1], [2, 7, 4]) == 11
    with pytest.raises(ValidationError):
        separable_optimum([0.5, 1], [1, 2])


def test_expected_separable_optimum_is_harmonic():
    rng = np.random.default_rng(2)
    t = rng.exponential(size=(20_000, 1000))
    vals = np.array([separable_optimum([1.0], row) for row in t])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - harmonic(1000)) <= 3 * se


def test_subadditive_upper_bound_examples():
    assert subadditive_upper_bound([Exponential()], 5) == pytest.approx(harmonic(5), rel=1e-10)
    assert subadditive_upper_bound([Exponential(), Uniform(0, 1)], 9) == pytest.approx(harmonic(9) + 0.9, rel=1e-10)
    assert subadditive_upper_bound([None, None], 4) == 0.0


def test_exante_item_bound_examples():
    assert exante_item_bound(Exponential(), 1.0, 10) == pytest.approx(math.log(10) + 1, rel=1e-10)
    assert exante_item_bound(Uniform(0, 1), 1.0, 2) == pytest.approx(0.75, abs=1e-12)
    assert exante_item_bound(Exponential(), 1e-9, 10) < 1e-7
    with pytest.raises(ValidationError):
        exante_item_bound(Exponential(), 0.0, 10)


def test_match_probabilities_are_one_on_square_markets():
    model = pad_to_square(IndependentUnitDemand((Exponential(), Uniform(0, 1))), 4)
    mp = estimate_match_probabilities(model, 4, range(4), trials=100, rng=0)
    np.testing.assert_array_equal(mp.q, 1.0)
    mp = estimate_match_probabilities(model, 3, [0, 2, 3], trials=100, rng=0)
    np.testing.assert_array_equal(mp.q, 1.0)


def test_match_probabilities_one_buyer_two_items():
    model = IndependentUnitDemand((Exponential(), Exponential()))
    mp = estimate_match_probabilities(model, 1, [0, 1], trials=20_000, rng=5)
    se = math.sqrt(0.25 / 20_000)
    assert np.all(np.abs(mp.q - 0.5) <= 3 * se)
    assert mp.q.sum() == pytest.approx(1.0)


def test_dummy_is_never_matched_next_to_a_real_item():
    model = IndependentUnitDemand((Exponential(), None, None))
    mp = estimate_match_probabilities(model, 1, [0, 1, 2], trials=2000, rng=1)
    assert mp.as_dict() == {0: 1.0, 1: 0.0, 2: 0.0}


def test_match_probabilities_grow_with_buyers():
    model = IndependentUnitDemand((Exponential(), Uniform(0, 3), Exponential(2)))
    q1 = estimate_match_probabilities(model, 1, range(3), trials=4000, rng=3).q
    q2 = estimate_match_probabilities(model, 2, range(3), trials=4000, rng=3).q
    assert q1.sum() == pytest.approx(1.0) and q2.sum() == pytest.approx(2.0)
    assert np.all(q2 >= q1 - 0.05)


def test_cache_is_order_independent():
    model = Separable((1.0, 0.6, 0.3), Exponential())
    a = MatchProbabilityCache(model, trials=500, seed=4)
    b = MatchProbabilityCache(model, trials=500, seed=4)
    x1 = a(1, [0, 2]).q
    a(2, [0, 1, 2])
    b(2, [0, 1, 2])
    x2 = b(1, [2, 0]).q
    np.testing.assert_array_equal(x1, x2)
    assert a(1, [0, 2]) is a(1, [2, 0])
