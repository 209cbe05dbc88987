"""Offline benchmarks: exact matchings, closed forms and upper bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import Distribution, conditional_mean_above, max_expectation
from .market import ValidationError, ValuationModel, as_generator


@dataclass(frozen=True)
class MatchingResult:
    assignment: dict  # buyer -> item
    welfare: float
    matched: np.ndarray = field(repr=False)  # per-item flag


def _hungarian_min(cost: np.ndarray) -> np.ndarray:
    """Min-cost assignment of every row (rows <= cols); returns col per row.

    Shortest augmenting paths with row/column potentials, O(rows^2 * cols).
    Ties go to the lowest column index.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    owner = np.zeros(m + 1, dtype=np.int64)  # 1-based row owning column j, 0 = free
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            reduced = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if owner[j]:
            col_of_row[owner[j] - 1] = j - 1
    return col_of_row


def _check_matrix(values) -> np.ndarray:
    w = np.asarray(values, dtype=float)
    if w.ndim != 2:
        raise ValidationError(f"expected an n x m matrix, got shape {w.shape}")
    if np.isnan(w).any() or np.isinf(w).any():
        raise ValidationError("matrix entries must be finite")
    if (w < 0).any():
        raise ValidationError("matrix entries must be non-negative")
    return w


def assignment(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximum-weight assignment on the smaller side; returns (rows, cols)."""
    n, m = values.shape
    if n <= m:
        cols = _hungarian_min(-values)
        return np.arange(n), cols
    rows = _hungarian_min(-values.T)
    return rows, np.arange(m)


def max_weight_matching(values) -> MatchingResult:
    """Exact maximum-weight bipartite matching of buyers (rows) to items.

    Every vertex of the smaller side is matched, possibly along a zero edge,
    which is what padding the matrix square with zeros would produce.
    """
    w = _check_matrix(values)
    rows, cols = assignment(w)
    matched = np.zeros(w.shape[1], dtype=bool)
    matched[cols] = True
    welfare = math.fsum(w[rows, cols])
    return MatchingResult({int(r): int(c) for r, c in zip(rows, cols)}, welfare, matched)


def matching_welfare(values: np.ndarray) -> float:
    rows, cols = assignment(values)
    return float(values[rows, cols].sum())


def separable_optimum(alphas: Sequence[float], types: Sequence[float]) -> float:
    """Assortative welfare sum_j alpha_j * t_(j) (j-th highest type)."""
    a = np.asarray(alphas, dtype=float)
    if np.any(np.diff(a) > 0):
        raise ValidationError("alphas must be non-increasing")
    t = np.sort(np.asarray(types, dtype=float))[::-1]
    k = min(len(a), len(t))
    return math.fsum(a[:k] * t[:k])


def subadditive_upper_bound(marginals: Sequence, n: int) -> float:
    """Sum over items of the expected maximum of n draws (0 for dummies)."""
    return float(sum(max_expectation(d, n) for d in marginals if d is not None))


def exante_item_bound(dist: Distribution, q1: float, n: int) -> float:
    """q1 * E[v | v >= F^-1(1 - q1/n)], one item's ex-ante contribution."""
    if not 0.0 < q1 <= 1.0:
        raise ValidationError(f"q1 must lie in (0, 1], got {q1}")
    tau = float(dist.ppf(1.0 - q1 / n))
    return q1 * conditional_mean_above(dist, tau)


@dataclass(frozen=True)
class MatchProbabilities:
    items: tuple
    q: np.ndarray
    trials: int
    se: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {j: float(p) for j, p in zip(self.items, self.q)}


def estimate_match_probabilities(
    model: ValuationModel,
    n_remaining: int,
    remaining_items: Sequence[int],
    trials: int = 2000,
    rng=None,
) -> MatchProbabilities:
    """Monte Carlo frequency with which each remaining item is matched by the
    offline optimum on fresh profiles of ``n_remaining`` buyers.

    Only the remaining set is conditioned on, not the realised values of the
    buyers that already left. When buyers are at least as many as items the
    answer is exactly 1 for every item and no sampling is done.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    items = tuple(sorted(int(j) for j in remaining_items))
    gen = as_generator(rng)
    hits = np.zeros(len(items))
    if n_remaining >= len(items):
        # a maximum matching on the smaller side covers every item
        return MatchProbabilities(items, np.ones(len(items)), trials, np.zeros(len(items)))
    if n_remaining >= 1 and items:
        cols = np.asarray(items)
        vals, _ = model.sample_values(gen, trials, n_remaining)
        for t in range(trials):
            _, matched_cols = assignment(vals[t][:, cols])
            hits[matched_cols] += 1
    q = hits / trials
    se = np.sqrt(q * (1 - q) / trials)
    return MatchProbabilities(items, q, trials, se)


class MatchProbabilityCache:
    """Memoises q-estimates per (buyers left, remaining set) for i.i.d. buyers."""

    def __init__(self, model: ValuationModel, trials: int = 2000, seed: int = 0):
        self.model = model
        self.trials = trials
        self.seed = seed
        self._memo: dict = {}

    def __call__(self, n_remaining: int, remaining_items) -> MatchProbabilities:
        key = (int(n_remaining), tuple(sorted(int(j) for j in remaining_items)))
        hit = self._memo.get(key)
        if hit is None:
            # the stream depends on the key only, so lookups are order-independent
            ss = np.random.SeedSequence(self.seed, spawn_key=(key[0], *key[1]))
            hit = estimate_match_probabilities(self.model, key[0], key[1], self.trials, np.random.default_rng(ss))
            self._memo[key] = hit
        return hit
