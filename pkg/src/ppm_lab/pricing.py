"""Price formulas for every posted-price rule, plus VCG and virtual values.

All logarithms are natural logarithms. Unavailable items are priced
``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .distributions import Distribution, DomainError, Exponential
from .fixed_point import FixedPointResult, solve_dynamic_prices
from .market import ValidationError

INF = math.inf
Q_CLIP = 1e-12


class ConfigurationError(ValueError):
    """A price rule was requested outside the range where it is defined."""


def _upper_q(dist: Distribution, q: float) -> float:
    """F^-1(1 - q), with q = 1 giving the support floor."""
    if q >= 1.0:
        return dist.lower
    return float(dist.ppf(1.0 - q))


def single_item_ladder(dist: Distribution, n: int) -> np.ndarray:
    """Prices F^-1(1 - 1/(n-i+1)) for buyers i = 1..n (index i-1)."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    left = n - np.arange(n)  # buyers left including the current one
    return np.array([_upper_q(dist, 1.0 / k) for k in left])


@dataclass(frozen=True)
class MdpPriceTable:
    """Backward-induction thresholds; ``values[i]`` is p^(i) for i = 0..n.

    Buyer i (1-based) is offered ``values[i]``; ``values[0]`` is the expected
    welfare of the optimal dynamic policy.
    """

    values: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @property
    def offered(self) -> np.ndarray:
        return self.values[1:]

    @property
    def welfare(self) -> float:
        return float(self.values[0])

    def remaining(self, k: int) -> float:
        """p^(n-k): continuation value with k buyers still to come."""
        return float(self.values[self.n - k])


def mdp_step(dist: Distribution, p: float) -> float:
    """E[max(v, p)] = p + int_p^inf (1 - F(x)) dx."""
    if isinstance(dist, Exponential):
        return p + math.exp(-dist.rate * p) / dist.rate
    # below the support floor max(v, p) is just v
    lo = max(p, dist.lower)
    hi = dist.upper if math.isfinite(dist.upper) else float(dist.ppf(1 - 1e-15))
    tail = 0.0
    if hi > lo:
        tail, _ = integrate.quad(lambda x: float(dist.sf(x)), lo, hi, limit=200, epsabs=1e-14, epsrel=1e-12)
    return lo + tail


def mdp_optimal_prices(dist: Distribution, n: int) -> MdpPriceTable:
    """p^(n) = 0 and p^(i) = E[max(v, p^(i+1))]."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    vals = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        vals[i] = mdp_step(dist, vals[i + 1])
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError("MDP recursion diverged")
    vals.setflags(write=False)
    return MdpPriceTable(vals)


def static_independent_prices(marginals: Sequence, n: int) -> np.ndarray:
    """p_j = F_j^-1(1 - ln ln n / n); dummies are priced +inf.

    Needs n >= 16 (so that ln ln n >= 1) and m <= n / (ln ln n)^2.
    """
    if n < 16:
        raise ConfigurationError(f"static prices need n >= 16 so that ln ln n >= 1; got n={n}")
    llg = math.log(math.log(n))
    m = len(marginals)
    if m > n / llg**2:
        raise ConfigurationError(f"static prices need m <= n/(ln ln n)^2 = {n / llg**2:.2f}; got m={m}")
    return _uniform_quantile_prices(marginals, llg / n)


def _uniform_quantile_prices(marginals, q: float) -> np.ndarray:
    return np.array([INF if d is None else _upper_q(d, q) for d in marginals])


def static_separable_prices(alphas: Sequence[float], dist: Distribution, n: int):
    """Telescoping static prices for separable buyers.

    Returns ``(prices, m_hat)``. Items above the cutoff m_hat = floor(n - n^(5/6))
    are priced +inf; alphas are padded with zeros to length n.
    """
    m_hat = int(math.floor(n - n ** (5.0 / 6.0)))
    if m_hat < 1:
        raise ConfigurationError(f"n={n} leaves no items below the cutoff n - n^(5/6)")
    a = np.zeros(n + 2)
    src = np.asarray(alphas, dtype=float)[:n]
    a[1 : len(src) + 1] = src
    a[m_hat + 1 :] = 0.0  # alpha'_k
    k = np.arange(1, n + 1)
    llg = math.log(math.log(n)) if n > math.e else 0.0
    qk = np.minimum(k / n * 2.0 * llg, k / n + math.sqrt(math.log(n) / n))
    qk = np.clip(qk, Q_CLIP, 1.0 - Q_CLIP)
    quant = np.asarray(dist.ppf(1.0 - qk), dtype=float)
    terms = (a[1 : n + 1] - a[2 : n + 2]) * quant  # k = 1..n
    tails = np.cumsum(terms[::-1])[::-1]  # sum_{k=j}^n
    m = len(src)
    prices = np.full(m, INF)
    upto = min(m, m_hat)
    prices[:upto] = tails[:upto]
    return prices, m_hat


def dynamic_separable_prices(remaining: Sequence[int], alphas: Sequence[float], dist: Distribution) -> np.ndarray:
    """Prices for the remaining items ell_1 < ... < ell_K (K buyers left).

    The item ell_t gets sum_{k=t}^{K-1} (alpha_{ell_k} - alpha_{ell_{k+1}}) F^-1(1 - k/K);
    the last remaining item is free. With these prices a buyer of type v picks
    ell_k exactly when F^-1(1 - k/K) <= v < F^-1(1 - (k-1)/K).
    Returns one price per entry of ``remaining`` (same order).
    """
    ell = np.sort(np.asarray(remaining, dtype=int))
    K = len(ell)
    a = np.asarray(alphas, dtype=float)[ell]
    if K == 1:
        return np.zeros(1)
    k = np.arange(1, K)
    thresholds = np.asarray(dist.ppf(1.0 - k / K), dtype=float)
    terms = (a[:-1] - a[1:]) * thresholds
    tails = np.concatenate((np.cumsum(terms[::-1])[::-1], [0.0]))
    order = np.argsort(np.argsort(np.asarray(remaining, dtype=int)))
    return tails[order]


def subadditive_group_prices(marginals: Sequence, n: int, m: int | None = None) -> np.ndarray:
    """Per-buyer menus (n x m) for the group-split dynamic mechanism.

    Buyer (j-1)*n' + k (k = 1..n', n' = floor(n/m)) sees item j at
    F_j^-1(1 - 1/(n' - k + 1)) and every other item at +inf. Buyers beyond
    m * n' see nothing.
    """
    m = len(marginals) if m is None else m
    if m > n:
        raise ConfigurationError(f"group pricing needs m <= n; got m={m}, n={n}")
    if m < 1:
        raise ConfigurationError("need at least one item")
    group = n // m
    menus = np.full((n, m), INF)
    for j, d in enumerate(marginals[:m]):
        if d is None:
            continue
        ladder = single_item_ladder(d, group)
        menus[j * group : (j + 1) * group, j] = ladder
    return menus


def subadditive_static_prices(marginals: Sequence, n: int, m: int | None = None) -> np.ndarray:
    """p_j = F_j^-1(1 - m ln ln n / n) for m >= 2 items."""
    m = len(marginals) if m is None else m
    if m < 2:
        raise ConfigurationError("a single item is covered by the separable static rule (static_separable_prices)")
    if n <= math.e:
        raise ConfigurationError("n must exceed e")
    q = m * math.log(math.log(n)) / n
    if not 0.0 < q < 1.0:
        raise ConfigurationError(f"m ln ln n / n = {q:.4g} must lie in (0, 1)")
    return _uniform_quantile_prices(marginals, q)


def additive_static_prices(marginals: Sequence, n: int) -> np.ndarray:
    if n < 16:
        raise ConfigurationError(f"static prices need n >= 16 so that ln ln n >= 1; got n={n}")
    return _uniform_quantile_prices(marginals, math.log(math.log(n)) / n)


def additive_dynamic_prices(marginals: Sequence, n: int) -> np.ndarray:
    """(n x m) table: buyer i sees p_j^(i) = F_j^-1(1 - 1/(n-i+1)) for every item."""
    cols = [np.full(n, INF) if d is None else single_item_ladder(d, n) for d in marginals]
    return np.column_stack(cols)


def dynamic_independent_prices(marginals: Sequence[Distribution], q, n_left: int, **solver) -> FixedPointResult:
    """Fixed-point prices selling item j with probability q_j / n_left."""
    return solve_dynamic_prices(marginals, q, n_left, **solver)


def quantile_allocate(values, marginals: Sequence, q, rng) -> int:
    """Item maximising F_j(v_j)^(1/q_j); dummies (None) get a uniform draw."""
    v = np.asarray(values, dtype=float)
    q = np.asarray(q, dtype=float)
    scores = np.full(len(v), -np.inf)
    for j, d in enumerate(marginals):
        if q[j] <= 0:
            continue
        u = rng.random() if d is None else float(d.cdf(v[j]))
        scores[j] = u ** (1.0 / q[j])
    if not np.isfinite(scores).any():
        raise ValidationError("no item with positive match probability")
    return int(np.argmax(scores))


@dataclass(frozen=True)
class VcgOutcome:
    assignment: dict  # item -> buyer
    payments: dict  # buyer -> payment
    welfare: float


def vcg_separable(alphas: Sequence[float], types: Sequence[float]) -> VcgOutcome:
    """Assortative allocation; the buyer on item j pays
    sum_{k>=j} (alpha_k - alpha_{k+1}) * t_(k+1) with t_(n+1) = 0."""
    a_in = np.asarray(alphas, dtype=float)
    if np.any(np.diff(a_in) > 0):
        raise ValidationError("alphas must be non-increasing")
    t = np.asarray(types, dtype=float)
    n = len(t)
    order = np.argsort(-t, kind="stable")
    ts = np.concatenate((t[order], [0.0]))  # ts[k-1] = t_(k)
    L = max(n, len(a_in))
    a = np.zeros(L + 1)
    a[: len(a_in)] = a_in
    assignment, payments = {}, {}
    welfare = 0.0
    for j in range(min(n, len(a_in))):
        buyer = int(order[j])
        k = np.arange(j, n)  # 0-based k; t_(k+1) is ts[k+1]
        pay = float(np.sum((a[k] - a[k + 1]) * ts[k + 1]))
        assignment[j] = buyer
        payments[buyer] = pay
        welfare += a[j] * t[buyer]
    return VcgOutcome(assignment, payments, float(welfare))


def virtual_value(dist: Distribution, t: float) -> float:
    """phi(t) = t - 1/h(t)."""
    if not (dist.lower <= t < dist.upper):
        raise DomainError(f"t={t} outside the support interior")
    h = float(dist.hazard(t))
    if h <= 0:
        raise DomainError(f"hazard vanishes at t={t}")
    return t - 1.0 / h
