"""Mechanisms as objects that can price a step and run a block of trials.

Every mechanism exposes two views:

* ``prices(i, remaining)`` gives the menu seen by buyer ``i`` (1-based) when
  ``remaining`` items are unsold; unavailable items are priced ``inf``.
* ``run_block(values, types, rng)`` plays all buyers of a batch of trials at
  once and returns a :class:`BlockOutcome`. Values have shape (B, n, m).

Mechanism objects are immutable apart from memo tables of solved prices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import Distribution
from .market import Separable, ValuationModel, pad_to_square
from .oracle import MatchProbabilityCache
from .pricing import (
    INF,
    ConfigurationError,
    additive_dynamic_prices,
    additive_static_prices,
    dynamic_independent_prices,
    dynamic_separable_prices,
    mdp_optimal_prices,
    single_item_ladder,
    static_independent_prices,
    static_separable_prices,
    subadditive_group_prices,
    subadditive_static_prices,
)

MECHANISM_IDS = (
    "ladder",
    "mdp",
    "static-ind",
    "dyn-ind",
    "static-sep",
    "dyn-sep",
    "sub-dyn",
    "sub-static",
    "add-static",
    "add-dyn",
    "vcg",
    "quantile",
)


@dataclass
class BlockOutcome:
    """Per-trial totals for one block of B trials."""

    welfare: np.ndarray  # (B,)
    revenue: np.ndarray  # (B,)
    utility: np.ndarray  # (B,) sum of v - p over buyers, kept separately
    sold: np.ndarray  # (B, m) item went to a buyer who values it
    alloc: Optional[np.ndarray] = None  # (n, m) counts, dummies included


class Mechanism:
    """Base class. Subclasses set ``mech_id`` and implement the two views."""

    mech_id: str = ""
    offline: bool = False

    def __init__(self, model: ValuationModel, n: int):
        if n < 1:
            raise ConfigurationError("n must be >= 1")
        self.model = model
        self.n = int(n)

    @property
    def m(self) -> int:
        return self.model.m

    def prices(self, i: int, remaining) -> np.ndarray:
        raise NotImplementedError

    def run_block(self, values: np.ndarray, types, rng: np.random.Generator, track: bool = False) -> BlockOutcome:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.mech_id!r}, n={self.n}, m={self.m})"


def _restrict(menu: np.ndarray, remaining, m: int) -> np.ndarray:
    out = np.full(m, INF)
    idx = np.fromiter(remaining, dtype=int)
    out[idx] = menu[idx]
    return out


class PostedPrices(Mechanism):
    """Sequential posted prices; buyers best-respond to the current menu."""

    def _menus(self, i: int, avail: np.ndarray) -> np.ndarray:
        """(B, m) menus for buyer i given the (B, m) availability mask."""
        raise NotImplementedError

    def _on_no_purchase(self, i, avail, idle, rng, alloc):
        """Hook for rules that retire an item when the buyer walks away."""

    def run_block(self, values, types, rng, track=False):
        B, n, m = values.shape
        avail = np.ones((B, m), dtype=bool)
        welfare = np.zeros(B)
        revenue = np.zeros(B)
        utility = np.zeros(B)
        sold = np.zeros((B, m), dtype=bool)
        alloc = np.zeros((n, m)) if track else None
        rows = np.arange(B)
        for i in range(1, n + 1):
            v = values[:, i - 1, :]
            p = np.where(avail, self._menus(i, avail), INF)
            util = v - p
            if self.model.unit_demand:
                j = np.argmax(util, axis=1)
                best = util[rows, j]
                buy = best > 0
                b, jb = rows[buy], j[buy]
                welfare[b] += v[b, jb]
                revenue[b] += p[b, jb]
                utility[b] += best[buy]
                avail[b, jb] = False
                sold[b, jb] = True
                if track:
                    np.add.at(alloc[i - 1], jb, 1.0)
                self._on_no_purchase(i, avail, ~buy, rng, alloc)
            else:
                take = util > 0
                welfare += np.where(take, v, 0.0).sum(axis=1)
                revenue += np.where(take, p, 0.0).sum(axis=1)
                utility += np.where(take, util, 0.0).sum(axis=1)
                avail &= ~take
                sold |= take
                if track:
                    alloc[i - 1] += take.sum(axis=0)
        sold &= ~self.model.dummy_mask[None, :]
        return BlockOutcome(welfare, revenue, utility, sold, alloc)


class StaticPrices(PostedPrices):
    """One price vector for every buyer."""

    def __init__(self, model, n, prices, mech_id: str = "static"):
        super().__init__(model, n)
        p = np.asarray(prices, dtype=float)
        if p.shape != (model.m,):
            raise ConfigurationError(f"expected {model.m} prices, got shape {p.shape}")
        if np.any(p < 0) or np.isnan(p).any():
            raise ConfigurationError("prices must be >= 0 or +inf")
        self.vector = p
        self.mech_id = mech_id

    def prices(self, i, remaining):
        return _restrict(self.vector, remaining, self.m)

    def _menus(self, i, avail):
        return np.broadcast_to(self.vector, avail.shape)

    def run_block(self, values, types, rng, track=False):
        if self.m == 1 or not self.model.unit_demand:
            table = np.broadcast_to(self.vector, (self.n, self.m))
            return _first_acceptance_block(values, table, self.model.dummy_mask, track)
        return super().run_block(values, types, rng, track)


class PriceTable(PostedPrices):
    """Buyer-specific menus fixed in advance: row i-1 is buyer i's menu."""

    def __init__(self, model, n, table, mech_id: str):
        super().__init__(model, n)
        t = np.asarray(table, dtype=float)
        if t.shape != (n, model.m):
            raise ConfigurationError(f"expected an ({n}, {model.m}) price table, got {t.shape}")
        self.table = t
        self.mech_id = mech_id

    def prices(self, i, remaining):
        return _restrict(self.table[i - 1], remaining, self.m)

    def _menus(self, i, avail):
        return np.broadcast_to(self.table[i - 1], avail.shape)

    def run_block(self, values, types, rng, track=False):
        # one finite price per buyer leaves unit-demand buyers nothing to trade off
        single_offer = bool((np.isfinite(self.table).sum(axis=1) <= 1).all())
        if single_offer or not self.model.unit_demand:
            return _first_acceptance_block(values, self.table, self.model.dummy_mask, track)
        return super().run_block(values, types, rng, track)


def _first_acceptance_block(values, table, dummy, track) -> BlockOutcome:
    """Items whose fate does not depend on other items: each one goes to the
    first buyer whose value beats her price. Exact for a single item and for
    additive buyers facing a menu fixed in advance."""
    B, n, m = values.shape
    rows = np.arange(B)[:, None]
    cols = np.arange(m)[None, :]
    hit = values > table[None, :, :]
    first = np.argmax(hit, axis=1)  # (B, m)
    sold = hit[rows, first, cols]
    val = np.where(sold, values[rows, first, cols], 0.0)
    pay = np.where(sold, table[first, cols], 0.0)
    alloc = None
    if track:
        alloc = np.zeros((n, m))
        b, j = np.nonzero(sold)
        np.add.at(alloc, (first[b, j], j), 1.0)
    return BlockOutcome(val.sum(axis=1), pay.sum(axis=1), (val - pay).sum(axis=1), sold & ~dummy[None, :], alloc)


class DynamicIndependent(PostedPrices):
    """Fixed-point prices on the square (dummy-padded) market.

    Item j sells to buyer i with probability q_j / (n - i + 1). When the buyer
    takes nothing, one remaining dummy chosen uniformly at random is retired,
    so exactly one item leaves the market per step.
    """

    mech_id = "dyn-ind"

    def __init__(self, model, n, q_provider=None, solver: Optional[dict] = None):
        super().__init__(model, n)
        if model.m != n:
            raise ConfigurationError("dyn-ind runs on a square market; pad the model first")
        self.q_provider = q_provider or MatchProbabilityCache(model)
        self.solver = dict(solver or {})
        self._dummy = model.dummy_mask
        self._memo: dict = {}

    def solve(self, i: int, remaining):
        rem = tuple(sorted(int(j) for j in remaining))
        k = self.n - i + 1
        real = tuple(j for j in rem if not self._dummy[j])
        key = (k, real)
        hit = self._memo.get(key)
        if hit is None:
            q = self.q_provider(k, rem).as_dict()
            if real:
                res = dynamic_independent_prices(
                    [self.model.marginals[j] for j in real], [q[j] for j in real], k, **self.solver
                )
            else:
                res = None
            self._memo[key] = hit = res
        return real, hit

    def prices(self, i, remaining):
        real, res = self.solve(i, remaining)
        out = np.full(self.m, INF)
        if res is not None:
            out[list(real)] = res.prices
        return out

    def _menus(self, i, avail):
        weights = 1 << np.arange(self.m, dtype=np.int64)
        keys = avail.astype(np.int64) @ weights
        uniq, inv = np.unique(keys, return_inverse=True)
        menus = np.empty((len(uniq), self.m))
        for u, key in enumerate(uniq):
            rem = np.flatnonzero((int(key) >> np.arange(self.m)) & 1)
            menus[u] = self.prices(i, rem)
        return menus[inv.ravel()]

    def _on_no_purchase(self, i, avail, idle, rng, alloc):
        dummies = avail & self._dummy[None, :]
        # draw for every row to keep the stream layout independent of outcomes
        u = rng.random(len(avail))
        rows = np.flatnonzero(idle & dummies.any(axis=1))
        if rows.size == 0:
            return
        counts = dummies[rows].sum(axis=1)
        pick = np.floor(u[rows] * counts).astype(int)
        order = np.cumsum(dummies[rows], axis=1)
        j = np.argmax(order > pick[:, None], axis=1)
        avail[rows, j] = False
        if alloc is not None:
            np.add.at(alloc[i - 1], j, 1.0)


class DynamicSeparable(Mechanism):
    """Band prices for separable buyers on the square market.

    With K buyers left and remaining items ell_1 < ... < ell_K, a buyer whose
    type lies in [F^-1(1 - k/K), F^-1(1 - (k-1)/K)) takes ell_k; ties among
    equal multipliers are broken toward that item. A band item with zero
    multiplier is a dummy and is retired without a sale.
    """

    mech_id = "dyn-sep"

    def __init__(self, model: Separable, n):
        super().__init__(model, n)
        if model.m != n:
            raise ConfigurationError("dyn-sep runs on a square market; pad the model first")
        self.alphas = np.asarray(model.alphas)
        self.dist = model.type_dist

    def prices(self, i, remaining):
        rem = np.asarray(sorted(int(j) for j in remaining))
        if len(rem) != self.n - i + 1:
            raise ConfigurationError(f"step {i} needs {self.n - i + 1} remaining items, got {len(rem)}")
        out = np.full(self.m, INF)
        out[rem] = dynamic_separable_prices(rem, self.alphas, self.dist)
        return out

    def thresholds(self, K: int) -> np.ndarray:
        k = np.arange(1, K)
        return np.asarray(self.dist.ppf(1.0 - k / K), dtype=float).reshape(-1)

    def run_block(self, values, types, rng, track=False):
        B, n, m = values.shape
        avail = np.ones((B, m), dtype=bool)
        welfare = np.zeros(B)
        revenue = np.zeros(B)
        utility = np.zeros(B)
        sold = np.zeros((B, m), dtype=bool)
        alloc = np.zeros((n, m)) if track else None
        rows = np.arange(B)
        for i in range(1, n + 1):
            K = n - i + 1
            ell = np.nonzero(avail)[1].reshape(B, K)
            a = self.alphas[ell]
            theta = self.thresholds(K)
            terms = (a[:, :-1] - a[:, 1:]) * theta[None, :]
            tails = np.concatenate((np.cumsum(terms[:, ::-1], axis=1)[:, ::-1], np.zeros((B, 1))), axis=1)
            t = types[:, i - 1]
            band = (theta[None, :] > t[:, None]).sum(axis=1)
            j = ell[rows, band]
            real = a[rows, band] > 0
            price = tails[rows, band]
            val = t * a[rows, band]
            welfare += np.where(real, val, 0.0)
            revenue += np.where(real, price, 0.0)
            utility += np.where(real, val - price, 0.0)
            sold[rows[real], j[real]] = True
            avail[rows, j] = False
            if track:
                np.add.at(alloc[i - 1], j, 1.0)
        return BlockOutcome(welfare, revenue, utility, sold, alloc)


class QuantileAllocator(Mechanism):
    """Gives buyer i the remaining item maximising F_j(v_ij)^(1/q_j).

    Dummies get an artificial uniform draw. Nothing is paid; this is the
    allocation rule that lower-bounds the dynamic posted prices.
    """

    mech_id = "quantile"

    def __init__(self, model, n, q_provider=None):
        super().__init__(model, n)
        if model.m != n:
            raise ConfigurationError("the quantile rule runs on a square market; pad the model first")
        self.q_provider = q_provider or MatchProbabilityCache(model)
        self._dummy = model.dummy_mask

    def prices(self, i, remaining):
        raise ConfigurationError("the quantile rule allocates without prices")

    def run_block(self, values, types, rng, track=False):
        B, n, m = values.shape
        avail = np.ones((B, m), dtype=bool)
        welfare = np.zeros(B)
        sold = np.zeros((B, m), dtype=bool)
        alloc = np.zeros((n, m)) if track else None
        rows = np.arange(B)
        for i in range(1, n + 1):
            K = n - i + 1
            q = self._exponents(K, avail)
            u = rng.random((B, m))
            scores = np.empty((B, m))
            for jj, d in enumerate(self.model.marginals):
                scores[:, jj] = u[:, jj] if d is None else d.cdf(values[:, i - 1, jj])
            scores = np.where(avail, scores**q, -np.inf)
            j = np.argmax(scores, axis=1)
            welfare += values[rows, i - 1, j]
            avail[rows, j] = False
            sold[rows, j] = True
            if track:
                np.add.at(alloc[i - 1], j, 1.0)
        sold &= ~self._dummy[None, :]
        zeros = np.zeros(B)
        return BlockOutcome(welfare, zeros, welfare.copy(), sold, alloc)

    def _exponents(self, K, avail):
        # 1/q per (row, item); rows sharing a remaining set share estimates
        weights = 1 << np.arange(self.m, dtype=np.int64)
        keys = avail.astype(np.int64) @ weights
        uniq, inv = np.unique(keys, return_inverse=True)
        table = np.ones((len(uniq), self.m))
        for u, key in enumerate(uniq):
            rem = np.flatnonzero((int(key) >> np.arange(self.m)) & 1)
            est = self.q_provider(K, rem)
            for jj, qj in zip(est.items, est.q):
                table[u, jj] = 1.0 / qj if qj > 0 else INF
        return table[inv.ravel()]


class VcgSeparable(Mechanism):
    """Offline VCG for separable buyers (assortative allocation)."""

    mech_id = "vcg"
    offline = True

    def __init__(self, model: Separable, n):
        super().__init__(model, n)
        self.alphas = np.asarray(model.alphas)

    def prices(self, i, remaining):
        raise ConfigurationError("VCG is an offline mechanism and posts no prices")

    def run_block(self, values, types, rng, track=False):
        B, n = types.shape
        L = max(n, self.m)
        a = np.zeros(L + 1)
        a[: self.m] = self.alphas
        order = np.argsort(-types, axis=1, kind="stable")
        ts = np.take_along_axis(types, order, axis=1)
        ts1 = np.concatenate((ts, np.zeros((B, 1))), axis=1)  # ts1[:, k] = t_(k+1)
        k = np.arange(n)
        terms = (a[k] - a[k + 1])[None, :] * ts1[:, 1:]
        pay = np.cumsum(terms[:, ::-1], axis=1)[:, ::-1]  # payment for slot j
        w = min(n, self.m)
        welfare = (ts[:, :w] * a[None, :w]).sum(axis=1)
        revenue = pay[:, :w].sum(axis=1)
        sold = np.zeros((B, self.m), dtype=bool)
        sold[:, :w] = a[:w] > 0
        alloc = None
        if track:
            alloc = np.zeros((n, self.m))
            for slot in range(w):
                np.add.at(alloc[:, slot], order[:, slot], 1.0)
        return BlockOutcome(welfare, revenue, welfare - revenue, sold, alloc)


def _single_marginal(model) -> Distribution:
    if isinstance(model, Separable) or model.m != 1 or model.marginals[0] is None:
        raise ConfigurationError(f"single-item rules need one real item with its own marginal; got {model.spec()}")
    return model.marginals[0]


def _need(model, kinds, mech_id):
    if model.kind not in kinds:
        raise ConfigurationError(f"{mech_id} needs a {' or '.join(kinds)} model, got {model.kind}")


def make_mechanism(mech_id: str, model: ValuationModel, n: int, **options) -> Mechanism:
    """Build a mechanism by its CLI id for ``n`` buyers.

    Rules that run on a square market pad ``model`` with dummy items; the
    padded model is available as ``mechanism.model``.
    """
    if mech_id not in MECHANISM_IDS:
        raise ConfigurationError(f"unknown mechanism {mech_id!r}; valid ids: {', '.join(MECHANISM_IDS)}")
    if mech_id == "ladder":
        d = _single_marginal(model)
        return PriceTable(model, n, single_item_ladder(d, n)[:, None], "ladder")
    if mech_id == "mdp":
        d = _single_marginal(model)
        return PriceTable(model, n, mdp_optimal_prices(d, n).offered[:, None], "mdp")
    if mech_id == "static-ind":
        _need(model, ("independent",), mech_id)
        return StaticPrices(model, n, static_independent_prices(model.marginals, n), mech_id)
    if mech_id == "dyn-ind":
        _need(model, ("independent",), mech_id)
        return DynamicIndependent(pad_to_square(model, n), n, **options)
    if mech_id == "static-sep":
        _need(model, ("separable",), mech_id)
        sq = pad_to_square(model, n)
        prices, _ = static_separable_prices(sq.alphas, sq.type_dist, n)
        return StaticPrices(sq, n, prices, mech_id)
    if mech_id == "dyn-sep":
        _need(model, ("separable",), mech_id)
        return DynamicSeparable(pad_to_square(model, n), n)
    if mech_id == "sub-dyn":
        _need(model, ("independent", "additive"), mech_id)
        return PriceTable(model, n, subadditive_group_prices(model.marginals, n), mech_id)
    if mech_id == "sub-static":
        _need(model, ("independent", "additive"), mech_id)
        return StaticPrices(model, n, subadditive_static_prices(model.marginals, n), mech_id)
    if mech_id == "add-static":
        _need(model, ("additive",), mech_id)
        return StaticPrices(model, n, additive_static_prices(model.marginals, n), mech_id)
    if mech_id == "add-dyn":
        _need(model, ("additive",), mech_id)
        return PriceTable(model, n, additive_dynamic_prices(model.marginals, n), mech_id)
    if mech_id == "vcg":
        _need(model, ("separable",), mech_id)
        return VcgSeparable(model, n)
    _need(model, ("independent",), mech_id)
    return QuantileAllocator(pad_to_square(model, n), n, **options)


def static_single_price(model: ValuationModel, n: int, price: float) -> StaticPrices:
    """A single item offered at the same price ``price`` to every buyer."""
    _single_marginal(model)
    if not (price >= 0) or math.isnan(price):
        raise ConfigurationError("price must be >= 0")
    return StaticPrices(model, n, [price], "static-price")
