"""Dynamic prices for independent items via a damped fixed-point iteration.

Buyer i faces the remaining items with prices x. The probability that she
buys item j is

    r_j(x) = int_{t > x_j} f_j(t) * prod_{j' != j} F_j'(t - x_j + x_j') dt,

and we want r_j(x) = q_j / k where k is the number of buyers left. The map
x_j <- (k / q_j) * r_j(x) * x_j has every such price vector as a fixed point;
it is iterated with damping and the result is polished by a root solve when
the iteration stalls (this happens whenever a price sits at the bottom of its
support, where the map becomes flat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .distributions import Distribution

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
# panel edges in quantile space for the long right tails
_TAIL_LEVELS = (0.25, 0.5, 0.75, 0.9, 0.97, 0.99, 0.999, 1 - 1e-4, 1 - 1e-5, 1 - 1e-6, 1 - 1e-8, 1 - 1e-10)
_CUT = 1 - 1e-14
_GRADING = 4.0 ** -np.arange(1, 16)


class FixedPointError(RuntimeError):
    """The price iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residuals: np.ndarray, prices: np.ndarray):
        super().__init__(message)
        self.residuals = residuals
        self.prices = prices


@dataclass
class FixedPointResult:
    prices: np.ndarray  # one entry per real item
    targets: np.ndarray
    purchase_prob: np.ndarray
    residual: float
    iterations: int
    method: str
    trace: list = field(default_factory=list, repr=False)


def _rough_at_floor(dist: Distribution) -> bool:
    # t**(k-1) densities with fractional k are not polynomial-like at 0
    shape = getattr(dist, "shape", 1.0)
    return not float(shape).is_integer()


def _panels(dist: Distribution, lo: float, hi: float, kinks, graded=()) -> np.ndarray:
    edges = [lo, hi]
    for lev in _TAIL_LEVELS:
        edges.append(float(dist.ppf(lev)))
    edges.extend(kinks)
    for b in graded:
        edges.extend(b + (hi - lo) * _GRADING)
        edges.extend(b - (hi - lo) * _GRADING)
    e = np.unique(np.clip(np.asarray(edges, dtype=float), lo, hi))
    return e


def _gauss_nodes(edges: np.ndarray):
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    x = (a + b) * 0.5 + half * _GL_X[None, :]
    w = half * _GL_W[None, :]
    return x.ravel(), w.ravel()


def purchase_probabilities(marginals: Sequence[Distribution], prices, outside: bool = True) -> np.ndarray:
    """Probability that a unit-demand buyer picks each item at ``prices``.

    With ``outside=False`` the buyer is forced to pick an item (her choice
    then depends only on price differences).
    """
    x = np.asarray(prices, dtype=float)
    m = len(marginals)
    r = np.zeros(m)
    for j, dj in enumerate(marginals):
        lo = max(x[j], dj.lower) if outside else dj.lower
        hi = dj.upper if math.isfinite(dj.upper) else float(dj.ppf(_CUT))
        if hi <= lo:
            continue
        kinks = []
        graded = [dj.lower] if _rough_at_floor(dj) else []
        for jp, dp in enumerate(marginals):
            if jp == j:
                continue
            shift = x[j] - x[jp]
            kinks.append(dp.lower + shift)
            if _rough_at_floor(dp):
                graded.append(dp.lower + shift)
            if math.isfinite(dp.upper):
                kinks.append(dp.upper + shift)
        t, w = _gauss_nodes(_panels(dj, lo, hi, kinks, graded))
        integrand = dj.pdf(t)
        for jp, dp in enumerate(marginals):
            if jp != j:
                integrand = integrand * dp.cdf(t - x[j] + x[jp])
        r[j] = float(np.dot(w, integrand))
    return r


def purchase_probabilities_mc(marginals, prices, samples: int = 10**6, rng=None, outside: bool = True) -> np.ndarray:
    """Monte Carlo estimate of :func:`purchase_probabilities`."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    v = np.column_stack([d.sample(gen, samples) for d in marginals])
    util = v - np.asarray(prices, dtype=float)[None, :]
    j = np.argmax(util, axis=1)
    if outside:
        keep = util[np.arange(samples), j] > 0
        j = j[keep]
    return np.bincount(j, minlength=len(marginals)) / samples


def _targets(q, n_left: int) -> np.ndarray:
    t = np.asarray(q, dtype=float) / n_left
    if np.any(t < 0):
        raise ValueError("match probabilities must be non-negative")
    total = t.sum()
    if total > 1.0:
        t = t / total
    return t


def solve_dynamic_prices(
    marginals: Sequence[Distribution],
    q,
    n_left: int,
    *,
    damping: float = 0.5,
    max_iter: int = 500,
    tol: float = 1e-8,
    initial=None,
) -> FixedPointResult:
    """Prices at which each real item sells with probability q_j / n_left.

    Any target mass not assigned to real items (1 - sum q_j / n_left) is the
    probability that the buyer takes nothing, which stands for allocating a
    dummy item. Prices are kept in [0, F_j^-1(1 - q_j / n_left)].
    """
    marginals = list(marginals)
    m = len(marginals)
    targets = _targets(q, n_left)
    if np.any(targets <= 0):
        raise ValueError("every real item needs a positive match probability")
    outside_mass = max(0.0, 1.0 - targets.sum())
    lowers = np.array([d.lower for d in marginals])
    caps = np.array([float(d.ppf(1.0 - t)) if t < 1 else d.lower for d, t in zip(marginals, targets)])

    x = caps.copy() if initial is None else np.clip(np.asarray(initial, dtype=float), 0.0, caps)
    trace = []
    it = 0
    r = purchase_probabilities(marginals, x)
    resid = float(np.max(np.abs(r - targets)))
    trace.append(resid)
    while resid > tol and it < max_iter:
        phi = np.minimum(r / targets * x, caps)
        x = (1.0 - damping) * x + damping * phi
        r = purchase_probabilities(marginals, x)
        resid = float(np.max(np.abs(r - targets)))
        trace.append(resid)
        it += 1
        # flat map near the support floor: hand over to the root solve
        if it >= 20 and resid > 0.5 * trace[-20]:
            break
    method = "damped"
    if resid > tol:
        x = _polish(marginals, targets, outside_mass, lowers, x)
        r = purchase_probabilities(marginals, x)
        resid = float(np.max(np.abs(r - targets)))
        trace.append(resid)
        method = "damped+root"
    if not resid <= max(tol, 1e-10):
        raise FixedPointError(f"price iteration stopped at residual {resid:.3g} after {it} steps", r - targets, x)
    return FixedPointResult(x, targets, r, resid, it, method, trace)


def _polish(marginals, targets, outside_mass, lowers, x0) -> np.ndarray:
    m = len(marginals)
    if m == 1:
        d = marginals[0]
        t = targets[0]
        return np.array([float(d.ppf(1.0 - t)) if t < 1 else d.lower])
    if outside_mass <= 1e-12:
        # the buyer always buys; only price differences matter, and the
        # lowest (price - support floor) is pinned to zero
        def eq(y):
            prices = np.concatenate(([0.0], y))
            return purchase_probabilities(marginals, prices, outside=False)[1:] - targets[1:]

        sol = optimize.root(eq, x0[1:] - x0[0], method="hybr", options={"xtol": 1e-14})
        y = np.concatenate(([0.0], sol.x))
        shift = np.min(y - lowers)
        return y - shift

    caps = np.array([float(d.ppf(1.0 - t)) for d, t in zip(marginals, targets)])
    span = caps - lowers

    def to_prices(z):
        return lowers + np.exp(np.minimum(z, 50.0))

    def eq_out(z):
        return purchase_probabilities(marginals, to_prices(z)) - targets

    # x = 0 is a spurious fixed point of the multiplicative map, so never
    # start the root solve from the floor
    starts = [np.clip(x0 - lowers, 0.05 * span, span), 0.9 * span, 0.5 * span]
    best = None
    for start in starts:
        sol = optimize.root(eq_out, np.log(start), method="hybr", options={"xtol": 1e-14})
        err = np.max(np.abs(eq_out(sol.x)))
        if best is None or err < best[0]:
            best = (err, to_prices(sol.x))
        if err <= 1e-10:
            break
    return best[1]
