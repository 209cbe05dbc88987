"""Continuous non-negative MHR distributions and order-statistic tools.

Three families are supported: exponential, uniform on [a, b] with a >= 0,
and Weibull with shape k >= 1. All of them have a non-decreasing hazard
rate; Weibull with k < 1 is rejected when constructed.

The lemma predicates at the bottom (``check_*``) evaluate both sides of an
inequality numerically and report whether it holds within a small relative
slack. They are used by the test-suite and by ``ppm-lab verify``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from ._numeric import harmonic

# quantile bisection stops at whichever is reached first
QUANTILE_XTOL = 1e-10
QUANTILE_PTOL = 1e-12
# improper integrals are cut at F^-1(1 - TAIL_EPS)
TAIL_EPS = 1e-12
LEMMA_SLACK = 1e-6


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class Distribution:
    """Base class. Subclasses provide closed forms for cdf/sf/pdf/quantile."""

    lower: float
    upper: float

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def sf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def ppf(self, q):
        raise NotImplementedError

    def hazard(self, x):
        x = np.asarray(x, dtype=float)
        s = self.sf(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(s > 0, self.pdf(x) / np.where(s > 0, s, 1.0), np.inf)
        return h if h.ndim else float(h)

    def sample(self, rng: np.random.Generator, size=None):
        # inverse transform keeps every family on one code path
        u = rng.random(size)
        return self.ppf(u)

    def quantile(self, q: float) -> float:
        return quantile(self, q)

    @property
    def mean(self) -> float:
        return self.lower + _integrate_sf(self, self.lower, self.tail_cut())

    def tail_cut(self, eps: float = TAIL_EPS) -> float:
        """Upper integration limit F^-1(1 - eps), or the support end if finite."""
        if math.isfinite(self.upper):
            return self.upper
        return float(self.ppf(1.0 - eps))

    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise DomainError(f"exponential rate must be positive, got {self.rate}")

    @property
    def lower(self):
        return 0.0

    @property
    def upper(self):
        return math.inf

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-self.rate * np.maximum(x, 0.0))
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def hazard(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, self.rate, 0.0)
        return out if out.ndim else float(out)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        out = -np.log1p(-q) / self.rate
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    @property
    def mean(self):
        return 1.0 / self.rate

    def spec(self):
        return f"exp({self.rate:g})"


@dataclass(frozen=True)
class Uniform(Distribution):
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.a < self.b and math.isfinite(self.b)):
            raise DomainError(f"uniform needs 0 <= a < b, got ({self.a}, {self.b})")

    @property
    def lower(self):
        return float(self.a)

    @property
    def upper(self):
        return float(self.b)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip((self.b - x) / (self.b - self.a), 0.0, 1.0)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)
        return out if out.ndim else float(out)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        out = self.a + q * (self.b - self.a)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.uniform(self.a, self.b, size)

    @property
    def mean(self):
        return 0.5 * (self.a + self.b)

    def spec(self):
        return f"unif({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class Weibull(Distribution):
    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError(f"weibull scale must be positive, got {self.scale}")
        if not self.shape >= 1.0:
            # shape < 1 has a decreasing hazard rate
            raise DomainError(f"weibull shape {self.shape} < 1 is not MHR")

    @property
    def lower(self):
        return 0.0

    @property
    def upper(self):
        return math.inf

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-((np.maximum(x, 0.0) / self.scale) ** self.shape))
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(x, 0.0) / self.scale
        out = np.where(x >= 0, self.shape / self.scale * z ** (self.shape - 1) * np.exp(-(z**self.shape)), 0.0)
        return out if out.ndim else float(out)

    def hazard(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(x, 0.0) / self.scale
        out = np.where(x >= 0, self.shape / self.scale * z ** (self.shape - 1), 0.0)
        return out if out.ndim else float(out)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        out = self.scale * (-np.log1p(-q)) ** (1.0 / self.shape)
        return out if out.ndim else float(out)

    @property
    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def spec(self):
        return f"weibull({self.shape:g},{self.scale:g})"


_SPEC_RE = re.compile(r"^\s*(exp|unif|weibull)\s*\(([^)]*)\)\s*$", re.IGNORECASE)


def parse_distribution(text: str) -> Distribution:
    """Parse ``exp(rate)``, ``unif(a,b)`` or ``weibull(k,scale)``."""
    m = _SPEC_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse distribution {text!r}; expected exp(r), unif(a,b) or weibull(k,s)")
    kind = m.group(1).lower()
    try:
        args = [float(a) for a in m.group(2).split(",") if a.strip()]
    except ValueError as exc:
        raise ValueError(f"non-numeric parameter in {text!r}") from exc
    arity = {"exp": (1,), "unif": (2,), "weibull": (1, 2)}[kind]
    if len(args) not in arity:
        raise ValueError(f"{kind} takes {' or '.join(map(str, arity))} parameters, got {len(args)}")
    if kind == "exp":
        return Exponential(*args)
    if kind == "unif":
        return Uniform(*args)
    return Weibull(*args)


def quantile(dist: Distribution, q: float, method: str = "auto") -> float:
    """Inverse cdf F^-1(q) for q in (0, 1).

    ``method="auto"`` uses the closed form; ``"bisect"`` inverts the cdf
    numerically (stops at |dx| <= 1e-10 or |F(x) - q| <= 1e-12).
    """
    if not (0.0 < q < 1.0):
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    if method == "auto":
        return float(dist.ppf(q))
    if method != "bisect":
        raise ValueError(f"unknown method {method!r}")
    lo = dist.lower
    hi = dist.upper if math.isfinite(dist.upper) else max(1.0, lo + 1.0)
    while dist.cdf(hi) < q:
        hi = lo + 2.0 * (hi - lo)
    while True:
        mid = 0.5 * (lo + hi)
        err = dist.cdf(mid) - q
        if abs(err) <= QUANTILE_PTOL or hi - lo <= QUANTILE_XTOL:
            return mid
        if err < 0:
            lo = mid
        else:
            hi = mid


def hazard_monotone_check(dist: Distribution, grid_size: int = 1000):
    """Check that the hazard rate is non-decreasing on a geometric grid.

    Returns ``(ok, x_violation)`` where ``x_violation`` is the first grid point
    at which the hazard drops by more than a 1e-9 relative slack (else None).
    """
    if grid_size < 2:
        raise DomainError("grid_size must be >= 2")
    top = dist.upper if math.isfinite(dist.upper) else dist.tail_cut(1e-9)
    lo = dist.lower
    span = top - lo
    # geometric in the offset from the lower support end, stopping short of
    # the upper end where a bounded support has an infinite hazard
    offsets = np.geomspace(span * 1e-6, span * (1 - 1e-6), grid_size)
    x = lo + offsets
    h = np.asarray(dist.hazard(x), dtype=float)
    drops = h[1:] < h[:-1] * (1.0 - 1e-9)
    if np.any(drops):
        return False, float(x[1 + int(np.argmax(drops))])
    return True, None


def _integrate_sf(dist: Distribution, a: float, b: float, points=None) -> float:
    if b <= a:
        return 0.0
    val, _ = integrate.quad(lambda x: float(dist.sf(x)), a, b, points=points, limit=200, epsabs=1e-13, epsrel=1e-11)
    return val


def _tail_remainder_bound(dist: Distribution, cut: float, weight: float) -> float:
    """MHR tail bound: int_cut^inf weight*S(x) dx <= weight*S(cut)/h(cut)."""
    if not math.isfinite(dist.upper) or cut < dist.upper:
        h = float(dist.hazard(cut))
        return weight * float(dist.sf(cut)) / h if h > 0 else math.inf
    return 0.0


def order_stat_mean(dist: Distribution, n: int, k: int) -> float:
    """Expected k-th highest of n i.i.d. draws.

    Integrates P(v_(k) >= x) = P(Binomial(n, S(x)) >= k) over the support;
    the binomial tail is the regularised incomplete beta I_S(k, n-k+1). The
    integral is truncated at F^-1(1 - 1e-12); the dropped remainder is at
    most n * S(cut) / h(cut) by MHR tail dominance.
    """
    n = int(n)
    k = int(k)
    if n < 1 or not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    cut = dist.tail_cut()
    lo = dist.lower

    def surv(x):
        return float(special.betainc(k, n - k + 1, float(dist.sf(x))))

    # break points around where the k-th order statistic concentrates
    pts = []
    for frac in (0.1, 0.5, 1.0, 2.0, 5.0):
        p = min(max(frac * k / (n + 1), 1e-14), 1 - 1e-14)
        x = float(dist.ppf(1 - p))
        if lo < x < cut:
            pts.append(x)
    val, _ = integrate.quad(surv, lo, cut, points=sorted(set(pts)) or None, limit=400, epsabs=1e-12, epsrel=1e-11)
    return lo + val


def max_expectation(dist: Distribution, n: int) -> float:
    """E[max of n i.i.d. draws]."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return order_stat_mean(dist, n, 1)


def conditional_mean_above(dist: Distribution, tau: float) -> float:
    """E[X | X >= tau] via tau + int_tau^inf S(x) dx / S(tau)."""
    tau = max(float(tau), dist.lower)
    s = float(dist.sf(tau))
    if s <= 0:
        raise DomainError(f"threshold {tau} is at or beyond the support end")
    return tau + _integrate_sf(dist, tau, max(dist.tail_cut(), tau)) / s


@dataclass(frozen=True)
class OrderStatsTable:
    """Expected order statistics mu[1..n] of n i.i.d. draws (mu[0] unused)."""

    dist: Distribution
    n: int
    mu: np.ndarray = field(repr=False)
    tolerance: float = 1e-9

    @classmethod
    def build(cls, dist: Distribution, n: int) -> "OrderStatsTable":
        mu = np.empty(n + 1)
        mu[0] = np.nan
        for k in range(1, n + 1):
            mu[k] = order_stat_mean(dist, n, k)
        mu.setflags(write=False)
        return cls(dist, n, mu)

    def __getitem__(self, k: int) -> float:
        if not 1 <= k <= self.n:
            raise DomainError(f"rank {k} outside 1..{self.n}")
        return float(self.mu[k])


# -- lemma predicates ---------------------------------------------------------


def _geq(lhs: float, rhs: float, slack: float = LEMMA_SLACK) -> bool:
    return lhs >= rhs - slack * max(abs(rhs), abs(lhs), 1e-300)


def _upper_quantile(dist: Distribution, q: float) -> float:
    """F^-1(1 - q) including the endpoints q = 0 and q = 1."""
    if q <= 0.0:
        return dist.upper
    if q >= 1.0:
        return dist.lower
    return float(dist.ppf(1.0 - q))


def check_quantiles1(dist: Distribution, n: int, j: int, q: float, mu_j: float | None = None) -> bool:
    """F^-1(1-q) >= -ln(q) / (H_n - H_{j-1}) * mu_j, for exp(H_{j-1} - H_n) <= q <= 1."""
    if not 1 <= j <= n:
        raise DomainError(f"need 1 <= j <= n, got j={j}, n={n}")
    gap = harmonic(n) - harmonic(j - 1)
    if not (math.exp(-gap) * (1 - 1e-12) <= q <= 1.0):
        raise DomainError(f"q={q} outside [exp(H_{j-1} - H_n), 1]")
    if mu_j is None:
        mu_j = order_stat_mean(dist, n, j)
    return _geq(_upper_quantile(dist, q), -math.log(q) / gap * mu_j)


def quantiles2_rank(n: int, q: float) -> int:
    return int(math.floor(n * q + math.sqrt(n * math.log(n)))) if n > 1 else 0


def check_quantiles2(dist: Distribution, n: int, q: float, table: OrderStatsTable | None = None) -> bool:
    """F^-1(1-q) >= mu_k with k = floor(nq + sqrt(n ln n)); vacuous when k > n."""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")
    k = quantiles2_rank(n, q)
    if k > n or k < 1:
        return True
    mu_k = table[k] if table is not None else order_stat_mean(dist, n, k)
    return _geq(_upper_quantile(dist, q), mu_k)


def quantile_maximum_admissible(z: float, k: int, alpha: float) -> bool:
    if not (0.0 < z <= 1.0) or k < 1:
        return False
    return alpha >= (1.0 + math.log(1.0 / z)) / harmonic(k) * (1 - 1e-12) and alpha >= 1.0 and alpha * k <= (1.0 / z) * (1 + 1e-12)


def check_quantile_maximum(dist: Distribution, z: float, k: int, alpha: float) -> bool:
    """E[X | X >= F^-1(1-z)] <= alpha * E[max of k draws]."""
    if not quantile_maximum_admissible(z, k, alpha):
        raise DomainError(
            f"(z={z}, k={k}, alpha={alpha}) violates alpha >= (1+ln(1/z))/H_k, alpha >= 1, alpha*k <= 1/z"
        )
    lhs = dist.mean if z >= 1.0 else conditional_mean_above(dist, _upper_quantile(dist, z))
    rhs = alpha * max_expectation(dist, k)
    return _geq(rhs, lhs)


def check_babaioff_ratio(dist: Distribution, n_small: int, n_large: int) -> bool:
    """E[max n_small] / E[max n_large] >= H_{n_small} / H_{n_large}."""
    if not 1 <= n_small <= n_large:
        raise DomainError(f"need 1 <= n_small <= n_large, got {n_small}, {n_large}")
    if n_small == n_large:
        return True
    ratio = max_expectation(dist, n_small) / max_expectation(dist, n_large)
    return _geq(ratio, harmonic(n_small) / harmonic(n_large))
