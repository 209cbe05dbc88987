"""Closed forms and bound checks for single-item exponential markets.

Everything here uses Exp(1) values, where the offline optimum is H_n.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._numeric import golden_section_max, harmonic

# the static gap bound is proven once ln ln ln n >= 4, far beyond float range
STATIC_THRESHOLD_LOG3 = 4.0
SLACK = 1e-12


@dataclass
class BoundReport:
    """Outcome of checking lhs <= rhs over a parameter grid."""

    claim: str
    grid: list
    lhs: list = field(repr=False)
    rhs: list = field(repr=False)
    passed: bool
    max_violation: float
    slack: float = SLACK
    notes: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _report(claim, grid, lhs, rhs, slack=SLACK, notes="") -> BoundReport:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    viol = float(np.max(lhs - rhs)) if len(lhs) else 0.0
    return BoundReport(claim, list(grid), lhs.tolist(), rhs.tolist(), bool(viol <= slack), viol, slack, notes)


def exp_static_welfare(n: int, p) -> np.ndarray | float:
    """(p + 1) * (1 - (1 - e^-p)^n): welfare of one fixed price p."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0):
        raise ValueError("price must be >= 0")
    never = np.isinf(p_arr)
    q = np.where(never, 0.0, p_arr)
    with np.errstate(divide="ignore"):
        sell = -np.expm1(n * np.log1p(-np.exp(-q)))
    out = np.where(never, 0.0, (q + 1.0) * sell)
    return float(out) if np.ndim(out) == 0 else out


def _lll(n: float) -> float:
    return math.log(math.log(math.log(n)))


def static_case_intervals(n: int) -> list[tuple[float, float]]:
    """The three price ranges used in the static impossibility argument.

    Needs n > e^e so that ln ln ln n is defined. The middle range may be empty.
    """
    if n <= math.e**math.e:
        raise ValueError("the case split needs n > e^e")
    H = harmonic(n)
    a = max(0.0, math.log(n) - 0.5 * _lll(n))
    return [(0.0, a), (a, H - 1.0), (H - 1.0, H + 2.0)]


def static_case_bounds(n: int):
    """Dominating expression for each case, as callables of p."""
    H = harmonic(n)
    case2 = H * (1.0 - _lll(n) / (2.0 * math.log(n)))
    return [
        lambda p: np.asarray(p) + 1.0,
        lambda p: np.full_like(np.asarray(p, dtype=float), case2),
        lambda p: np.full_like(np.asarray(p, dtype=float), 0.99 * H + 1.0),
    ]


def static_case_check(ns: Sequence[int] = (10**3, 10**6, 10**9), points: int = 2001) -> BoundReport:
    """Check that each case bound dominates the welfare on its own interval."""
    grid, lhs, rhs = [], [], []
    for n in ns:
        bounds = static_case_bounds(n)
        for case, ((lo, hi), bound) in enumerate(zip(static_case_intervals(n), bounds), start=1):
            if hi <= lo:
                continue
            ps = np.linspace(lo, hi, points)
            w = exp_static_welfare(n, ps)
            b = bound(ps)
            k = int(np.argmax(w - b))
            grid.append({"n": n, "case": case, "p": float(ps[k])})
            lhs.append(float(w[k]))
            rhs.append(float(b[k]))
    return _report("static-cases", grid, lhs, rhs, notes="worst grid point per (n, case)")


@dataclass(frozen=True)
class StaticOptimum:
    n: int
    price: float
    welfare: float
    gap: float  # H_n - welfare
    fitted_c: float  # gap / ln ln ln n, nan when undefined
    asserted: bool  # whether n is past the proven threshold


def exp_static_best(n: int) -> StaticOptimum:
    """Best fixed price for n Exp(1) buyers.

    Golden-section search inside each case interval plus a comparison of the
    interval ends. The asymptotic gap bound is only asserted when
    ln ln ln n >= 4, which no float n reaches; otherwise the gap is reported.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    H = harmonic(n)
    if n > math.e**math.e:
        pieces = static_case_intervals(n)
    else:
        pieces = [(0.0, H + 2.0)]
    best_p, best_w = 0.0, exp_static_welfare(n, 0.0)
    for lo, hi in pieces:
        if hi <= lo:
            continue
        p, w = golden_section_max(lambda x: exp_static_welfare(n, x), lo, hi)
        if w > best_w:
            best_p, best_w = p, w
    lll = _lll(n) if n > math.e**math.e else float("nan")
    c = (H - best_w) / lll if lll > 0 else float("nan")
    asserted = lll >= STATIC_THRESHOLD_LOG3
    if asserted and not H - best_w >= 0.25 * lll:
        raise ArithmeticError("static gap fell below the proven bound")
    return StaticOptimum(n, float(best_p), float(best_w), float(H - best_w), float(c), asserted)


def mdp_values(n_max: int) -> np.ndarray:
    """p_k after k steps of p <- p + e^-p from 0, for k = 0..n_max."""
    out = np.empty(n_max + 1)
    p = 0.0
    out[0] = 0.0
    for k in range(1, n_max + 1):
        p = p + math.exp(-p)
        out[k] = p
    return out


def mdp_bound_check(n_max: int) -> BoundReport:
    """Continuation values with k buyers left stay below H_k - 1/8 for k >= 2."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    vals = mdp_values(n_max)
    k = np.arange(2, n_max + 1)
    H = np.cumsum(1.0 / np.arange(1, n_max + 1))[k - 1]
    rep = _report("mdp", [int(k[0]), int(k[-1])], vals[k], H - 0.125)
    # keep the JSON small: grid is the k range, values are summarised
    i = int(np.argmax(vals[k] - (H - 0.125)))
    rep.notes = f"k = 2..{n_max}; tightest at k={int(k[i])}"
    rep.lhs = [float(vals[k][i])]
    rep.rhs = [float(H[i] - 0.125)]
    return rep


@dataclass(frozen=True)
class TrendFit:
    model: str
    c: float
    intercept: float
    r2: float
    residuals: np.ndarray = field(repr=False)


_TREND_MODELS = {
    "one-over-log": lambda n: 1.0 / np.log(n),
    "logloglog-over-log": lambda n: np.log(np.log(np.log(n))) / np.log(n),
}


def ratio_trend_fit(ns, ratios, model: str = "one-over-log", intercept: bool = True) -> TrendFit:
    """Least squares fit of ratio ~ a - c * g(n).

    With ``intercept=False`` a is pinned to 1. Degenerate designs (all g(n)
    equal) raise ``ArithmeticError``.
    """
    if model not in _TREND_MODELS:
        raise ValueError(f"unknown trend model {model!r}; choose from {sorted(_TREND_MODELS)}")
    n = np.asarray(ns, dtype=float)
    r = np.asarray(ratios, dtype=float)
    if n.shape != r.shape or len(n) < 3:
        raise ValueError("need at least three (n, ratio) pairs")
    if np.any(r <= 0) or np.any(r > 1):
        raise ValueError("ratios must lie in (0, 1]")
    g = _TREND_MODELS[model](n)
    if intercept:
        X = np.column_stack((np.ones_like(g), -g))
        y = r
    else:
        X = -g[:, None]
        y = r - 1.0
    if np.linalg.matrix_rank(X) < X.shape[1] or np.ptp(g) < 1e-12 * np.max(np.abs(g)):
        raise ArithmeticError("degenerate design: g(n) takes a single value")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ coef
    res = y - fitted
    ss_res = float(res @ res)
    ss_tot = float(((r - r.mean()) ** 2).sum())
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-24 else float("nan")
    a = float(coef[0]) if intercept else 1.0
    c = float(coef[-1])
    if abs(c) < 1e-12:
        c = 0.0
    return TrendFit(model, c, a, r2, res)
