"""Small numeric helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

EULER_GAMMA = 0.5772156649015329


def harmonic(n):
    """Harmonic number H_n = sum_{i<=n} 1/i, vectorised; H_0 = 0."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 0):
        raise ValueError("harmonic numbers need n >= 0")
    out = np.atleast_1d(special.digamma(n_arr + 1.0) + EULER_GAMMA)
    flat = np.atleast_1d(n_arr)
    # digamma is off by a few ulps for small n; exact sums are cheap there
    for idx in np.flatnonzero(flat < 64):
        out[idx] = math.fsum(1.0 / i for i in range(1, int(flat[idx]) + 1))
    return float(out[0]) if n_arr.ndim == 0 else out.reshape(n_arr.shape)


def loglog(n: float) -> float:
    return math.log(math.log(n))


def logloglog(n: float) -> float:
    return math.log(math.log(math.log(n)))


def golden_section_max(func, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 500):
    """Maximise a unimodal ``func`` on [lo, hi]; returns (argmax, value)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = func(d)
    # include the endpoints so boundary optima are not lost
    cands = [(a, func(a)), (b, func(b)), (c, fc), (d, fd)]
    return max(cands, key=lambda t: t[1])
