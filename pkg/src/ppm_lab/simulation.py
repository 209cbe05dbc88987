"""Seeded Monte Carlo harness comparing mechanisms with the offline optimum.

Trials run in blocks whose size depends only on (n, m). Block b draws from
``SeedSequence(master_seed, spawn_key=(b,))``, split into a profile stream and
a mechanism stream. Two consequences:

* every mechanism run on the same model, n and seed sees the same profiles
  (common random numbers);
* results do not depend on how many worker processes share the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .market import ValuationModel
from .mechanisms import BlockOutcome, Mechanism
from .oracle import assignment
from .pricing import ConfigurationError

ORACLES = ("auto", "none", "matching")
BLOCK_CELLS = 1 << 21  # values per block, bounds memory use
MAX_BLOCK = 2000


@dataclass(frozen=True)
class TrialOutcome:
    """One trial, for inspection and invariant checks."""

    trial: int
    sw_pp: float
    revenue: float
    utility: float
    sw_opt: float
    sold: np.ndarray = field(repr=False)


@dataclass
class SimulationSummary:
    mechanism: str
    n: int
    m: int
    trials: int
    sw_pp_mean: float
    sw_pp_se: float
    revenue_mean: float
    revenue_se: float
    sw_opt_mean: float
    sw_opt_se: float
    ratio: float
    ratio_se: float
    sale_freq: np.ndarray = field(repr=False)
    all_sold: float = float("nan")
    alloc_freq: Optional[np.ndarray] = field(default=None, repr=False)
    per_trial: Optional[dict] = field(default=None, repr=False)

    def outcome(self, t: int) -> TrialOutcome:
        if self.per_trial is None:
            raise ValueError("per-trial arrays were not kept; rerun with keep_trials=True")
        pt = self.per_trial
        return TrialOutcome(t, pt["sw_pp"][t], pt["revenue"][t], pt["utility"][t], pt["sw_opt"][t], pt["sold"][t])

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("per_trial")
        d["sale_freq"] = self.sale_freq.tolist()
        d["alloc_freq"] = None if self.alloc_freq is None else self.alloc_freq.tolist()
        return d


def block_size(n: int, m: int) -> int:
    return int(max(1, min(MAX_BLOCK, BLOCK_CELLS // max(1, n * m))))


def block_rngs(master_seed: int, block: int):
    ss = np.random.SeedSequence(master_seed, spawn_key=(block,))
    prof, mech = ss.spawn(2)
    return np.random.default_rng(prof), np.random.default_rng(mech)


def oracle_welfare(model: ValuationModel, values: np.ndarray, types, kind: str = "auto") -> np.ndarray:
    """Offline optimum per trial for a (B, n, m) block."""
    B, n, m = values.shape
    if kind == "none":
        return np.full(B, np.nan)
    if kind == "auto":
        if model.kind == "separable":
            a = np.asarray(model.alphas)
            k = min(n, len(a))
            ts = -np.sort(-types, axis=1)[:, :k]
            return ts @ a[:k]
        if model.kind == "additive":
            return values.max(axis=1).sum(axis=1)
        if m == 1:
            return values[:, :, 0].max(axis=1)
    out = np.empty(B)
    for t in range(B):
        r, c = assignment(values[t])
        out[t] = values[t][r, c].sum()
    return out


def _run_block(args):
    mechanism, oracle, master_seed, b, size, track = args
    prof_rng, mech_rng = block_rngs(master_seed, b)
    values, types = mechanism.model.sample_values(prof_rng, size, mechanism.n)
    res: BlockOutcome = mechanism.run_block(values, types, mech_rng, track)
    opt = oracle_welfare(mechanism.model, values, types, oracle)
    return res, opt


def _workers(requested: Optional[int]) -> int:
    cap = os.environ.get("PPM_LAB_THREADS")
    w = 1 if requested is None else int(requested)
    if cap:
        w = min(w, max(1, int(cap)))
    return max(1, w)


def _mean_se(x: np.ndarray):
    if len(x) < 2:
        return float(np.mean(x)), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _ratio(pp: np.ndarray, opt: np.ndarray):
    """E[pp]/E[opt] with a delta-method SE from the paired trials."""
    T = len(pp)
    mp, mo = float(np.mean(pp)), float(np.mean(opt))
    if not np.isfinite(mo) or mo == 0:
        return float("nan"), float("nan")
    r = mp / mo
    if T < 2:
        return r, 0.0
    cov = np.cov(pp, opt, ddof=1)
    var = (cov[0, 0] / mo**2 - 2 * mp * cov[0, 1] / mo**3 + mp**2 * cov[1, 1] / mo**4) / T
    return r, float(math.sqrt(max(var, 0.0)))


def run_trials(
    model: Optional[ValuationModel],
    mechanism: Mechanism,
    oracle: str = "auto",
    trials: int = 10_000,
    master_seed: int = 0,
    n: Optional[int] = None,
    track_allocation: bool = False,
    workers: Optional[int] = None,
    keep_trials: bool = False,
) -> SimulationSummary:
    """Simulate ``trials`` independent markets and summarise them.

    ``model`` must be the model the mechanism was built for (or its unpadded
    original); pass None to use ``mechanism.model``.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if oracle not in ORACLES:
        raise ConfigurationError(f"unknown oracle {oracle!r}; choose from {ORACLES}")
    if n is not None and n != mechanism.n:
        raise ConfigurationError(f"mechanism was built for n={mechanism.n}, not {n}")
    if model is not None and model is not mechanism.model and model.kind != mechanism.model.kind:
        raise ConfigurationError(f"{mechanism.mech_id} was built for a {mechanism.model.kind} model, got {model.kind}")
    size = block_size(mechanism.n, mechanism.m)
    nblocks = -(-trials // size)
    jobs = [
        (mechanism, oracle, master_seed, b, min(size, trials - b * size), track_allocation) for b in range(nblocks)
    ]
    w = min(_workers(workers), nblocks)
    if w > 1:
        with ProcessPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(_run_block, jobs))
    else:
        parts = [_run_block(j) for j in jobs]

    # merge in block order so the result is independent of scheduling
    pp = np.concatenate([p[0].welfare for p in parts])
    rev = np.concatenate([p[0].revenue for p in parts])
    util = np.concatenate([p[0].utility for p in parts])
    sold = np.concatenate([p[0].sold for p in parts])
    opt = np.concatenate([p[1] for p in parts])
    alloc = None
    if track_allocation:
        alloc = sum(p[0].alloc for p in parts) / trials

    pp_mean, pp_se = _mean_se(pp)
    rev_mean, rev_se = _mean_se(rev)
    if oracle == "none":
        opt_mean = opt_se = ratio = ratio_se = float("nan")
    else:
        opt_mean, opt_se = _mean_se(opt)
        ratio, ratio_se = _ratio(pp, opt)
    real = ~mechanism.model.dummy_mask
    all_sold = float(np.mean(sold[:, real].all(axis=1))) if real.any() else float("nan")
    per_trial = None
    if keep_trials:
        per_trial = {"sw_pp": pp, "revenue": rev, "utility": util, "sw_opt": opt, "sold": sold}
    return SimulationSummary(
        mechanism=mechanism.mech_id,
        n=mechanism.n,
        m=mechanism.m,
        trials=trials,
        sw_pp_mean=pp_mean,
        sw_pp_se=pp_se,
        revenue_mean=rev_mean,
        revenue_se=rev_se,
        sw_opt_mean=opt_mean,
        sw_opt_se=opt_se,
        ratio=ratio,
        ratio_se=ratio_se,
        sale_freq=sold.mean(axis=0),
        all_sold=all_sold,
        alloc_freq=alloc,
        per_trial=per_trial,
    )


def sweep(
    model_for_n: Callable[[int], ValuationModel],
    mechanism_for: Callable[[ValuationModel, int], Mechanism],
    ns: Sequence[int],
    trials: int = 10_000,
    seed: int = 0,
    **kwargs,
) -> list[SimulationSummary]:
    """One :func:`run_trials` row per n, all with the same master seed."""
    ns = list(ns)
    if not ns:
        raise ConfigurationError("ns must be non-empty")
    rows = []
    for n in ns:
        model = model_for_n(n)
        mech = mechanism_for(model, n)
        rows.append(run_trials(model, mech, trials=trials, master_seed=seed, **kwargs))
    return rows


@dataclass(frozen=True)
class AuditReport:
    freq: np.ndarray = field(repr=False)  # (n, m) observed frequencies
    target: float
    z: np.ndarray = field(repr=False)  # standardised deviations
    max_abs_z: float
    flagged: list  # (step, item) pairs, 1-based
    threshold: float = 4.0

    @property
    def ok(self) -> bool:
        return not self.flagged


def allocation_frequency_audit(summary: SimulationSummary, threshold: float = 4.0) -> AuditReport:
    """Compare per-(step, item) allocation frequencies with 1/n."""
    if summary.alloc_freq is None:
        raise ValueError("summary was collected without allocation tracking")
    f = summary.alloc_freq
    n = f.shape[0]
    target = 1.0 / n
    se = math.sqrt(target * (1 - target) / summary.trials) if n > 1 else 0.0
    if se == 0.0:
        z = np.where(np.isclose(f, target), 0.0, np.inf)
    else:
        z = (f - target) / se
    bad = np.argwhere(np.abs(z) > threshold)
    flagged = [(int(i) + 1, int(j) + 1) for i, j in bad]
    return AuditReport(f, target, z, float(np.max(np.abs(z))), flagged, threshold)
