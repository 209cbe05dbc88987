"""Named end-to-end claims, shared by the ``verify`` command and the
acceptance tests.

Each claim returns a :class:`ClaimResult`. ``scale`` multiplies every trial
count (1.0 is the full budget) so the command can offer a quick mode; time
limits are only enforced at full scale.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._numeric import harmonic
from .bounds import exp_static_best, exp_static_welfare, mdp_bound_check, ratio_trend_fit
from .distributions import (
    Exponential,
    Uniform,
    Weibull,
    check_babaioff_ratio,
    check_quantile_maximum,
    check_quantiles1,
    check_quantiles2,
    OrderStatsTable,
    order_stat_mean,
    quantile_maximum_admissible,
)
from .fixed_point import solve_dynamic_prices
from .market import AdditiveIndependent, IndependentUnitDemand, Separable, choose_unit_demand
from .mechanisms import make_mechanism, static_single_price
from .oracle import max_weight_matching, separable_optimum
from .pricing import mdp_optimal_prices
from .simulation import allocation_frequency_audit, run_trials


@dataclass
class ClaimResult:
    name: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        # timings stay out of reports so identical runs give identical files
        return {"claim": self.name, "passed": self.passed, "details": self.details}


def _trials(base: int, scale: float) -> int:
    return max(200, int(round(base * scale)))


def _timed(name, fn, limit=None, scale=1.0):
    t0 = time.perf_counter()
    ok, details = fn()
    dt = time.perf_counter() - t0
    if limit is not None and scale >= 1.0:
        details["time_limit_s"] = limit
        ok = ok and dt < limit
    return ClaimResult(name, bool(ok), dt, details)


EXP1 = IndependentUnitDemand((Exponential(),))


def claim_offline_exp(scale=1.0, seed=0) -> ClaimResult:
    """Expected maximum of 1000 Exp(1) draws is H_1000."""

    def body():
        n = 1000
        s = run_trials(EXP1, make_mechanism("ladder", EXP1, n), trials=_trials(10**5, scale), master_seed=seed)
        z = (s.sw_opt_mean - harmonic(n)) / s.sw_opt_se
        return abs(z) <= 3, {"mean": s.sw_opt_mean, "se": s.sw_opt_se, "H_n": harmonic(n), "z": z}

    return _timed("offline-exp", body, limit=10.0, scale=scale)


def claim_mdp(scale=1.0, seed=0) -> ClaimResult:
    """Last two MDP thresholds and the H_k - 1/8 bound up to 10^5 buyers."""

    def body():
        table = mdp_optimal_prices(Exponential(), 50)
        e1 = abs(table.remaining(1) - 1.0)
        e2 = abs(table.remaining(2) - (1.0 + math.exp(-1.0)))
        rep = mdp_bound_check(10**5)
        return e1 <= 1e-9 and e2 <= 1e-9 and rep.passed, {
            "err_last": e1,
            "err_second_last": e2,
            "bound_max_violation": rep.max_violation,
        }

    return _timed("mdp-recursion", body, limit=5.0, scale=scale)


def claim_static_closed_form(scale=1.0, seed=0) -> ClaimResult:
    """Simulated fixed-price welfare agrees with (p+1)(1-(1-e^-p)^n)."""

    def body():
        rows = []
        ok = True
        for n in (10, 100, 1000):
            for label, p in (("1", 1.0), ("ln n", math.log(n)), ("H_n", harmonic(n))):
                s = run_trials(
                    EXP1, static_single_price(EXP1, n, p), oracle="none", trials=_trials(10**5, scale), master_seed=seed
                )
                exact = exp_static_welfare(n, p)
                z = (s.sw_pp_mean - exact) / s.sw_pp_se
                ok &= abs(z) <= 3
                rows.append({"n": n, "p": label, "sim": s.sw_pp_mean, "exact": exact, "z": z})
        return ok, {"rows": rows}

    return _timed("static-closed-form", body, scale=scale)


def claim_allocation_audit(scale=1.0, seed=0) -> ClaimResult:
    """Each (step, item) cell is allocated with frequency 1/8."""

    def body():
        n = 8
        trials = _trials(10**5, scale)
        sep = Separable(tuple(np.linspace(1.0, 0.3, n)), Exponential())
        a1 = allocation_frequency_audit(
            run_trials(sep, make_mechanism("dyn-sep", sep, n), trials=trials, master_seed=seed, track_allocation=True)
        )
        ind = IndependentUnitDemand((Exponential(), Uniform(0, 2), Weibull(2, 1), Exponential(0.5)) * 2)
        a2 = allocation_frequency_audit(
            run_trials(
                ind,
                make_mechanism("quantile", ind, n),
                oracle="none",
                trials=trials,
                master_seed=seed,
                track_allocation=True,
            )
        )
        return a1.ok and a2.ok, {"dyn_sep_max_z": a1.max_abs_z, "quantile_max_z": a2.max_abs_z}

    return _timed("allocation-audit", body, scale=scale)


LEMMA_DISTS = (Exponential(), Uniform(0, 1), Weibull(2, 1))


def _maximum_params(n):
    out = []
    for z in (0.5, 10.0 / n, 1.0 / n):
        for k in sorted({1, 2, 5, n // 10, n // 2, n}):
            if k < 1:
                continue
            alpha = max(1.0, (1.0 + math.log(1.0 / z)) / harmonic(k))
            if quantile_maximum_admissible(z, k, alpha):
                out.append((z, k, alpha))
    return out


def claim_quantile_lemmas(scale=1.0, seed=0) -> ClaimResult:
    """The four quantile inequalities on a grid of laws, n and parameters."""

    def body():
        counts = {"quantiles1": 0, "quantiles2": 0, "quantile_maximum": 0, "babaioff": 0}
        failures = []
        worst_equality = 0.0
        for dist in LEMMA_DISTS:
            for n in (10, 100, 1000):
                table = OrderStatsTable.build(dist, n)
                for j in sorted({1, 2, n // 2, n}):
                    lo = math.exp(harmonic(j - 1) - harmonic(n))
                    mu = table[j]
                    for q in np.geomspace(lo, 1.0, 6):
                        q = float(min(max(q, lo), 1.0))
                        counts["quantiles1"] += 1
                        if not check_quantiles1(dist, n, j, q, mu):
                            failures.append(("quantiles1", dist.spec(), n, j, q))
                        if isinstance(dist, Exponential) and q < 1.0:
                            gap = harmonic(n) - harmonic(j - 1)
                            lhs = float(dist.ppf(1.0 - q))
                            rhs = -math.log(q) / gap * order_stat_mean(dist, n, j)
                            worst_equality = max(worst_equality, abs(lhs - rhs) / abs(lhs))
                for q in (0.0, 1e-3, 0.01, 0.05, 0.1, 0.3):
                    counts["quantiles2"] += 1
                    if not check_quantiles2(dist, n, q, table):
                        failures.append(("quantiles2", dist.spec(), n, q))
                for z, k, alpha in _maximum_params(n):
                    counts["quantile_maximum"] += 1
                    if not check_quantile_maximum(dist, z, k, alpha):
                        failures.append(("quantile_maximum", dist.spec(), z, k, alpha))
                for small in sorted({1, 2, n // 10, n // 2}):
                    counts["babaioff"] += 1
                    if not check_babaioff_ratio(dist, small, n):
                        failures.append(("babaioff", dist.spec(), small, n))
        ok = not failures and worst_equality <= 1e-6
        return ok, {"checked": counts, "failures": failures, "exp_equality_rel_err": worst_equality}

    return _timed("quantile-lemmas", body, scale=scale)


def brute_force_matching(w: np.ndarray) -> float:
    """Best assignment by enumerating injections of the smaller side."""
    n, m = w.shape
    if n <= m:
        return max(math.fsum(w[i, c] for i, c in enumerate(cols)) for cols in itertools.permutations(range(m), n))
    return max(math.fsum(w[r, j] for j, r in enumerate(rows)) for rows in itertools.permutations(range(n), m))


def claim_oracle(scale=1.0, seed=0) -> ClaimResult:
    """Hungarian matching equals brute force, and the assortative formula."""

    def body():
        rng = np.random.default_rng(seed)
        instances = max(50, int(1000 * min(scale, 1.0)))
        bad = 0
        for t in range(instances):
            n, m = rng.integers(1, 7, size=2)
            if t % 2:
                w = rng.integers(0, 20, size=(n, m)).astype(float)  # many ties
            else:
                w = rng.exponential(size=(n, m))
            if max_weight_matching(w).welfare != brute_force_matching(w):
                bad += 1
        sep_bad = 0
        for _ in range(instances):
            n, m = rng.integers(1, 7, size=2)
            alphas = np.sort(rng.random(m))[::-1]
            types = rng.exponential(size=n)
            w = types[:, None] * alphas[None, :]
            if max_weight_matching(w).welfare != separable_optimum(alphas, types):
                sep_bad += 1
        return bad == 0 and sep_bad == 0, {"instances": instances, "mismatches": bad, "separable_mismatches": sep_bad}

    return _timed("oracle-equivalence", body, scale=scale)


def claim_ratio_trends(scale=1.0, seed=0) -> ClaimResult:
    """Ladder ratio grows with n, fits 1/ln n, and beats the best fixed price."""

    def body():
        trials = _trials(10**4, scale)
        ns = [2**k for k in (6, 8, 10, 12, 14)]
        rows = [run_trials(EXP1, make_mechanism("ladder", EXP1, n), trials=trials, master_seed=seed) for n in ns]
        r = [s.ratio for s in rows]
        se = [s.ratio_se for s in rows]
        steps = [(r[i + 1] - r[i]) / math.hypot(se[i], se[i + 1]) for i in range(len(ns) - 1)]
        fit = ratio_trend_fit(ns, r, "one-over-log")
        n = 2**12
        best = exp_static_best(n)
        st = run_trials(EXP1, static_single_price(EXP1, n, best.price), trials=trials, master_seed=seed)
        dyn = rows[ns.index(n)]
        sep = (dyn.ratio - st.ratio) / math.hypot(dyn.ratio_se, st.ratio_se)
        ok = all(s > 3 for s in steps) and fit.c > 0 and fit.r2 >= 0.9 and sep > 3
        return ok, {
            "ratios": r,
            "ratio_se": se,
            "step_z": steps,
            "fit_c": fit.c,
            "fit_r2": fit.r2,
            "static_price": best.price,
            "static_ratio": st.ratio,
            "dynamic_minus_static_z": sep,
        }

    return _timed("ratio-trends", body, limit=120.0, scale=scale)


def claim_welfare_domination(scale=1.0, seed=0) -> ClaimResult:
    """Fixed-point posted prices do at least as well as the quantile rule."""

    def body():
        pool = (Exponential(), Uniform(0, 2), Weibull(2, 1), Exponential(0.5), Weibull(1.5, 2), Uniform(0.5, 1.5))
        rows = []
        ok = True
        for n in (2, 4, 8):
            model = IndependentUnitDemand(tuple(pool[j % len(pool)] for j in range(n)))
            trials = _trials(2 * 10**4, scale)
            pp = run_trials(model, make_mechanism("dyn-ind", model, n), oracle="none", trials=trials, master_seed=seed, keep_trials=True)
            qa = run_trials(model, make_mechanism("quantile", model, n), oracle="none", trials=trials, master_seed=seed, keep_trials=True)
            d = pp.per_trial["sw_pp"] - qa.per_trial["sw_pp"]
            se = float(np.std(d, ddof=1) / math.sqrt(len(d)))
            z = float(np.mean(d)) / se
            ok &= z >= -3
            rows.append({"n": n, "posted": pp.sw_pp_mean, "quantile": qa.sw_pp_mean, "diff_z": z})
        return ok, {"rows": rows}

    return _timed("welfare-domination", body, scale=scale)


def claim_subadditive(scale=1.0, seed=0) -> ClaimResult:
    """Group ladders sell everything; static additive prices rarely leave items unsold."""

    def body():
        model = AdditiveIndependent((Exponential(), Uniform(0, 2), Weibull(2, 1), Exponential(2.0)))
        s1 = run_trials(model, make_mechanism("sub-dyn", model, 100), trials=_trials(10**4, scale), master_seed=seed)
        n = 10**4
        add = AdditiveIndependent((Exponential(), Uniform(0, 1)))
        s2 = run_trials(add, make_mechanism("add-static", add, n), oracle="none", trials=_trials(10**4, scale), master_seed=seed)
        unsold = 1.0 - s2.sale_freq
        se = np.sqrt(unsold * (1 - unsold) / s2.trials)
        limit = 1.0 / math.log(n)
        ok = s1.all_sold == 1.0 and bool(np.all(unsold <= limit + 3 * se))
        return ok, {"group_all_sold": s1.all_sold, "static_unsold": unsold.tolist(), "bound": limit}

    return _timed("subadditive", body, scale=scale)


def claim_fixed_point(scale=1.0, seed=0) -> ClaimResult:
    """Two i.i.d. Exp(1) items with two buyers left: each sells with probability 1/2."""

    def body():
        d = Exponential()
        res = solve_dynamic_prices([d, d], [1.0, 1.0], 2)
        samples = max(10**4, int(10**6 * min(scale, 1.0)))
        rng = np.random.default_rng(seed)
        v = rng.exponential(size=(samples, 2))
        choice = choose_unit_demand(v, res.prices[None, :])
        freq = np.array([(choice == j).mean() for j in range(2)])
        se = math.sqrt(0.25 / samples)
        z = (freq - 0.5) / se
        ok = res.residual <= 1e-6 and bool(np.all(np.abs(z) <= 4))
        return ok, {"prices": res.prices.tolist(), "residual": res.residual, "mc_freq": freq.tolist(), "z": z.tolist()}

    return _timed("fixed-point", body, scale=scale)


CLAIMS = {
    "offline-exp": claim_offline_exp,
    "mdp-recursion": claim_mdp,
    "static-closed-form": claim_static_closed_form,
    "allocation-audit": claim_allocation_audit,
    "quantile-lemmas": claim_quantile_lemmas,
    "oracle-equivalence": claim_oracle,
    "ratio-trends": claim_ratio_trends,
    "welfare-domination": claim_welfare_domination,
    "subadditive": claim_subadditive,
    "fixed-point": claim_fixed_point,
}


def run_claims(names=None, scale: float = 1.0) -> list[ClaimResult]:
    names = list(CLAIMS) if names is None else list(names)
    unknown = [n for n in names if n not in CLAIMS]
    if unknown:
        raise KeyError(f"unknown claims {unknown}; valid: {', '.join(CLAIMS)}")
    return [CLAIMS[n](scale=scale) for n in names]
