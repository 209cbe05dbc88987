# %% [markdown]
# # One item, Exp(1) buyers
#
# With one item and i.i.d. Exp(1) values the offline optimum is E[max] = H_n,
# so every rule can be scored in closed form or by simulation. This script
# compares the quantile ladder, the backward-induction thresholds and the
# best single fixed price as n grows.
#
# Run with `python notebooks/01_single_item_exponential.py`.

# %%
import math

import numpy as np

from ppm_lab import make_mechanism, parse_model, ratio_trend_fit, run_trials, static_single_price
from ppm_lab._numeric import harmonic
from ppm_lab.bounds import exp_static_best, mdp_values

MODEL = parse_model("independent: [exp(1)]")
TRIALS = 4000

# %% [markdown]
# ## Thresholds of the optimal dynamic policy
#
# With k buyers to go the continuation value follows p <- p + e^-p from 0.
# It stays below H_k - 1/8 from k = 2 on, and the gap to H_k keeps growing.

# %%
vals = mdp_values(1 << 14)
for k in (1, 2, 4, 16, 256, 1 << 14):
    print(f"k={k:6d}  p={vals[k]:.6f}  H_k={harmonic(k):.6f}  H_k - p={harmonic(k) - vals[k]:.4f}")

# %% [markdown]
# ## Ladder, MDP and best fixed price
#
# All three runs share the same buyer profiles (common random numbers), so
# their differences are much less noisy than their separate standard errors.

# %%
rows = []
for n in (2**6, 2**8, 2**10, 2**12):
    ladder = run_trials(MODEL, make_mechanism("ladder", MODEL, n), trials=TRIALS, master_seed=1)
    mdp = run_trials(MODEL, make_mechanism("mdp", MODEL, n), trials=TRIALS, master_seed=1)
    best = exp_static_best(n)
    static = run_trials(MODEL, static_single_price(MODEL, n, best.price), trials=TRIALS, master_seed=1)
    rows.append((n, ladder.ratio, mdp.ratio, static.ratio, best.welfare / harmonic(n)))
    print(
        f"n={n:5d}  ladder={ladder.ratio:.4f}±{ladder.ratio_se:.4f}  mdp={mdp.ratio:.4f}  "
        f"static sim={static.ratio:.4f} exact={best.welfare / harmonic(n):.4f}"
    )

# %% [markdown]
# ## How fast does the ladder approach the optimum?
#
# A fit of ratio ~ a - c / ln n summarises the trend. The constant is a
# desk-scale description only; it is not an estimate of an asymptotic constant.

# %%
ns = np.array([r[0] for r in rows], dtype=float)
fit = ratio_trend_fit(ns, [r[1] for r in rows])
print(f"a={fit.intercept:.4f}  c={fit.c:.4f}  R^2={fit.r2:.4f}")
print("static gap H_n - best fixed-price welfare:")
for n in (10**2, 10**4, 10**6, 10**9):
    b = exp_static_best(n)
    print(f"  n=1e{int(math.log10(n))}: p*={b.price:.4f}  gap={b.gap:.4f}")
