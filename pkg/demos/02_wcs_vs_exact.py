"""
Sampling versus exact search
============================

On a 10k-row synthetic dataset with planted rules and 12% label noise we
draw a local sample of 1000 rows and explain one prediction three ways:
exact MSqC, weighted column sampling (WCS) and uniform sampling (RCS).
"""

import time

from summex.dataset import BinarizeScheme, SyntheticSpec, binarize, default_rules, sample_local, synthesize
from summex.explanation import render, summarize, target_context
from summex.sis import global_counts
from summex.solver import Mode, SolveSpec, solve
from summex.wcs import WcsConfig, run_wcs

D = binarize(synthesize(SyntheticSpec(10000, 10, default_rules(), noise=0.12), seed=1), BinarizeScheme(k=9))
N = sample_local(D, 1000, seed=3)
ctx = target_context(N, 42)
print(f"|D| = {D.n_obs}, |N| = {N.n_obs}, |P| = {D.n_features}, |P^e| = {len(ctx.satisfied)}")

# global label-conditioned counts are computed once and reused for every request
counts = global_counts(D)

t0 = time.perf_counter()
exact = solve(N, ctx, SolveSpec(Mode.MSQC, q=0.85, dominance=True, time_limit=60))
print(f"MSqC  support {exact.objective:4d}  {exact.status.value}  {time.perf_counter() - t0:.2f}s")

for name, weighting in (("WCS", "global"), ("RCS", "uniform")):
    t0 = time.perf_counter()
    out, expl = run_wcs(WcsConfig(q=0.85, weighting=weighting, seed=7), N, ctx, counts)
    print(f"{name}   support {expl.support:4d}  c_N {expl.consistency:.3f}  {time.perf_counter() - t0:.2f}s")

# the chosen WCS clause, checked on the local sample and on all of D
out, expl = run_wcs(WcsConfig(q=0.85, weighting="global", seed=7), N, ctx, counts)
print(render(expl, N.features, "q"))
print(render(summarize(out.chosen.clause, ctx.label, D, "global"), D.features, "q"))
