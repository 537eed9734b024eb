"""
Three models on a six-row dataset
=================================

Six observations, three binary features, and a target (row 0) that
satisfies all three. We ask each model for an explanation of its label.
"""

import numpy as np

from summex.dataset import FeatureFunction, RawDataset, apply_features
from summex.explanation import render, summarize, target_context
from summex.solver import Mode, SolveSpec, solve

# rows 0-2 carry label 1, rows 3-5 label 0
rows = [(1, 1, 1), (1, 1, 0), (1, 0, 1), (1, 0, 0), (0, 1, 1), (0, 0, 1)]
raw = RawDataset(("c1", "c2", "c3"), tuple(tuple(map(float, r)) for r in rows), np.array([1, 1, 1, 0, 0, 0]))
ds = apply_features(raw, [FeatureFunction(j, ">=", 1.0, f"c{j + 1}") for j in range(3)])
ctx = target_context(ds, 0)
print("P^e =", ctx.satisfied, " N^e =", ctx.consistent.tolist())

# MC: the fewest conditions that rule out every row with the other label
mc = solve(ds, ctx, SolveSpec(Mode.MC))
print("MC  ", mc.clause, "complexity", mc.objective)

# MS: at most four conditions, no contradicting row, as many agreeing rows as possible
ms = solve(ds, ctx, SolveSpec(Mode.MS, max_complexity=4))
print("MS  ", ms.clause, "support", ms.objective)

# MSqC: allow up to 30% contradicting rows in exchange for a larger support
qc = solve(ds, ctx, SolveSpec(Mode.MSQC, q=0.7, max_complexity=4))
expl = summarize(qc.clause, ctx.label, ds)
print("MSqC", qc.clause, "support", qc.objective, "consistency", expl.consistency)

outcomes = {0: "be rejected", 1: "be approved"}
print(render(summarize(ms.clause, ctx.label, ds), ds.features, "exact", outcomes))
print(render(expl, ds.features, "q", outcomes))
