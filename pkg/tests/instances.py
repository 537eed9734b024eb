"""Shared small instances for the test-suite."""

import numpy as np

from summex.dataset import BinaryDataset, FeatureFunction, RawDataset, BinarizeScheme, apply_features, binarize
from summex.explanation import target_context

WORKED_ROWS = [(1, 1, 1), (1, 1, 0), (1, 0, 1), (1, 0, 0), (0, 1, 1), (0, 0, 1)]
WORKED_LABELS = [1, 1, 1, 0, 0, 0]


def worked_dataset() -> BinaryDataset:
    """Six rows, three features on distinct columns; the target is row 0."""
    raw = RawDataset(
        columns=("c1", "c2", "c3"),
        rows=tuple(tuple(float(v) for v in r) for r in WORKED_ROWS),
        outcome=np.array(WORKED_LABELS),
    )
    feats = [FeatureFunction(j, ">=", 1.0, f"c{j + 1}") for j in range(3)]
    return apply_features(raw, feats)


def random_instance(rng, n_obs=None, max_pe=15, n_cols=None, k=None, noise=None):
    """Random binarized dataset plus a target whose |P^e| <= max_pe."""
    n_obs = n_obs or int(rng.integers(8, 61))
    n_cols = n_cols or int(rng.integers(2, 5))
    k = k or int(rng.integers(1, 4))
    X = rng.integers(0, 10, size=(n_obs, n_cols)).astype(float)
    w = rng.normal(size=n_cols)
    score = (X - 4.5) @ w
    flip = rng.random(n_obs) < (rng.uniform(0, 0.3) if noise is None else noise)
    y = ((score > 0) ^ flip).astype(np.uint8)
    raw = RawDataset(
        columns=tuple(f"x{j}" for j in range(n_cols)),
        rows=tuple(tuple(r) for r in X),
        outcome=y,
    )
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = binarize(raw, BinarizeScheme(k=k))
    order = rng.permutation(n_obs)
    for e in order:
        ctx = target_context(ds, int(e))
        if len(ctx.satisfied) <= max_pe:
            return ds, ctx
    ctx = target_context(ds, int(order[0]))
    keep = list(ctx.satisfied[:max_pe])
    ds = ds.subset(features=keep)
    return ds, target_context(ds, int(order[0]))
