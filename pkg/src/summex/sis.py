"""Simplified increased support (SIS) scores and feature sampling weights.

The SIS of a feature is the number of target-consistent rows it covers minus
the number of inconsistent rows it covers. Computed on the local data it is
``local_sis``; computed from label-conditioned counts on the global data it
is ``global_sis`` and carries prior information the local sample lacks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import BinaryDataset
from .explanation import TargetContext

__all__ = [
    "SisTable",
    "GlobalCounts",
    "DualAssignment",
    "increased_support",
    "local_sis",
    "global_counts",
    "global_sis",
    "sampling_weights",
    "DEFAULT_SCALE",
]

DEFAULT_SCALE = 5.0


@dataclass(frozen=True)
class SisTable:
    features: tuple[int, ...]
    scores: tuple[int, ...]
    provenance: str = "local"

    def __len__(self):
        return len(self.features)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.features, self.scores))

    def order(self) -> list[int]:
        """Features by descending score, ties by index."""
        return [p for _, p in sorted(zip(self.scores, self.features), key=lambda t: (-t[0], t[1]))]


@dataclass(frozen=True)
class DualAssignment:
    """Nonnegative multipliers: ``mu`` for the inconsistent rows (ascending
    index), ``lam`` for the consistent rows (ascending), ``gamma`` for the
    complexity budget."""

    mu: np.ndarray
    lam: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.mu) < 0) or np.any(np.asarray(self.lam) < 0) or self.gamma < 0:
            raise ValueError("dual variables must be nonnegative")

    @classmethod
    def zeros(cls, ctx: TargetContext, n_obs: int) -> DualAssignment:
        return cls(np.zeros(n_obs - ctx.n_consistent), np.zeros(ctx.n_consistent), 0.0)


def _inconsistent(ctx: TargetContext, n_obs: int) -> np.ndarray:
    return np.flatnonzero(~ctx.indicator(n_obs))


def local_sis(ctx: TargetContext, dataset: BinaryDataset) -> SisTable:
    feats = list(ctx.satisfied)
    a = ctx.indicator(dataset.n_obs)
    sub = dataset.delta[:, feats].astype(np.int64)
    scores = sub[a].sum(axis=0) - sub[~a].sum(axis=0)
    return SisTable(tuple(feats), tuple(int(s) for s in scores), "local")


def increased_support(p: int, duals: DualAssignment, ctx: TargetContext, dataset: BinaryDataset) -> float:
    """Lagrangian increased support of feature ``p``.

    The dual-weighted terms (multipliers times the rows ``p`` fails on, minus
    ``gamma``) are added to the dual-free part, which is exactly ``s_p``; with
    all multipliers zero the result is the SIS itself.
    """
    if p not in ctx.satisfied:
        raise ValueError(f"feature {p} is not satisfied by the target")
    col = dataset.delta[:, p]
    neg = _inconsistent(ctx, dataset.n_obs)
    pos = np.asarray(ctx.consistent)
    mu, lam = np.asarray(duals.mu, dtype=float), np.asarray(duals.lam, dtype=float)
    if mu.shape != neg.shape or lam.shape != pos.shape:
        raise ValueError("dual vectors do not match the inconsistent / consistent row counts")
    base = int(col[pos].sum()) - int(col[neg].sum())
    fails_neg = ~col[neg]
    fails_pos = ~col[pos]
    return base + float(mu @ fails_neg) - float(lam @ fails_pos) - duals.gamma


@dataclass(frozen=True)
class GlobalCounts:
    """``counts[p, y]``: rows of the global data with label ``y`` satisfying ``p``."""

    counts: np.ndarray
    feature_hash: str
    n_rows: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1, 2)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def _checksum(self) -> str:
        blob = json.dumps([self.feature_hash, self.n_rows, self.counts.tolist()], separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def save(self, path) -> None:
        doc = {
            "feature_hash": self.feature_hash,
            "n_rows": self.n_rows,
            "counts": self.counts.tolist(),
            "checksum": self._checksum(),
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path, expected_hash: str | None = None) -> GlobalCounts:
        doc = json.loads(Path(path).read_text())
        gc = cls(np.array(doc["counts"]), doc["feature_hash"], int(doc["n_rows"]))
        if doc.get("checksum") != gc._checksum():
            raise ValueError(f"{path}: checksum mismatch, sidecar was modified")
        if expected_hash is not None and gc.feature_hash != expected_hash:
            raise ValueError(f"{path}: counts were computed for a different feature list")
        return gc


def global_counts(global_: BinaryDataset) -> GlobalCounts:
    delta = global_.delta.astype(np.int64)
    y1 = global_.labels == 1
    counts = np.stack([delta[~y1].sum(axis=0), delta[y1].sum(axis=0)], axis=1)
    return GlobalCounts(counts, global_.feature_hash, global_.n_obs)


def global_sis(counts: GlobalCounts, label: int, satisfied: Sequence[int]) -> SisTable:
    feats = tuple(int(p) for p in satisfied)
    c = counts.counts
    scores = tuple(int(c[p, label] - c[p, 1 - label]) for p in feats)
    return SisTable(feats, scores, "global")


def sampling_weights(table: SisTable, scale: float = DEFAULT_SCALE) -> np.ndarray:
    """Softmax of ``scale * s / max(s)`` over the table's features.

    When no score is positive the scores are first shifted so the smallest
    becomes 1, which keeps their order and a positive maximum.
    """
    if scale <= 0:
        raise ValueError("softmax scale must be positive")
    if len(table) == 0:
        raise ValueError("empty SIS table")
    s = np.asarray(table.scores, dtype=float)
    if s.max() <= 0:
        s = s + (1.0 - s.min())
    z = scale * s / s.max()
    z -= z.max()
    # floor keeps every feature drawable when exp underflows
    w = np.maximum(np.exp(z), np.finfo(float).tiny)
    return w / w.sum()
