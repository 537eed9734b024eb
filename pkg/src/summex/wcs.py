"""Weighted column sampling (WCS): many small MS problems, merged for MSqC.

Each subproblem keeps a uniform sample of rows (always including the target)
and a weighted sample of the target's features. The subproblems are solved
exactly as MS models; every resulting clause is then scored on the full local
data and the largest-support clause meeting the consistency level ``q`` wins.
With ``weighting="uniform"`` this is random column sampling (RCS).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dataset import BinaryDataset
from .explanation import Clause, SummaryExplanation, TargetContext, summarize, support_bits, target_context
from .sis import DEFAULT_SCALE, GlobalCounts, global_sis, local_sis, sampling_weights
from .solver import Mode, SolveResult, SolveSpec, Status, meets_q, q_fraction, solve

__all__ = [
    "WcsConfig",
    "Subproblem",
    "Candidate",
    "WcsOutcome",
    "NoCandidatesError",
    "build_subproblems",
    "solve_subproblems",
    "merge",
    "feature_weights",
    "run_wcs",
]

WEIGHTINGS = ("local", "global", "uniform")


class NoCandidatesError(ValueError):
    """Every subproblem was infeasible, so there is nothing to merge."""


@dataclass(frozen=True)
class WcsConfig:
    m: int = 40
    n_wcs: int = 100
    rho: float = 0.25
    scale: float = DEFAULT_SCALE
    q: float = 0.85
    max_complexity: int = 4
    weighting: str = "local"
    seed: int | None = None
    time_limit: float | None = None
    dominance: bool = True

    def __post_init__(self):
        if self.m < 1 or self.n_wcs < 1:
            raise ValueError("need m >= 1 and n_wcs >= 1")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie strictly between 0 and 1")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if not 0 < self.q <= 1:
            raise ValueError("q must lie in (0, 1]")


@dataclass(frozen=True)
class Subproblem:
    rows: tuple[int, ...]
    features: tuple[int, ...]


@dataclass(frozen=True)
class Candidate:
    """One subproblem's clause scored on the full local data."""

    index: int
    clause: Clause
    sub_objective: int
    status: str
    support: int
    consistent: int

    @property
    def consistency(self) -> float:
        return 1.0 if self.support == 0 else self.consistent / self.support


@dataclass
class WcsOutcome:
    chosen: SolveResult
    q_feasible: bool
    candidates: list[Candidate] = field(default_factory=list)
    n_subproblems: int = 0

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen.to_dict(),
            "q_feasible": self.q_feasible,
            "n_subproblems": self.n_subproblems,
            "candidates": [
                {**asdict(c), "clause": list(c.clause), "consistency": c.consistency} for c in self.candidates
            ],
        }


def feature_budget(rho: float, n_features: int) -> int:
    return int(np.floor(rho * n_features + 0.5))


def build_subproblems(config: WcsConfig, ctx: TargetContext, dataset: BinaryDataset, weights) -> list[Subproblem]:
    """Draw ``config.m`` subproblems from one seeded generator, in order.

    Features are drawn without replacement with probabilities ``weights``
    (aligned with ``ctx.satisfied``); rows uniformly without replacement, the
    target always kept.
    """
    P = np.asarray(ctx.satisfied, dtype=np.int64)
    k = feature_budget(config.rho, len(P))
    if k == 0:
        raise ValueError(f"feature budget round({config.rho} * {len(P)}) is zero")
    w = np.asarray(weights, dtype=float)
    if w.shape != P.shape or np.any(w <= 0) or abs(w.sum() - 1) > 1e-9:
        raise ValueError("weights must be positive, sum to 1 and match P^e")
    n_rows = min(config.n_wcs, dataset.n_obs)
    others = np.delete(np.arange(dataset.n_obs), ctx.e)
    rng = np.random.default_rng(config.seed)
    subs = []
    for _ in range(config.m):
        feats = np.sort(rng.choice(P, size=k, replace=False, p=w))
        rows = np.sort(np.append(rng.choice(others, size=n_rows - 1, replace=False), ctx.e))
        subs.append(Subproblem(tuple(int(r) for r in rows), tuple(int(p) for p in feats)))
    return subs


def _solve_one(args) -> SolveResult:
    dataset, e, sub, spec = args
    local = dataset.subset(rows=sub.rows, features=sub.features)
    ctx = target_context(local, sub.rows.index(e))
    res = solve(local, ctx, spec)
    if res.clause is not None:
        res.clause = tuple(sorted(sub.features[p] for p in res.clause))
    return res


def solve_subproblems(
    subproblems: Sequence[Subproblem],
    dataset: BinaryDataset,
    ctx: TargetContext,
    spec: SolveSpec,
    workers: int = 1,
) -> list[SolveResult]:
    """Solve each subproblem as an MS model; clauses come back in the
    indices of ``dataset``. Output order follows input order."""
    spec = SolveSpec(
        Mode.MS,
        max_complexity=spec.max_complexity,
        time_limit=spec.time_limit,
        dominance=spec.dominance,
        mc_warm_start=spec.mc_warm_start,
    )
    jobs = [(dataset, ctx.e, s, spec) for s in subproblems]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_one, jobs))
    return [_solve_one(j) for j in jobs]


def merge(results: Sequence[SolveResult], dataset: BinaryDataset, ctx: TargetContext, q: float) -> WcsOutcome:
    """Pick the largest-support q-consistent clause on the full data.

    If none reaches ``q`` the most consistent clause is returned instead and
    flagged infeasible.
    """
    if not results:
        raise ValueError("no subproblem results to merge")
    scored: dict[Clause, tuple[int, int]] = {}
    cands = []
    pos = dataset.label_bits[ctx.label]
    for i, r in enumerate(results):
        if r.clause is None:
            continue
        if r.clause not in scored:
            bits = support_bits(r.clause, dataset)
            scored[r.clause] = (bits.bit_count(), (bits & pos).bit_count())
        sup, good = scored[r.clause]
        cands.append(Candidate(i, r.clause, r.objective, r.status.value, sup, good))
    if not cands:
        raise NoCandidatesError("every subproblem was infeasible")
    qf = q_fraction(q)
    feasible = [c for c in cands if meets_q(c.consistent, c.support, qf)]
    if feasible:
        best = min(feasible, key=lambda c: (-c.support, len(c.clause), c.clause))
    else:
        best = min(
            cands,
            key=lambda c: (-Fraction(c.consistent, max(c.support, 1)), -c.support, len(c.clause), c.clause),
        )
    chosen = SolveResult(
        clause=best.clause,
        objective=best.support,
        status=Status(best.status),
        nodes=sum(r.nodes for r in results),
        wall_time=sum(r.wall_time for r in results),
        mode=Mode.MSQC,
    )
    return WcsOutcome(chosen, bool(feasible), cands, len(results))


def feature_weights(
    config: WcsConfig, dataset: BinaryDataset, ctx: TargetContext, counts: GlobalCounts | None = None
) -> np.ndarray:
    if config.weighting == "uniform":
        return np.full(len(ctx.satisfied), 1.0 / len(ctx.satisfied))
    if config.weighting == "global":
        if counts is None:
            raise ValueError("global weighting needs precomputed global counts")
        if counts.feature_hash != dataset.feature_hash:
            raise ValueError("global counts were computed for a different feature list")
        table = global_sis(counts, ctx.label, ctx.satisfied)
    else:
        table = local_sis(ctx, dataset)
    return sampling_weights(table, config.scale)


def default_workers() -> int:
    return max(1, int(os.environ.get("SUMMEX_WORKERS", "1")))


def run_wcs(
    config: WcsConfig,
    dataset: BinaryDataset,
    ctx: TargetContext,
    counts: GlobalCounts | None = None,
    workers: int | None = None,
) -> tuple[WcsOutcome, SummaryExplanation]:
    """Weights, subproblems, exact MS solves, merge. Returns the outcome and
    the chosen clause's explanation on ``dataset``."""
    t0 = time.perf_counter()
    weights = feature_weights(config, dataset, ctx, counts)
    subs = build_subproblems(config, ctx, dataset, weights)
    spec = SolveSpec(
        Mode.MS, max_complexity=config.max_complexity, time_limit=config.time_limit, dominance=config.dominance
    )
    results = solve_subproblems(subs, dataset, ctx, spec, workers or default_workers())
    outcome = merge(results, dataset, ctx, config.q)
    outcome.chosen.wall_time = time.perf_counter() - t0
    return outcome, summarize(outcome.chosen.clause, ctx.label, dataset, "local")
