"""Exact branch-and-bound for the MC, MS and MSqC clause models.

All three models pick a clause from the target's satisfied features P^e:

* MC   -- fewest conditions such that every inconsistent row fails one of them;
* MS   -- at most ``max_complexity`` conditions, no inconsistent row matched,
          as many consistent rows matched as possible;
* MSqC -- at most ``max_complexity`` conditions, consistency level >= q,
          as many rows matched as possible.

Rows and features are handled as Python int bitsets, so the support of a
partial clause is a chain of ``&`` and its size one ``bit_count``. Ties between
equal objectives go to the shorter clause, then the lexicographically smallest
sorted index tuple.

MC and MS branch on the features that exclude one still-matched inconsistent
row (each branch forbids the features tried by its elder siblings, so every
set is visited once). MSqC extends clauses in a fixed feature order and only
with features that exclude at least one matched inconsistent row: a feature
that excludes none can be dropped without losing support or consistency.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dataset import BinaryDataset, FeatureFunction
from .explanation import Clause, TargetContext
from .sis import local_sis

__all__ = [
    "Mode",
    "Status",
    "SolveSpec",
    "SolveResult",
    "solve",
    "brute_force",
    "dominance_groups",
    "meets_q",
]

_CHECK_EVERY = 4096
_PACKING_SAMPLE = 32


class Mode(str, Enum):
    MC = "MC"
    MS = "MS"
    MSQC = "MSqC"

    @classmethod
    def parse(cls, s) -> Mode:
        if isinstance(s, Mode):
            return s
        for m in cls:
            if m.value.lower() == str(s).lower():
                return m
        raise ValueError(f"unknown mode {s!r}")


class Status(str, Enum):
    OPTIMAL = "Optimal"
    TIME_LIMIT = "TimeLimitBestKnown"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolveSpec:
    mode: Mode = Mode.MS
    q: float = 1.0
    max_complexity: int = 4
    time_limit: float | None = None
    dominance: bool = False
    mc_warm_start: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.max_complexity < 1:
            raise ValueError("max_complexity must be >= 1")
        if not 0 < self.q <= 1:
            raise ValueError("q must lie in (0, 1]")


@dataclass
class SolveResult:
    """``clause`` is None when no feasible clause is known."""

    clause: Clause | None
    objective: int
    status: Status
    nodes: int = 0
    wall_time: float = 0.0
    mode: Mode = Mode.MS

    @property
    def found(self) -> bool:
        return self.clause is not None

    def to_dict(self) -> dict:
        return {
            "clause": None if self.clause is None else list(self.clause),
            "objective": self.objective,
            "status": self.status.value,
            "nodes": self.nodes,
            "wall_time": self.wall_time,
            "mode": self.mode.value,
        }

    @classmethod
    def from_dict(cls, d) -> SolveResult:
        return cls(
            clause=None if d["clause"] is None else tuple(d["clause"]),
            objective=d["objective"],
            status=Status(d["status"]),
            nodes=d["nodes"],
            wall_time=d["wall_time"],
            mode=Mode.parse(d["mode"]),
        )


def q_fraction(q: float) -> Fraction:
    return Fraction(q).limit_denominator(10**6)


def meets_q(consistent: int, support: int, q) -> bool:
    """Exact test of ``consistent / support >= q`` (an empty support passes)."""
    qf = q if isinstance(q, Fraction) else q_fraction(q)
    return consistent * qf.denominator >= qf.numerator * support


def dominance_groups(features: Sequence[FeatureFunction]) -> list[list[int]]:
    """Features on the same raw column with the same operator.

    Thresholds of one direction on one column are nested, so a clause never
    needs two of them; categorical ``=`` features on one column are mutually
    exclusive. Groups come out in order of their first member.
    """
    groups: dict[tuple, list[int]] = {}
    for p, f in enumerate(features):
        groups.setdefault((f.column, f.op), []).append(p)
    return list(groups.values())


class _Timeout(Exception):
    pass


def _iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass
class _Best:
    objective: int = -1
    length: int = 0
    clause: Clause | None = None

    def offer(self, objective: int, clause: Clause) -> None:
        if self.clause is None or objective > self.objective or (
            objective == self.objective
            and (len(clause) < self.length or (len(clause) == self.length and clause < self.clause))
        ):
            self.objective, self.length, self.clause = objective, len(clause), clause

    def hopeless(self, bound: int, min_len: int) -> bool:
        """True if no clause of length >= min_len with objective <= bound can win."""
        if self.clause is None:
            return False
        return bound < self.objective or (bound == self.objective and min_len > self.length)


class _Search:
    def __init__(self, dataset: BinaryDataset, ctx: TargetContext, spec: SolveSpec, trace=None):
        self.spec = spec
        self.ctx = ctx
        self.trace = trace
        self.nodes = 0
        self.deadline = None if spec.time_limit is None else time.perf_counter() + spec.time_limit
        table = local_sis(ctx, dataset)
        self.feats = table.order()  # local index k -> global feature index
        cols = dataset.column_bits
        self.col = [cols[p] for p in self.feats]
        self.full = (1 << dataset.n_obs) - 1
        self.pos = dataset.label_bits[ctx.label]
        self.neg = dataset.label_bits[1 - ctx.label]
        K = len(self.feats)
        self.all_feats = (1 << K) - 1
        self.mates = [0] * K
        if spec.dominance:
            local = {p: k for k, p in enumerate(self.feats)}
            for g in dominance_groups(dataset.features):
                ks = [local[p] for p in g if p in local]
                m = sum(1 << k for k in ks)
                for k in ks:
                    self.mates[k] = m & ~(1 << k)
        self.q = q_fraction(spec.q)
        self.best = _Best()
        self.fallback = None
        self._excl = None
        self._dataset = dataset

    # -- helpers ----------------------------------------------------------

    def tick(self):
        self.nodes += 1
        if self.deadline is not None and self.nodes % _CHECK_EVERY == 0:
            if time.perf_counter() > self.deadline:
                raise _Timeout

    def global_clause(self, chosen) -> Clause:
        return tuple(sorted(self.feats[k] for k in chosen))

    @property
    def excl(self) -> dict[int, int]:
        """Row index (inconsistent rows only) -> bitmask of local features it fails."""
        if self._excl is None:
            rows = np.array(list(_iter_bits(self.neg)), dtype=np.int64)
            out = {}
            if rows.size and self.feats:
                fails = ~self._dataset.delta[np.ix_(rows, self.feats)]
                packed = np.packbits(fails, axis=1, bitorder="little")
                for r, b in zip(rows.tolist(), packed):
                    out[r] = int.from_bytes(b.tobytes(), "little")
            else:
                out = {int(r): 0 for r in rows}
            self._excl = out
        return self._excl

    def _branch_row(self, neg_m: int, allowed: int):
        """Pick the matched inconsistent row with the fewest allowed excluders
        among a sample, and a packing lower bound on features still needed."""
        excl = self.excl
        best_u, best_ex, best_cnt = -1, 0, None
        covered, lb, seen = 0, 0, 0
        m = neg_m
        while m and seen < _PACKING_SAMPLE:
            low = m & -m
            m ^= low
            seen += 1
            ex = excl[low.bit_length() - 1] & allowed
            if ex == 0:
                return -1, 0, 10**9
            if ex & covered == 0:
                covered |= ex
                lb += 1
            c = ex.bit_count()
            if best_cnt is None or c < best_cnt:
                best_u, best_ex, best_cnt = low.bit_length() - 1, ex, c
        return best_u, best_ex, lb

    # -- MS / MC: hitting-set branching -------------------------------------

    def _cover(self, chosen: list, matched: int, allowed: int, budget: int, objective_fn):
        self.tick()
        neg_m = matched & self.neg
        depth = len(chosen)
        if objective_fn is not None:
            bound = (matched & self.pos).bit_count()
            if self.trace is not None:
                self.trace(self.global_clause(chosen), bound)
        if neg_m == 0:
            clause = self.global_clause(chosen)
            self.best.offer(objective_fn(matched, clause) if objective_fn else -len(clause), clause)
            return
        if depth >= budget:
            return
        if objective_fn is not None and self.best.hopeless(bound, depth + 1):
            return
        _, cand, lb = self._branch_row(neg_m, allowed)
        if depth + lb > budget:
            return
        rest = allowed
        if depth + 1 == budget:
            # last condition must exclude every matched inconsistent row
            for k in _iter_bits(cand):
                self.tick()
                if self.col[k] & neg_m == 0:
                    child = matched & self.col[k]
                    clause = self.global_clause(chosen + [k])
                    if self.trace is not None and objective_fn is not None:
                        self.trace(clause, (child & self.pos).bit_count())
                    self.best.offer(objective_fn(child, clause) if objective_fn else -len(clause), clause)
            return
        for k in _iter_bits(cand):
            bit = 1 << k
            self._cover(chosen + [k], matched & self.col[k], (rest & ~bit) & ~self.mates[k], budget, objective_fn)
            rest &= ~bit

    def _ms_objective(self, matched: int, clause) -> int:
        return (matched & self.pos).bit_count()

    def run_ms(self):
        if self.spec.mc_warm_start:
            mc = _Search(self._dataset, self.ctx, SolveSpec(Mode.MC, dominance=self.spec.dominance), None)
            mc.deadline = self.deadline
            mc.run_mc()
            self.nodes += mc.nodes
            if mc.best.clause is not None and len(mc.best.clause) <= self.spec.max_complexity:
                bits = self.full
                cols = self._dataset.column_bits
                for p in mc.best.clause:
                    bits &= cols[p]
                self.best.offer((bits & self.pos).bit_count(), mc.best.clause)
        self._cover([], self.full, self.all_feats, self.spec.max_complexity, self._ms_objective)

    def _greedy_cover(self) -> Clause | None:
        neg_m, chosen, remaining = self.neg, [], list(range(len(self.feats)))
        while neg_m:
            k = max(remaining, key=lambda k: ((neg_m & ~self.col[k]).bit_count(), -k), default=None)
            if k is None or neg_m & ~self.col[k] == 0:
                return None
            chosen.append(k)
            remaining.remove(k)
            neg_m &= self.col[k]
        return self.global_clause(chosen)

    def run_mc(self):
        if self.neg == 0:
            self.best.offer(0, ())
            return
        greedy = self._greedy_cover()
        if greedy is None:
            return  # an inconsistent row satisfies every feature of P^e
        self.fallback = greedy
        _, _, lb = self._branch_row(self.neg, self.all_feats)
        for budget in range(max(lb, 1), len(greedy) + 1):
            self._cover([], self.full, self.all_feats, budget, None)
            if self.best.clause is not None:
                return
        self.best.offer(-len(greedy), greedy)

    # -- MSqC: ordered extension ---------------------------------------------

    def _qnode(self, chosen: list, last: int, matched: int, allowed: int):
        self.tick()
        pos_m = matched & self.pos
        neg_m = matched & self.neg
        p, n = pos_m.bit_count(), neg_m.bit_count()
        q = self.q
        # consistent rows p' <= p, inconsistent n' <= min(n, p'(1-q)/q)
        bound = p + min(n, (p * (q.denominator - q.numerator)) // q.numerator)
        if self.trace is not None:
            self.trace(self.global_clause(chosen), bound)
        if meets_q(p, p + n, q):
            self.best.offer(p + n, self.global_clause(chosen))
        depth = len(chosen)
        if n == 0 or depth >= self.spec.max_complexity or self.best.hopeless(bound, depth + 1):
            return
        for k in _iter_bits(allowed >> (last + 1) << (last + 1)):
            c = self.col[k]
            if neg_m & ~c == 0:
                continue
            self._qnode(chosen + [k], k, matched & c, allowed & ~self.mates[k])

    def run_msqc(self):
        self._qnode([], -1, self.full, self.all_feats)


def solve(dataset: BinaryDataset, ctx: TargetContext, spec: SolveSpec, trace: Callable | None = None) -> SolveResult:
    """Solve one model exactly (or to the time limit).

    ``trace(clause, bound)``, if given, is called at every search node with the
    node's clause and the upper bound it claims for every extension of it
    (MS and MSqC only).
    """
    t0 = time.perf_counter()
    search = _Search(dataset, ctx, spec, trace)
    run = {Mode.MC: search.run_mc, Mode.MS: search.run_ms, Mode.MSQC: search.run_msqc}[spec.mode]
    timed_out = False
    try:
        run()
    except _Timeout:
        timed_out = True
    best = search.best
    if spec.mode is Mode.MC and best.clause is None and timed_out:
        if search.fallback is not None:
            best.offer(-len(search.fallback), search.fallback)
    elapsed = time.perf_counter() - t0
    if best.clause is None:
        status = Status.TIME_LIMIT if timed_out else Status.INFEASIBLE
        return SolveResult(None, 0, status, search.nodes, elapsed, spec.mode)
    objective = len(best.clause) if spec.mode is Mode.MC else best.objective
    status = Status.TIME_LIMIT if timed_out else Status.OPTIMAL
    return SolveResult(best.clause, objective, status, search.nodes, elapsed, spec.mode)


# --------------------------------------------------------------------------
# Enumeration oracle
# --------------------------------------------------------------------------

BRUTE_MAX_FEATURES = 25
BRUTE_MAX_COMPLEXITY = 4


def brute_force(dataset: BinaryDataset, ctx: TargetContext, spec: SolveSpec) -> SolveResult:
    """Enumerate every clause over P^e and keep the best one.

    MS and MSqC enumerate sizes up to ``max_complexity``; MC has no complexity
    cap and scans sizes upward until one is feasible.
    """
    P = list(ctx.satisfied)
    if len(P) > BRUTE_MAX_FEATURES:
        raise ValueError(f"|P^e| = {len(P)} exceeds the enumeration guard of {BRUTE_MAX_FEATURES}")
    if spec.mode is not Mode.MC and spec.max_complexity > BRUTE_MAX_COMPLEXITY:
        raise ValueError(f"max_complexity {spec.max_complexity} exceeds the guard of {BRUTE_MAX_COMPLEXITY}")
    t0 = time.perf_counter()
    consistent = dataset.labels == ctx.label
    sizes = range(len(P) + 1) if spec.mode is Mode.MC else range(spec.max_complexity + 1)
    best_key, best_clause, count = None, None, 0
    for size in sizes:
        for combo in itertools.combinations(P, size):
            count += 1
            match = dataset.delta[:, list(combo)].all(axis=1) if combo else np.ones(dataset.n_obs, bool)
            good = int(np.count_nonzero(match & consistent))
            bad = int(np.count_nonzero(match & ~consistent))
            if spec.mode is Mode.MSQC:
                if not meets_q(good, good + bad, spec.q):
                    continue
                obj = good + bad
            else:
                if bad:
                    continue
                obj = -size if spec.mode is Mode.MC else good
            key = (-obj, size, combo)
            if best_key is None or key < best_key:
                best_key, best_clause = key, combo
        if spec.mode is Mode.MC and best_clause is not None:
            break
    elapsed = time.perf_counter() - t0
    if best_clause is None:
        return SolveResult(None, 0, Status.INFEASIBLE, count, elapsed, spec.mode)
    obj = len(best_clause) if spec.mode is Mode.MC else -best_key[0]
    return SolveResult(tuple(best_clause), obj, Status.OPTIMAL, count, elapsed, spec.mode)
