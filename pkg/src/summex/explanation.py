"""Clauses, target contexts and the three quality metrics of an explanation.

A clause is a conjunction of binary features, stored as a sorted tuple of
feature indices. Its support is the set of rows satisfying every condition;
its consistency level is the fraction of the support carrying a given label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import BinaryDataset, FeatureFunction

__all__ = [
    "Clause",
    "make_clause",
    "TargetContext",
    "target_context",
    "support_set",
    "support_bits",
    "consistency_level",
    "SummaryExplanation",
    "summarize",
    "render",
]

Clause = tuple[int, ...]


def make_clause(features: Iterable[int]) -> Clause:
    feats = [int(p) for p in features]
    if len(set(feats)) != len(feats):
        raise ValueError(f"duplicate feature in clause {feats}")
    return tuple(sorted(feats))


@dataclass(frozen=True, eq=False)
class TargetContext:
    """Everything the models need to know about the observation being explained.

    ``satisfied`` is P^e (features the target satisfies), ``consistent`` is N^e
    (rows sharing the target's label).
    """

    e: int
    label: int
    satisfied: tuple[int, ...]
    consistent: np.ndarray

    @property
    def n_consistent(self) -> int:
        return len(self.consistent)

    def indicator(self, n_obs: int) -> np.ndarray:
        """a_i = 1 iff row i shares the target label."""
        a = np.zeros(n_obs, dtype=bool)
        a[self.consistent] = True
        return a


def target_context(dataset: BinaryDataset, e: int) -> TargetContext:
    if not 0 <= e < dataset.n_obs:
        raise IndexError(f"target row {e} outside dataset of {dataset.n_obs} rows")
    label = int(dataset.labels[e])
    consistent = np.flatnonzero(dataset.labels == label)
    consistent.setflags(write=False)
    return TargetContext(
        e=e,
        label=label,
        satisfied=tuple(int(p) for p in np.flatnonzero(dataset.delta[e])),
        consistent=consistent,
    )


def support_bits(clause: Sequence[int], dataset: BinaryDataset) -> int:
    cols = dataset.column_bits
    bits = (1 << dataset.n_obs) - 1
    for p in clause:
        bits &= cols[p]
    return bits


def support_set(clause: Sequence[int], dataset: BinaryDataset) -> np.ndarray:
    """Row indices satisfying every condition of ``clause`` (all rows if empty)."""
    if len(clause) == 0:
        return np.arange(dataset.n_obs)
    return np.flatnonzero(dataset.delta[:, list(clause)].all(axis=1))


def consistency_level(clause: Sequence[int], label: int, dataset: BinaryDataset) -> float:
    """Fraction of the support labelled ``label``; 1.0 for an empty support."""
    rows = support_set(clause, dataset)
    if rows.size == 0:
        return 1.0
    return float(np.count_nonzero(dataset.labels[rows] == label)) / rows.size


@dataclass(frozen=True)
class SummaryExplanation:
    """The rule ``clause -> label`` together with its metrics on one dataset."""

    clause: Clause
    label: int
    support: int
    consistent: int
    scope: str = "local"
    dataset_size: int = 0

    @property
    def complexity(self) -> int:
        return len(self.clause)

    @property
    def vacuous(self) -> bool:
        return self.support == 0

    @property
    def consistency(self) -> float:
        return 1.0 if self.support == 0 else self.consistent / self.support

    @property
    def percent_floor(self) -> int:
        """Consistency in whole percent, rounded down (never overstated)."""
        return 100 if self.support == 0 else (100 * self.consistent) // self.support

    def to_dict(self, features: Sequence[FeatureFunction] | None = None, sentence: str | None = None) -> dict:
        if features is None:
            clause = list(self.clause)
        else:
            clause = [
                {"column": features[p].column_name or features[p].column, "op": features[p].op,
                 "threshold": features[p].threshold}
                for p in self.clause
            ]
        d = {
            "clause": clause,
            "features": list(self.clause),
            "label": self.label,
            "support": self.support,
            "consistent_support": self.consistent,
            "consistency": self.consistency,
            "complexity": self.complexity,
            "scope": self.scope,
            "dataset_size": self.dataset_size,
            "vacuous": self.vacuous,
        }
        if sentence is not None:
            d["sentence"] = sentence
        return d


def summarize(clause: Sequence[int], label: int, dataset: BinaryDataset, scope: str = "local") -> SummaryExplanation:
    bits = support_bits(clause, dataset)
    return SummaryExplanation(
        clause=make_clause(clause),
        label=int(label),
        support=bits.bit_count(),
        consistent=(bits & dataset.label_bits[int(label)]).bit_count(),
        scope=scope,
        dataset_size=dataset.n_obs,
    )


DEFAULT_OUTCOMES = {0: "be negative", 1: "be positive"}


def render(
    expl: SummaryExplanation,
    features: Sequence[FeatureFunction],
    style: str = "exact",
    outcomes: Mapping[int, str] | None = None,
    noun: str = "people",
) -> str:
    """Plain-English sentence for an explanation.

    ``style="exact"`` states the rule holds for all matched rows;
    ``style="q"`` states the floored percentage that carries the label.
    """
    outcome = (outcomes or DEFAULT_OUTCOMES)[expl.label]
    conds = " and ".join(features[p].describe() for p in expl.clause)
    who = f"{expl.support} {noun}" + (f" whose {conds}" if conds else "")
    if style == "exact":
        return f"For all {who}, all of them were predicted to {outcome}."
    if style == "q":
        return f"For {who}, over {expl.percent_floor}% of them were predicted to {outcome}."
    raise ValueError(f"unknown style {style!r}")
