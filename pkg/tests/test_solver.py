import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from summex.dataset import FeatureFunction, RawDataset, apply_features
from summex.explanation import consistency_level, support_bits, target_context
from summex.solver import (
    Mode,
    SolveResult,
    SolveSpec,
    Status,
    brute_force,
    dominance_groups,
    meets_q,
    solve,
)

from instances import random_instance, worked_dataset


def _worked():
    ds = worked_dataset()
    return ds, target_context(ds, 0)


# ---- worked instance --------------------------------------------------------


def test_worked_mc():
    ds, ctx = _worked()
    r = solve(ds, ctx, SolveSpec(Mode.MC))
    assert (r.objective, r.clause, r.status) == (2, (0, 1), Status.OPTIMAL)
    for p in ctx.satisfied:
        assert support_bits([p], ds) & ds.label_bits[0]


def test_worked_ms():
    ds, ctx = _worked()
    r = solve(ds, ctx, SolveSpec(Mode.MS, max_complexity=4))
    assert (r.objective, r.clause) == (2, (0, 1))


def test_worked_msqc():
    ds, ctx = _worked()
    r = solve(ds, ctx, SolveSpec(Mode.MSQC, q=0.7, max_complexity=4))
    assert (r.objective, r.clause) == (4, (0,))
    assert consistency_level(r.clause, 1, ds) == 0.75
    r1 = solve(ds, ctx, SolveSpec(Mode.MSQC, q=1.0))
    assert r1.objective == 2


def test_no_inconsistent_rows():
    raw = RawDataset(("a", "b"), ((1.0, 1.0), (1.0, 0.0), (0.0, 1.0)), np.array([1, 1, 1]))
    ds = apply_features(raw, [FeatureFunction(0, ">=", 1.0), FeatureFunction(1, ">=", 1.0)])
    ctx = target_context(ds, 0)
    mc = solve(ds, ctx, SolveSpec(Mode.MC))
    assert mc.clause == () and mc.objective == 0
    ms = solve(ds, ctx, SolveSpec(Mode.MS))
    assert ms.clause == () and ms.objective == 3


def test_inconsistent_twin_is_infeasible():
    raw = RawDataset(("a",), ((1.0,), (1.0,), (0.0,)), np.array([1, 0, 1]))
    ds = apply_features(raw, [FeatureFunction(0, ">=", 1.0)])
    ctx = target_context(ds, 0)
    for mode in (Mode.MC, Mode.MS):
        r = solve(ds, ctx, SolveSpec(mode))
        assert r.status is Status.INFEASIBLE and r.clause is None
        assert brute_force(ds, ctx, SolveSpec(mode)).status is Status.INFEASIBLE
    assert solve(ds, ctx, SolveSpec(Mode.MSQC, q=0.9)).status is Status.INFEASIBLE
    r = solve(ds, ctx, SolveSpec(Mode.MSQC, q=0.5))
    assert (r.clause, r.objective) == ((), 3)


def test_brute_force_guards_and_empty_pe():
    raw = RawDataset(("a",), ((0.0,), (1.0,)), np.array([1, 0]))
    ds = apply_features(raw, [FeatureFunction(0, ">=", 1.0)])
    ctx = target_context(ds, 0)
    assert ctx.satisfied == ()
    r = brute_force(ds, ctx, SolveSpec(Mode.MSQC, q=0.5))
    assert r.clause == () and r.objective == 2
    ds, ctx = _worked()
    with pytest.raises(ValueError):
        brute_force(ds, ctx, SolveSpec(Mode.MS, max_complexity=5))


def test_worked_brute_force_mc():
    ds, ctx = _worked()
    assert brute_force(ds, ctx, SolveSpec(Mode.MC)).objective == 2


# ---- dominance groups -------------------------------------------------------


def test_dominance_groups_examples():
    f = [FeatureFunction(0, "<=", 3.0, "x"), FeatureFunction(0, "<=", 7.0, "x"), FeatureFunction(0, ">=", 5.0, "x")]
    assert dominance_groups(f) == [[0, 1], [2]]
    g = [FeatureFunction(j, "<=", 1.0) for j in range(4)]
    assert dominance_groups(g) == [[0], [1], [2], [3]]


# ---- oracle equivalence -----------------------------------------------------

CONFIGS = [
    (Mode.MC, 1.0, False, False),
    (Mode.MC, 1.0, True, False),
    (Mode.MS, 1.0, False, False),
    (Mode.MS, 1.0, True, True),
    (Mode.MSQC, 0.7, True, False),
    (Mode.MSQC, 0.85, False, False),
    (Mode.MSQC, 1.0, True, False),
]


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(CONFIGS), st.integers(1, 4))
def test_solve_matches_brute_force(seed, config, mc):
    mode, q, dom, init = config
    ds, ctx = random_instance(np.random.default_rng(seed))
    spec = SolveSpec(mode, q=q, max_complexity=mc, dominance=dom, mc_warm_start=init)
    got, ref = solve(ds, ctx, spec), brute_force(ds, ctx, spec)
    assert got.status is ref.status
    assert got.objective == ref.objective
    assert got.clause == ref.clause
    if got.clause is not None:
        assert set(got.clause) <= set(ctx.satisfied)
        if mode is not Mode.MC:
            assert len(got.clause) <= mc
        c = consistency_level(got.clause, ctx.label, ds)
        if mode is Mode.MSQC:
            assert c >= q - 1e-12
        else:
            assert c == 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_objective_orderings(seed):
    ds, ctx = random_instance(np.random.default_rng(seed))
    ms = solve(ds, ctx, SolveSpec(Mode.MS, max_complexity=3))
    prev = None
    for q in (0.5, 0.7, 0.85, 1.0):
        r = solve(ds, ctx, SolveSpec(Mode.MSQC, q=q, max_complexity=3))
        if ms.found:
            assert r.objective >= ms.objective
        if prev is not None and prev.found:
            assert r.objective <= prev.objective
        prev = r
    if ms.found:
        # the MS clause excludes every inconsistent row, so MC is at most its size
        mc = solve(ds, ctx, SolveSpec(Mode.MC))
        assert mc.objective <= len(ms.clause)
        assert support_bits(ms.clause, ds) & ds.label_bits[1 - ctx.label] == 0


def _best_superset(ds, ctx, clause, spec):
    rest = [p for p in ctx.satisfied if p not in clause]
    best = -1
    for extra in range(spec.max_complexity - len(clause) + 1):
        for add in itertools.combinations(rest, extra):
            bits = support_bits(list(clause) + list(add), ds)
            good = (bits & ds.label_bits[ctx.label]).bit_count()
            sup = bits.bit_count()
            if spec.mode is Mode.MS and good == sup:
                best = max(best, good)
            if spec.mode is Mode.MSQC and meets_q(good, sup, spec.q):
                best = max(best, sup)
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(Mode.MS, 1.0), (Mode.MSQC, 0.7), (Mode.MSQC, 0.85)]))
def test_bound_soundness(seed, mq):
    mode, q = mq
    ds, ctx = random_instance(np.random.default_rng(seed), max_pe=9)
    spec = SolveSpec(mode, q=q, max_complexity=3)
    seen = []
    solve(ds, ctx, spec, trace=lambda clause, bound: seen.append((clause, bound)))
    assert seen
    for clause, bound in seen:
        assert bound >= _best_superset(ds, ctx, clause, spec)


# ---- variants, time limit, serialization ------------------------------------


def test_dominance_prunes_nodes():
    wins = total = 0
    for seed in range(60):
        ds, ctx = random_instance(np.random.default_rng(seed), max_pe=15)
        a = solve(ds, ctx, SolveSpec(Mode.MS, max_complexity=3))
        b = solve(ds, ctx, SolveSpec(Mode.MS, max_complexity=3, dominance=True))
        assert a.objective == b.objective
        total += 1
        wins += b.nodes <= a.nodes
    assert wins >= 0.8 * total


def test_time_limit_returns_incumbent():
    from summex.dataset import BinarizeScheme, SyntheticSpec, binarize, default_rules, synthesize

    ds = binarize(synthesize(SyntheticSpec(3000, 10, default_rules(), 0.2), 0), BinarizeScheme(k=9))
    ctx = target_context(ds, 0)
    r = solve(ds, ctx, SolveSpec(Mode.MSQC, q=0.85, time_limit=0.05))
    assert r.status is Status.TIME_LIMIT
    if r.clause is not None:
        assert consistency_level(r.clause, ctx.label, ds) >= 0.85


def test_result_json_roundtrip():
    ds, ctx = _worked()
    r = solve(ds, ctx, SolveSpec(Mode.MS))
    assert SolveResult.from_dict(r.to_dict()) == r


def test_spec_validation():
    with pytest.raises(ValueError):
        SolveSpec(Mode.MS, max_complexity=0)
    with pytest.raises(ValueError):
        SolveSpec(Mode.MSQC, q=0.0)
    assert SolveSpec("msqc").mode is Mode.MSQC
