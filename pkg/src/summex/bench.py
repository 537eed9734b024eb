"""Benchmark protocol: resampled local datasets, repeated runs, aggregate tables.

For every (method, local size) cell the harness draws ``runs`` local samples
from the global dataset, picks a random target in each, solves, and records
solution time plus support and consistency on both the local sample and the
global data. Times and supports are aggregated with the 1-shifted geometric
mean, consistencies with the arithmetic mean.
"""

from __future__ import annotations

import configparser
import csv
import json
import time
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import BinaryDataset, sample_local
from .explanation import summarize, target_context
from .sis import DEFAULT_SCALE, GlobalCounts, global_counts
from .solver import Mode, SolveSpec, Status, solve
from .wcs import NoCandidatesError, WcsConfig, run_wcs

__all__ = [
    "METHODS",
    "BENCHMARK_METHODS",
    "ExperimentConfig",
    "RunRecord",
    "BenchmarkReport",
    "shifted_geomean",
    "run_experiment",
    "rank_methods",
    "write_report",
    "load_config",
]

# method label -> (model, dominance pruning, MC warm start)
_EXACT = {
    "MC": (Mode.MC, False, False),
    "MC(SOS1)": (Mode.MC, True, False),
    "MS(Vanilla)": (Mode.MS, False, False),
    "MS": (Mode.MS, True, False),
    "MS(Init)": (Mode.MS, False, True),
    "MS(InitSOS1)": (Mode.MS, True, True),
    "MSqC": (Mode.MSQC, True, False),
}
_SAMPLED = {"RCS": "uniform", "WCS": "global", "WCS(local)": "local"}
METHODS = tuple(_EXACT) + tuple(_SAMPLED)
BENCHMARK_METHODS = ("MC", "MS", "MSqC", "RCS", "WCS")
VARIANT_METHODS = ("MC", "MC(SOS1)", "MS(Vanilla)", "MS", "MS(Init)", "MS(InitSOS1)", "MSqC")


def shifted_geomean(values: Sequence[float], shift: float = 1.0) -> float:
    """``exp(mean(log(v + shift))) - shift`` for nonnegative ``values``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("shifted geometric mean of an empty list")
    if np.any(v < 0):
        raise ValueError("values must be nonnegative")
    return float(np.exp(np.mean(np.log(v + shift))) - shift)


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[str, ...] = BENCHMARK_METHODS
    sizes: tuple[int, ...] = (100, 400, 700, 1000, 4000, 7000, 10000)
    runs: int = 40
    q: float = 0.85
    max_complexity: int = 4
    time_limit: float = 60.0
    seed: int = 0
    m: int = 40
    n_wcs: int = 100
    rho: float = 0.25
    scale: float = DEFAULT_SCALE

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))


@dataclass
class RunRecord:
    method: str
    size: int
    run: int
    target: int
    status: str
    time: float
    clause: list | None = None
    local_support: int = 0
    local_consistency: float | None = None
    global_support: int = 0
    global_consistency: float | None = None
    q_feasible: bool | None = None
    nodes: int = 0
    error: str | None = None

    @property
    def solved(self) -> bool:
        return self.clause is not None


@dataclass
class BenchmarkReport:
    config: ExperimentConfig
    records: list[RunRecord] = field(default_factory=list)
    global_size: int = 0

    def cell_records(self, method: str, size: int) -> list[RunRecord]:
        return [r for r in self.records if r.method == method and r.size == size]

    def cell(self, method: str, size: int) -> dict:
        """Aggregates for one (method, size) cell, recomputed from the raw records.

        Runs without a clause count as support 0; consistencies average over
        runs that produced a clause.
        """
        recs = self.cell_records(method, size)
        if not recs:
            return {}
        lc = [r.local_consistency for r in recs if r.solved]
        gc = [r.global_consistency for r in recs if r.solved]
        return {
            "runs": len(recs),
            "time": shifted_geomean([r.time for r in recs]),
            "local_support": shifted_geomean([r.local_support for r in recs]),
            "local_consistency": float(np.mean(lc)) if lc else None,
            "global_support": shifted_geomean([r.global_support for r in recs]),
            "global_consistency": float(np.mean(gc)) if gc else None,
            "timeouts": sum(r.status == Status.TIME_LIMIT.value for r in recs),
            "infeasible": sum(r.status == Status.INFEASIBLE.value for r in recs),
            "q_infeasible": sum(r.q_feasible is False for r in recs),
            "errors": sum(r.error is not None for r in recs),
        }

    def cells(self) -> dict:
        return {m: {s: self.cell(m, s) for s in self.config.sizes} for m in self.config.methods}

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "config": cfg,
            "global_size": self.global_size,
            "cells": {m: {str(s): c for s, c in row.items()} for m, row in self.cells().items()},
            "records": [asdict(r) for r in self.records],
        }


def _seed(base: int, *keys) -> int:
    ss = np.random.SeedSequence(entropy=base, spawn_key=tuple(keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_method(method, config, local, ctx, counts):
    if method in _EXACT:
        mode, dom, init = _EXACT[method]
        spec = SolveSpec(
            mode, q=config.q if mode is Mode.MSQC else 1.0, max_complexity=config.max_complexity,
            time_limit=config.time_limit, dominance=dom, mc_warm_start=init,
        )
        res = solve(local, ctx, spec)
        return res.clause, res.status.value, res.wall_time, res.nodes, None
    wcfg = WcsConfig(
        m=config.m, n_wcs=config.n_wcs, rho=config.rho, scale=config.scale, q=config.q,
        max_complexity=config.max_complexity, weighting=_SAMPLED[method],
        seed=_seed(config.seed, local.n_obs, ctx.e, zlib.crc32(method.encode())),
        time_limit=config.time_limit,
    )
    outcome, _ = run_wcs(wcfg, local, ctx, counts, workers=1)
    ch = outcome.chosen
    return ch.clause, ch.status.value, ch.wall_time, ch.nodes, outcome.q_feasible


def run_one(config: ExperimentConfig, global_: BinaryDataset, counts: GlobalCounts, method: str, size: int, run: int) -> RunRecord:
    """One run of one method; the local sample and target depend only on
    (seed, size, run), so methods are compared on identical draws."""
    local = sample_local(global_, size, _seed(config.seed, size, run))
    e = int(np.random.default_rng(_seed(config.seed, size, run, 1)).integers(size))
    ctx = target_context(local, e)
    t0 = time.perf_counter()
    try:
        clause, status, elapsed, nodes, qf = _run_method(method, config, local, ctx, counts)
    except NoCandidatesError as exc:
        return RunRecord(method, size, run, int(local.obs_ids[e]), Status.INFEASIBLE.value,
                         time.perf_counter() - t0, error=str(exc))
    rec = RunRecord(method, size, run, int(local.obs_ids[e]), status, elapsed, nodes=nodes, q_feasible=qf)
    if clause is not None:
        loc = summarize(clause, ctx.label, local, "local")
        glo = summarize(clause, ctx.label, global_, "global")
        rec.clause = list(clause)
        rec.local_support, rec.local_consistency = loc.support, loc.consistency
        rec.global_support, rec.global_consistency = glo.support, glo.consistency
    return rec


def run_experiment(
    config: ExperimentConfig,
    global_: BinaryDataset,
    counts: GlobalCounts | None = None,
    progress=None,
) -> BenchmarkReport:
    """Run every (method, size, run) combination. ``progress(record)`` is
    called after each run if given."""
    for s in config.sizes:
        if not 1 <= s <= global_.n_obs:
            raise ValueError(f"local size {s} outside [1, {global_.n_obs}]")
    counts = counts or global_counts(global_)
    report = BenchmarkReport(config, global_size=global_.n_obs)
    for size in config.sizes:
        for run in range(config.runs):
            for method in config.methods:
                rec = run_one(config, global_, counts, method, size, run)
                report.records.append(rec)
                if progress is not None:
                    progress(rec)
    return report


_ASCENDING = {"time"}
RANK_METRICS = ("time", "local_support", "local_consistency", "global_support", "global_consistency")


def _competition_ranks(values: dict, ascending: bool) -> dict:
    present = {k: v for k, v in values.items() if v is not None}
    ranks = {}
    for k, v in present.items():
        better = sum((w < v) if ascending else (w > v) for w in present.values())
        ranks[k] = better + 1
    for k in values:
        ranks.setdefault(k, None)
    return ranks


def rank_methods(report: BenchmarkReport, methods: Sequence[str] | None = None) -> dict:
    """``ranks[metric][size][method]``; ties share the better rank.

    Cells with timed-out runs get no support/consistency rank (they read N/A).
    """
    methods = list(methods or report.config.methods)
    if len(methods) < 2:
        raise ValueError("ranking needs at least two methods")
    out = {}
    for metric in RANK_METRICS:
        out[metric] = {}
        for size in report.config.sizes:
            vals = {}
            for m in methods:
                c = report.cell(m, size)
                v = c.get(metric) if c else None
                if metric != "time" and c and c["timeouts"]:
                    v = None
                vals[m] = v
            out[metric][size] = _competition_ranks(vals, metric in _ASCENDING)
    return out


# --------------------------------------------------------------------------
# Output files
# --------------------------------------------------------------------------


def _fmt(v, digits=4):
    if v is None:
        return "N/A"
    return f"{v:.{digits}f}"


def _size_label(s: int) -> str:
    return f"{s / 1000:g}K" if s >= 100 else str(s)


def write_report(report: BenchmarkReport, out_dir) -> list[Path]:
    """JSON report, JSONL raw records and CSV tables in the usual
    table layouts (variant times, times, local metrics, global metrics, ranks)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    p = out / "report.json"
    p.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    written.append(p)
    p = out / "records.jsonl"
    with p.open("w") as fh:
        for r in report.records:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")
    written.append(p)

    cfg = report.config
    cells = report.cells()

    def time_cell(m, s):
        c = cells[m][s]
        if not c:
            return "N/A"
        return f">{cfg.time_limit:g}" if c["timeouts"] else _fmt(c["time"])

    def metric_cell(m, s, key, digits):
        c = cells[m][s]
        if not c or c["timeouts"]:
            return "N/A"
        return _fmt(c[key], digits)

    def table(name, header, rows):
        path = out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    variants = [m for m in VARIANT_METHODS if m in cfg.methods]
    if variants:
        table("table1_variant_times.csv", ["N"] + variants,
              [[_size_label(s)] + [time_cell(m, s) for m in variants] for s in cfg.sizes])
    bench = [m for m in BENCHMARK_METHODS if m in cfg.methods]
    table("table2_times.csv", ["N"] + bench, [[_size_label(s)] + [time_cell(m, s) for m in bench] for s in cfg.sizes])

    header, rows = ["N"], []
    for m in bench:
        header += [f"{m} S_N"] + ([] if m in ("MC", "MS") else [f"{m} c_N"])
    for s in cfg.sizes:
        row = [_size_label(s)]
        for m in bench:
            row.append(metric_cell(m, s, "local_support", 2))
            if m not in ("MC", "MS"):
                row.append(metric_cell(m, s, "local_consistency", 2))
        rows.append(row)
    table("table3_local.csv", header, rows)
    table("table4a_global_support.csv", ["N"] + bench,
          [[_size_label(s)] + [metric_cell(m, s, "global_support", 4) for m in bench] for s in cfg.sizes])
    table("table4b_global_consistency.csv", ["N"] + bench,
          [[_size_label(s)] + [metric_cell(m, s, "global_consistency", 4) for m in bench] for s in cfg.sizes])

    if "WCS" in bench and len(bench) >= 2:
        ranks = rank_methods(report, bench)
        rows = []
        for metric in ("time", "local_support", "global_support", "global_consistency"):
            rows.append([metric] + [ranks[metric][s]["WCS"] if ranks[metric][s]["WCS"] else "N/A" for s in cfg.sizes])
        table("table5_wcs_ranking.csv", ["metric"] + [_size_label(s) for s in cfg.sizes], rows)
    return written


# --------------------------------------------------------------------------
# Config files
# --------------------------------------------------------------------------

_LISTS = {"methods": str, "sizes": int}


def load_config(path) -> tuple[ExperimentConfig, dict]:
    """Read ``key = value`` lines. Unknown keys that are not experiment
    settings (e.g. ``dataset``) are returned in the second element."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string("[bench]\n" + text)
    kv = dict(cp["bench"])
    known = {f.name: f for f in fields(ExperimentConfig)}
    kwargs, extra = {}, {}
    defaults = ExperimentConfig()
    for k, v in kv.items():
        if k not in known:
            extra[k] = v
        elif k in _LISTS:
            kwargs[k] = tuple(_LISTS[k](x.strip()) for x in v.split(",") if x.strip())
        else:
            kwargs[k] = type(getattr(defaults, k))(v)
    return replace(defaults, **kwargs), extra
