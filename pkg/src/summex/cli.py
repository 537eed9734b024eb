"""Command-line interface: ``summex {binarize,global-sis,explain,bench}``.

Exit codes: 0 success, 2 input or configuration error, 3 infeasible result
(no clause reaches the required consistency), 4 result degraded by a time
limit.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import warnings
from pathlib import Path

from .bench import load_config, run_experiment, write_report
from .dataset import BinarizeScheme, BinaryDataset, CsvFormat, FICO_FORMAT, SyntheticSpec, binarize, default_rules, load_raw, sample_local, synthesize
from .explanation import render, summarize, target_context
from .sis import GlobalCounts, global_counts
from .solver import Mode, SolveSpec, Status, solve
from .wcs import NoCandidatesError, WcsConfig, default_workers, run_wcs

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_TIMELIMIT = 0, 2, 3, 4


class InputError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"summex: error: {msg}", file=sys.stderr)


def _pairs(text: str) -> dict[str, int]:
    out = {}
    for item in text.split(","):
        k, _, v = item.partition("=")
        if not _:
            raise InputError(f"expected TOKEN=0|1 pairs, got {item!r}")
        out[k.strip()] = int(v)
    return out


# ---- binarize ---------------------------------------------------------------


def cmd_binarize(args) -> int:
    if args.fico:
        fmt = FICO_FORMAT
    else:
        if not args.outcome:
            raise InputError("--outcome is required (or --fico)")
        fmt = CsvFormat(
            outcome=args.outcome,
            missing=tuple(t for t in (args.missing or "").split(",") if t),
            outcome_map=_pairs(args.outcome_map) if args.outcome_map else None,
        )
    try:
        raw = load_raw(args.input, fmt)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ds = binarize(raw, BinarizeScheme(k=args.k))
    for w in caught:
        print(f"summex: warning: {w.message}", file=sys.stderr)
    ds.save(args.output)
    print(f"rows={ds.n_obs} features={ds.n_features} positives={int(ds.labels.sum())} -> {args.output}")
    return EXIT_OK


# ---- global-sis -------------------------------------------------------------


def _load_dataset(path) -> BinaryDataset:
    try:
        return BinaryDataset.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read dataset {path}: {exc}") from None


def cmd_global_sis(args) -> int:
    ds = _load_dataset(args.dataset)
    counts = global_counts(ds)
    counts.save(args.output)
    print(f"counts for {ds.n_features} features over {ds.n_obs} rows -> {args.output}")
    return EXIT_OK


# ---- explain ----------------------------------------------------------------

_EXPLAIN_DEFAULTS = {
    "method": "wcs",
    "q": 0.85,
    "max_complexity": 4,
    "local_size": None,
    "seed": 0,
    "weighting": "global",
    "output": "text",
    "time_limit": None,
    "m": 40,
    "n_wcs": 100,
    "rho": 0.25,
    "scale": 5.0,
    "outcome_names": "be negative,be positive",
}


def _explain_config(path) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string("[explain]\n" + Path(path).read_text())
    except (OSError, configparser.Error) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    out = {}
    for k, v in cp["explain"].items():
        k = k.replace("-", "_")
        if k not in _EXPLAIN_DEFAULTS:
            raise InputError(f"unknown config key {k!r}")
        default = _EXPLAIN_DEFAULTS[k]
        out[k] = v if default is None or isinstance(default, str) else type(default)(v)
    for k in ("local_size",):
        if k in out:
            out[k] = int(out[k])
    if "time_limit" in out:
        out["time_limit"] = float(out["time_limit"])
    return out


def cmd_explain(args) -> int:
    method = args.method.lower()
    if not 0 < args.q <= 1:
        raise InputError(f"q must lie in (0, 1], got {args.q}")
    if args.max_complexity < 1:
        raise InputError("max complexity must be >= 1")
    names = [s.strip() for s in args.outcome_names.split(",")]
    if len(names) != 2:
        raise InputError("--outcome-names takes two comma-separated phrases")
    D = _load_dataset(args.dataset)
    try:
        row = D.row_of(args.target)
    except KeyError:
        raise InputError(f"unknown target id {args.target}") from None

    if args.local_size is not None:
        if not 1 <= args.local_size <= D.n_obs:
            raise InputError(f"local size must lie in [1, {D.n_obs}]")
        local = sample_local(D, args.local_size, args.seed, include=row)
    else:
        local = D
    ctx = target_context(local, local.row_of(args.target))

    payload, wcs_outcome = {}, None
    if method in ("mc", "ms", "msqc"):
        spec = SolveSpec(
            Mode.parse(method), q=args.q if method == "msqc" else 1.0, max_complexity=args.max_complexity,
            time_limit=args.time_limit, dominance=method != "mc",
        )
        result = solve(local, ctx, spec)
        feasible = result.clause is not None
    elif method in ("wcs", "rcs"):
        weighting = "uniform" if method == "rcs" else args.weighting
        counts = None
        if weighting == "global":
            if args.global_counts:
                try:
                    counts = GlobalCounts.load(args.global_counts, expected_hash=D.feature_hash)
                except (OSError, ValueError, KeyError) as exc:
                    raise InputError(f"refusing global counts: {exc}") from None
            else:
                counts = global_counts(D)
        cfg = WcsConfig(
            m=args.m, n_wcs=args.n_wcs, rho=args.rho, scale=args.scale, q=args.q,
            max_complexity=args.max_complexity, weighting=weighting, seed=args.seed, time_limit=args.time_limit,
        )
        try:
            wcs_outcome, _ = run_wcs(cfg, local, ctx, counts, workers=args.workers)
        except NoCandidatesError as exc:
            _err(str(exc))
            return EXIT_INFEASIBLE
        except ValueError as exc:
            raise InputError(str(exc)) from None
        result = wcs_outcome.chosen
        feasible = wcs_outcome.q_feasible
    else:
        raise InputError(f"unknown method {args.method!r}")

    if result.clause is None:
        msg = f"no feasible clause ({result.status.value})"
        if args.output == "json":
            print(json.dumps({"result": _result_dict(result, args.timing), "explanation": None}, sort_keys=True))
        else:
            print(msg)
        return EXIT_TIMELIMIT if result.status is Status.TIME_LIMIT else EXIT_INFEASIBLE

    outcomes = {0: names[0], 1: names[1]}
    expl = summarize(result.clause, ctx.label, local, "local")
    style = "exact" if method in ("mc", "ms") else "q"
    sentence = render(expl, local.features, style, outcomes)
    if args.output == "json":
        payload["explanation"] = expl.to_dict(local.features, sentence)
        payload["explanation"]["q_feasible"] = bool(feasible)
        payload["result"] = _result_dict(result, args.timing)
        payload["target"] = args.target
        if local is not D:
            g = summarize(result.clause, ctx.label, D, "global")
            payload["global"] = g.to_dict(D.features, render(g, D.features, "q", outcomes))
        if wcs_outcome is not None:
            w = wcs_outcome.to_dict()
            if not args.timing:
                w["chosen"].pop("wall_time")
            payload["wcs"] = w
        print(json.dumps(payload, sort_keys=True))
    else:
        print(sentence)
        print(f"support={expl.support} consistency={expl.consistency:.4f} complexity={expl.complexity} "
              f"status={result.status.value}" + ("" if feasible else " q-infeasible"))
    if not feasible:
        return EXIT_INFEASIBLE
    if result.status is Status.TIME_LIMIT:
        return EXIT_TIMELIMIT
    return EXIT_OK


def _result_dict(result, timing: bool) -> dict:
    d = result.to_dict()
    if not timing:
        d.pop("wall_time")
    return d


# ---- bench ------------------------------------------------------------------


def cmd_bench(args) -> int:
    try:
        config, extra = load_config(args.config)
    except (OSError, ValueError, configparser.Error) as exc:
        raise InputError(f"bad config {args.config}: {exc}") from None
    if "dataset" in extra:
        D = _load_dataset(extra["dataset"])
    else:
        try:
            spec = SyntheticSpec(
                n_rows=int(extra.get("synthetic_rows", 10000)),
                n_numeric=int(extra.get("synthetic_columns", 10)),
                rules=default_rules(),
                noise=float(extra.get("noise", 0.12)),
            )
            raw = synthesize(spec, int(extra.get("data_seed", 1)))
            D = binarize(raw, BinarizeScheme(int(extra.get("k", 9))))
        except ValueError as exc:
            raise InputError(str(exc)) from None
    try:
        report = run_experiment(
            config, D,
            progress=(lambda r: print(f"{r.method} N={r.size} run={r.run} {r.status} {r.time:.3f}s",
                                      file=sys.stderr)) if args.verbose else None,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    files = write_report(report, args.output)
    for f in files:
        print(f)
    return EXIT_OK


# ---- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="summex", description="Rule-based summary-explanations.")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("binarize", help="CSV -> binary-dataset file")
    b.add_argument("input")
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--outcome", help="name of the outcome column")
    b.add_argument("--missing", help="comma-separated missing-value tokens")
    b.add_argument("--outcome-map", help="e.g. Bad=1,Good=0")
    b.add_argument("--fico", action="store_true", help="FICO HELOC column conventions")
    b.add_argument("-k", type=int, default=9, help="quantile thresholds per numeric column")
    b.set_defaults(func=cmd_binarize)

    g = sub.add_parser("global-sis", help="precompute label-conditioned feature counts")
    g.add_argument("dataset")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_global_sis)

    e = sub.add_parser("explain", help="explain one observation")
    e.add_argument("dataset")
    e.add_argument("--target", type=int, required=True, help="observation id")
    e.add_argument("--config", help="key = value file overriding the defaults below")
    e.add_argument("--method", choices=["mc", "ms", "msqc", "wcs", "rcs"])
    e.add_argument("--q", type=float)
    e.add_argument("--max-complexity", type=int)
    e.add_argument("--local-size", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--global-counts")
    e.add_argument("--weighting", choices=["global", "local"])
    e.add_argument("--output", choices=["json", "text"])
    e.add_argument("--time-limit", type=float)
    e.add_argument("--m", type=int)
    e.add_argument("--n-wcs", type=int)
    e.add_argument("--rho", type=float)
    e.add_argument("--scale", type=float)
    e.add_argument("--outcome-names", help="phrases for labels 0 and 1, comma-separated")
    e.add_argument("--workers", type=int, default=None)
    e.add_argument("--timing", action="store_true", help="include wall times in JSON output")
    e.set_defaults(func=cmd_explain)

    c = sub.add_parser("bench", help="run the benchmark protocol")
    c.add_argument("config")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("-v", "--verbose", action="store_true")
    c.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "explain":
            merged = dict(_EXPLAIN_DEFAULTS)
            if args.config:
                merged.update(_explain_config(args.config))
            for k, v in merged.items():
                if getattr(args, k) is None:
                    setattr(args, k, v)
            if args.workers is None:
                args.workers = default_workers()
        return args.func(args)
    except InputError as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
