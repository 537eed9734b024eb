"""Raw tabular data, threshold binarization and local resampling.

A :class:`RawDataset` holds the original rows; :func:`binarize` turns it into a
:class:`BinaryDataset`, i.e. the 0/1 matrix ``delta[i, p] = F_p(x_i)`` over a
list of :class:`FeatureFunction` conditions plus the binary outcome.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "CsvFormat",
    "FICO_FORMAT",
    "RawDataset",
    "FeatureFunction",
    "BinaryDataset",
    "BinarizeScheme",
    "Condition",
    "SyntheticSpec",
    "load_raw",
    "apply_features",
    "binarize",
    "sample_local",
    "synthesize",
    "bits_of",
    "default_rules",
    "planted_features",
]

OPS = ("<=", ">=", "=")
_MAGIC = "summex-binary-dataset"


def bits_of(mask: np.ndarray) -> int:
    """Pack a boolean vector into a Python int (bit i set iff ``mask[i]``)."""
    packed = np.packbits(np.asarray(mask, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


# --------------------------------------------------------------------------
# Raw data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvFormat:
    """How to read a comma-separated file.

    ``outcome`` names the label column. ``missing`` lists cell tokens that mean
    "value not available". ``outcome_map`` translates outcome tokens to 0/1;
    without it the outcome cells must already read as 0 or 1.
    """

    outcome: str
    missing: tuple[str, ...] = ()
    outcome_map: Mapping[str, int] | None = None


FICO_FORMAT = CsvFormat(
    outcome="RiskPerformance",
    missing=("-7", "-8", "-9"),
    outcome_map={"Bad": 1, "Good": 0},
)


@dataclass(frozen=True)
class RawDataset:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    outcome: np.ndarray
    outcome_name: str = "outcome"

    def __post_init__(self):
        outcome = np.asarray(self.outcome)
        if outcome.ndim != 1 or len(outcome) != len(self.rows):
            raise ValueError("outcome must have one entry per row")
        if outcome.size and not np.isin(outcome, (0, 1)).all():
            raise ValueError("outcome values must be 0 or 1")
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row arity {len(r)} != {len(self.columns)} columns")
        outcome = outcome.astype(np.uint8)
        outcome.setflags(write=False)
        object.__setattr__(self, "outcome", outcome)

    def __len__(self):
        return len(self.rows)

    @cached_property
    def kinds(self) -> tuple[str, ...]:
        """``"numeric"`` or ``"categorical"`` per column; missing cells are None."""
        kinds = []
        for j in range(len(self.columns)):
            vals = [r[j] for r in self.rows if r[j] is not None]
            numeric = all(isinstance(v, (int, float, np.integer, np.floating)) for v in vals)
            kinds.append("numeric" if numeric else "categorical")
        return tuple(kinds)

    def column(self, j: int) -> np.ndarray:
        if self.kinds[j] == "numeric":
            return np.array(
                [np.nan if r[j] is None else float(r[j]) for r in self.rows], dtype=float
            )
        return np.array([None if r[j] is None else str(r[j]) for r in self.rows], dtype=object)


def _parse_cell(token: str, missing: set[str]):
    token = token.strip()
    if token == "" or token in missing:
        return None
    try:
        return float(token)
    except ValueError:
        return token


def load_raw(path, fmt: CsvFormat) -> RawDataset:
    """Read a headed CSV file; the outcome column is split off from the features."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if fmt.outcome not in header:
            raise ValueError(f"{path}: outcome column {fmt.outcome!r} not found")
        k = header.index(fmt.outcome)
        missing = set(fmt.missing)
        rows, outcome = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            tok = rec[k].strip()
            if fmt.outcome_map is not None:
                if tok not in fmt.outcome_map:
                    raise ValueError(f"{path}:{lineno}: unknown outcome {tok!r}")
                y = fmt.outcome_map[tok]
            else:
                try:
                    y = float(tok)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric outcome {tok!r}") from None
            if y not in (0, 1):
                raise ValueError(f"{path}:{lineno}: non-binary outcome {tok!r}")
            outcome.append(int(y))
            rows.append(tuple(_parse_cell(c, missing) for i, c in enumerate(rec) if i != k))

    columns = tuple(h for i, h in enumerate(header) if i != k)
    # a column holding any non-numeric token is categorical throughout
    rows_t = [list(r) for r in rows]
    for j in range(len(columns)):
        if any(isinstance(r[j], str) for r in rows_t):
            for r in rows_t:
                if r[j] is not None and not isinstance(r[j], str):
                    r[j] = format(r[j], "g")
    return RawDataset(
        columns=columns,
        rows=tuple(tuple(r) for r in rows_t),
        outcome=np.array(outcome, dtype=np.uint8),
        outcome_name=fmt.outcome,
    )


# --------------------------------------------------------------------------
# Feature functions and the binary dataset
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureFunction:
    """A single condition ``column op threshold`` on a raw column."""

    column: int
    op: str
    threshold: float | str
    column_name: str = ""

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown operator {self.op!r}")
        if (self.op == "=") != isinstance(self.threshold, str):
            raise ValueError("'=' takes a category token, '<='/'>=' a number")

    def evaluate(self, values: np.ndarray) -> np.ndarray:
        """Vectorized truth value; missing entries (NaN / None) never satisfy."""
        if self.op == "=":
            return np.array([v == self.threshold for v in values], dtype=bool)
        values = np.asarray(values, dtype=float)
        with np.errstate(invalid="ignore"):
            if self.op == "<=":
                return values <= self.threshold
            return values >= self.threshold

    def describe(self) -> str:
        t = self.threshold
        if isinstance(t, float) and t.is_integer():
            t = int(t)
        name = self.column_name or f"x{self.column}"
        sym = {"<=": "≤", ">=": "≥", "=": "="}[self.op]
        return f"{name} {sym} {t}"

    def to_dict(self) -> dict:
        return {
            "column": self.column,
            "column_name": self.column_name,
            "op": self.op,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> FeatureFunction:
        t = d["threshold"]
        return cls(
            column=int(d["column"]),
            op=d["op"],
            threshold=t if d["op"] == "=" else float(t),
            column_name=d.get("column_name", ""),
        )


def feature_hash(features: Sequence[FeatureFunction]) -> str:
    blob = json.dumps([f.to_dict() for f in features], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    """Bit matrix ``delta`` (|N| x |P|), labels and feature metadata.

    ``obs_ids`` map rows back to the dataset they were drawn from, so a local
    sample keeps the identity of its observations.
    """

    delta: np.ndarray
    labels: np.ndarray
    features: tuple[FeatureFunction, ...]
    obs_ids: np.ndarray = None
    columns: tuple[str, ...] = ()
    outcome_name: str = "outcome"

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=bool)
        if delta.ndim != 2:
            delta = delta.reshape(len(self.labels), len(self.features))
        labels = np.asarray(self.labels, dtype=np.uint8)
        if labels.size and labels.max() > 1:
            raise ValueError("labels must be 0 or 1")
        ids = np.arange(len(labels)) if self.obs_ids is None else np.asarray(self.obs_ids)
        ids = ids.astype(np.int64)
        if not (delta.shape[0] == len(labels) == len(ids)):
            raise ValueError("delta rows, labels and obs_ids must have equal length")
        if delta.shape[1] != len(self.features):
            raise ValueError("delta columns must match the feature list")
        for a in (delta, labels, ids):
            a.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "obs_ids", ids)
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n_obs(self) -> int:
        return self.delta.shape[0]

    @property
    def n_features(self) -> int:
        return self.delta.shape[1]

    def __len__(self):
        return self.n_obs

    @cached_property
    def column_bits(self) -> tuple[int, ...]:
        """Per-feature satisfied set as an int bitset over rows."""
        if self.n_obs == 0:
            return (0,) * self.n_features
        packed = np.packbits(self.delta.T, axis=1, bitorder="little")
        return tuple(int.from_bytes(row.tobytes(), "little") for row in packed)

    @cached_property
    def label_bits(self) -> tuple[int, int]:
        """Bitsets of rows labelled 0 and 1."""
        ones = bits_of(self.labels == 1)
        return (((1 << self.n_obs) - 1) ^ ones, ones)

    @cached_property
    def feature_hash(self) -> str:
        return feature_hash(self.features)

    def row_of(self, obs_id: int) -> int:
        hits = np.flatnonzero(self.obs_ids == obs_id)
        if hits.size == 0:
            raise KeyError(f"no observation with id {obs_id}")
        return int(hits[0])

    def subset(self, rows=None, features=None) -> BinaryDataset:
        """Restrict to some rows and/or feature columns (order as given)."""
        rows = np.arange(self.n_obs) if rows is None else np.asarray(rows, dtype=np.int64)
        cols = np.arange(self.n_features) if features is None else np.asarray(features, dtype=np.int64)
        return BinaryDataset(
            delta=self.delta[np.ix_(rows, cols)],
            labels=self.labels[rows],
            features=tuple(self.features[c] for c in cols),
            obs_ids=self.obs_ids[rows],
            columns=self.columns,
            outcome_name=self.outcome_name,
        )

    # ---- persistence -------------------------------------------------------

    def _header(self) -> dict:
        return {
            "format": _MAGIC,
            "version": 1,
            "n_rows": self.n_obs,
            "n_features": self.n_features,
            "columns": list(self.columns),
            "outcome_name": self.outcome_name,
            "features": [f.to_dict() for f in self.features],
            "feature_hash": self.feature_hash,
            "obs_ids": self.obs_ids.tolist(),
            "labels": self.labels.tolist(),
        }

    def save(self, path) -> None:
        """Write to ``path``. ``.json`` gives pure JSON, anything else a JSON
        header line followed by the row-major packed bit payload."""
        path = Path(path)
        header = self._header()
        if path.suffix == ".json":
            header["payload"] = "json"
            header["delta"] = self.delta.astype(np.uint8).tolist()
            path.write_text(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
            return
        header["payload"] = "packbits-little-rowmajor"
        payload = np.packbits(self.delta, axis=1, bitorder="little")
        with path.open("wb") as fh:
            fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode())
            fh.write(b"\n")
            fh.write(payload.tobytes())

    @classmethod
    def load(cls, path) -> BinaryDataset:
        path = Path(path)
        with path.open("rb") as fh:
            line = fh.readline()
            try:
                header = json.loads(line)
            except ValueError:
                raise ValueError(f"{path}: not a binary-dataset file") from None
            if not isinstance(header, dict) or header.get("format") != _MAGIC:
                raise ValueError(f"{path}: not a binary-dataset file")
            n, p = header["n_rows"], header["n_features"]
            if header["payload"] == "json":
                delta = np.array(header["delta"], dtype=bool).reshape(n, p)
            else:
                width = (p + 7) // 8
                raw = np.frombuffer(fh.read(), dtype=np.uint8)
                if raw.size != n * width:
                    raise ValueError(f"{path}: truncated payload")
                delta = np.unpackbits(raw.reshape(n, width), axis=1, count=p, bitorder="little")
        features = tuple(FeatureFunction.from_dict(d) for d in header["features"])
        ds = cls(
            delta=delta.astype(bool),
            labels=np.array(header["labels"], dtype=np.uint8),
            features=features,
            obs_ids=np.array(header["obs_ids"], dtype=np.int64),
            columns=tuple(header["columns"]),
            outcome_name=header["outcome_name"],
        )
        if header.get("feature_hash") not in (None, ds.feature_hash):
            raise ValueError(f"{path}: feature hash does not match feature list")
        return ds


# --------------------------------------------------------------------------
# Binarization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BinarizeScheme:
    """``k`` equally spaced interior quantile thresholds per numeric column."""

    k: int = 9
    dedupe: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def apply_features(raw: RawDataset, features: Sequence[FeatureFunction]) -> BinaryDataset:
    """Evaluate every feature function on every row."""
    cols = {}
    delta = np.zeros((len(raw), len(features)), dtype=bool)
    for p, f in enumerate(features):
        if f.column not in cols:
            cols[f.column] = raw.column(f.column)
        delta[:, p] = f.evaluate(cols[f.column])
    return BinaryDataset(
        delta=delta,
        labels=raw.outcome,
        features=tuple(features),
        columns=raw.columns,
        outcome_name=raw.outcome_name,
    )


def _numeric_features(j: int, name: str, values: np.ndarray, scheme: BinarizeScheme):
    present = values[~np.isnan(values)]
    if present.size == 0 or present.min() == present.max():
        warnings.warn(f"column {name!r} is constant or empty; no features emitted", stacklevel=3)
        return []
    qs = np.arange(1, scheme.k + 1) / (scheme.k + 1)
    thresholds = np.unique(np.quantile(present, qs, method="lower"))
    out, seen = [], set()
    for op in ("<=", ">="):
        feats = [FeatureFunction(j, op, float(t), name) for t in thresholds]
        if scheme.dedupe:
            # loosest first, so the first of a run of identical columns survives;
            # ``seen`` spans both directions of the raw column
            order = feats[::-1] if op == "<=" else feats
            kept = []
            for f in order:
                key = f.evaluate(values).tobytes()
                if key not in seen:
                    seen.add(key)
                    kept.append(f)
            feats = sorted(kept, key=lambda f: f.threshold)
        out.extend(feats)
    return out


def binarize(raw: RawDataset, scheme: BinarizeScheme | None = None) -> BinaryDataset:
    """Quantile-threshold binarization.

    Each numeric column gets ``k`` thresholds at its interior quantiles, each in
    both directions (``<= t`` and ``>= t``); each categorical column one
    ``= v`` feature per distinct value.
    """
    scheme = scheme or BinarizeScheme()
    features = []
    for j, name in enumerate(raw.columns):
        col = raw.column(j)
        if raw.kinds[j] == "numeric":
            features.extend(_numeric_features(j, name, col, scheme))
        else:
            for v in sorted({v for v in col if v is not None}):
                features.append(FeatureFunction(j, "=", v, name))
    return apply_features(raw, features)


def sample_local(global_: BinaryDataset, size: int, seed=None, include: int | None = None) -> BinaryDataset:
    """Uniform sample of ``size`` rows without replacement (kept in global order).

    ``include`` forces one row into the sample; the other ``size - 1`` rows
    are then drawn from the rest.
    """
    if not 1 <= size <= global_.n_obs:
        raise ValueError(f"sample size {size} outside [1, {global_.n_obs}]")
    rng = np.random.default_rng(seed)
    if include is None:
        rows = rng.choice(global_.n_obs, size=size, replace=False)
    else:
        rest = np.delete(np.arange(global_.n_obs), include)
        rows = np.append(rng.choice(rest, size=size - 1, replace=False), include)
    return global_.subset(rows=np.sort(rows))


# --------------------------------------------------------------------------
# Synthetic data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    column: int
    op: str
    threshold: float

    def holds(self, X: np.ndarray) -> np.ndarray:
        return X[:, self.column] <= self.threshold if self.op == "<=" else X[:, self.column] >= self.threshold


@dataclass(frozen=True)
class SyntheticSpec:
    """Uniform integer columns on [low, high]; outcome = OR of planted
    conjunctions, each label flipped independently with probability ``noise``."""

    n_rows: int
    n_numeric: int
    rules: tuple[tuple[Condition, ...], ...]
    noise: float = 0.0
    low: int = 0
    high: int = 100

    def __post_init__(self):
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise rate must lie in [0, 1]")
        if self.n_rows < 0 or self.n_numeric < 1:
            raise ValueError("need n_rows >= 0 and n_numeric >= 1")
        for rule in self.rules:
            for c in rule:
                if not 0 <= c.column < self.n_numeric or c.op not in ("<=", ">="):
                    raise ValueError(f"bad planted condition {c}")


def default_rules() -> tuple[tuple[Condition, ...], ...]:
    """Two overlapping planted conjunctions on the first four columns."""
    return (
        (Condition(0, "<=", 60), Condition(1, "<=", 55)),
        (Condition(2, ">=", 45), Condition(3, ">=", 40), Condition(0, ">=", 30)),
    )


def synthesize(spec: SyntheticSpec, seed=None) -> RawDataset:
    rng = np.random.default_rng(seed)
    X = rng.integers(spec.low, spec.high + 1, size=(spec.n_rows, spec.n_numeric))
    y = np.zeros(spec.n_rows, dtype=bool)
    for rule in spec.rules:
        hit = np.ones(spec.n_rows, dtype=bool)
        for c in rule:
            hit &= c.holds(X)
        y |= hit
    flip = rng.random(spec.n_rows) < spec.noise
    y ^= flip
    columns = tuple(f"x{j}" for j in range(spec.n_numeric))
    rows = tuple(tuple(float(v) for v in r) for r in X)
    return RawDataset(columns=columns, rows=rows, outcome=y.astype(np.uint8))


def planted_features(spec: SyntheticSpec, rule: int = 0) -> list[FeatureFunction]:
    """Feature functions spelling out planted rule ``rule``."""
    return [
        FeatureFunction(c.column, c.op, float(c.threshold), f"x{c.column}") for c in spec.rules[rule]
    ]
