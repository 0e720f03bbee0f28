"""Ingestion, encoding and normalization of NSL-KDD style connection records."""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nslkdd


class DataError(ValueError):
    """Raised for malformed, unknown or unencodable input data."""


class ParseError(DataError):
    pass


KINDS = ("continuous", "integer", "binary", "categorical")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    levels: tuple = ()
    start: int = 0
    stop: int = 1

    @property
    def span(self):
        return slice(self.start, self.stop)

    @property
    def width(self):
        return self.stop - self.start


class FeatureSchema:
    """Ordered feature specs whose spans partition the encoded vector."""

    def __init__(self, columns, levels=None):
        levels = levels or {}
        specs = []
        offset = 0
        for name, kind in columns:
            if kind not in KINDS:
                raise DataError(f"{name}: unknown feature kind {kind!r}")
            if kind == "categorical":
                lv = tuple(levels.get(name, ()))
                if not lv:
                    raise DataError(f"{name}: categorical feature needs at least one level")
                width = len(lv)
            else:
                if levels.get(name):
                    raise DataError(f"{name}: only categorical features carry levels")
                lv, width = (), 1
            specs.append(FeatureSpec(name, kind, lv, offset, offset + width))
            offset += width
        self.features = tuple(specs)
        self.encoded_dim = offset
        self._by_name = {f.name: f for f in specs}
        self._level_index = {f.name: {lv: i for i, lv in enumerate(f.levels)} for f in specs}
        self.kind_slots = {k: np.array([f.start for f in specs if f.kind == k], dtype=np.intp)
                           for k in KINDS if k != "categorical"}
        self.categorical_spans = [f.span for f in specs if f.kind == "categorical"]

    def __getitem__(self, name):
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"no feature named {name!r}") from None

    def __iter__(self):
        return iter(self.features)

    def __len__(self):
        return len(self.features)

    def __eq__(self, other):
        return isinstance(other, FeatureSchema) and self.features == other.features

    @classmethod
    def fit(cls, *record_lists, columns=nslkdd.COLUMNS):
        """Build a schema whose categorical levels are the sorted union seen in the records."""
        seen = {name: set() for name, kind in columns if kind == "categorical"}
        cat_cols = [(i, name) for i, (name, kind) in enumerate(columns) if kind == "categorical"]
        for records in record_lists:
            for rec in records:
                for i, name in cat_cols:
                    seen[name].add(rec.values[i])
        return cls(columns, {name: sorted(v) for name, v in seen.items()})

    def index_of_level(self, name, level):
        return self._level_index[name].get(level)

    def to_dict(self):
        return {"features": [{"name": f.name, "kind": f.kind, "levels": list(f.levels)}
                             for f in self.features]}

    @classmethod
    def from_dict(cls, d):
        cols = [(f["name"], f["kind"]) for f in d["features"]]
        levels = {f["name"]: f["levels"] for f in d["features"] if f["levels"]}
        return cls(cols, levels)

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class RawRecord:
    values: tuple
    label: str
    difficulty: Optional[int] = None


def parse_records(lines, columns=nslkdd.COLUMNS):
    """Parse comma-separated record lines; blank lines are skipped."""
    n = len(columns)
    kinds = [kind for _, kind in columns]
    records = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) not in (n + 1, n + 2):
            raise ParseError(f"line {lineno}: expected ≥{n + 1} fields (at most {n + 2}), got {len(fields)}")
        values = []
        for (name, _), kind, raw in zip(columns, kinds, fields):
            if kind == "categorical":
                values.append(raw)
                continue
            try:
                values.append(float(raw))
            except ValueError:
                raise ParseError(f"line {lineno}: column {name}: non-numeric value {raw!r}") from None
        difficulty = None
        if len(fields) == n + 2:
            try:
                difficulty = int(fields[-1])
            except ValueError:
                raise ParseError(f"line {lineno}: difficulty: non-integer value {fields[-1]!r}") from None
        records.append(RawRecord(tuple(values), fields[n].rstrip("."), difficulty))
    return records


def read_records(path, columns=nslkdd.COLUMNS):
    with open(path, encoding="utf-8") as fh:
        return parse_records(fh, columns)


def filter_and_relabel(records):
    """Keep Normal/DOS/Probe records paired with their class label; drop R2L and U2R."""
    out = []
    unknown = set()
    for rec in records:
        category = nslkdd.ATTACK_CATEGORIES.get(rec.label.lower())
        if category is None:
            unknown.add(rec.label)
            continue
        label = nslkdd.KEPT_CATEGORIES.get(category)
        if label is not None:
            out.append((rec, label))
    if unknown:
        raise DataError(f"unknown attack names: {', '.join(sorted(unknown))}")
    return out


def encode(records, schema):
    """Encode records into the (denormalized) numeric space; categoricals become one-hot."""
    X = np.zeros((len(records), schema.encoded_dim))
    for r, rec in enumerate(records):
        if len(rec.values) != len(schema):
            raise DataError(f"record {r}: expected {len(schema)} values, got {len(rec.values)}")
        for f, v in zip(schema.features, rec.values):
            if f.kind == "categorical":
                j = schema.index_of_level(f.name, v)
                if j is None:
                    raise DataError(f"{f.name}: unseen level {v!r}")
                X[r, f.start + j] = 1.0
            else:
                X[r, f.start] = v
    return X


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DataError("mean and std must be vectors of equal length")
        if not np.all(self.std > 0):
            raise DataError("std entries must be strictly positive")

    @property
    def dim(self):
        return self.mean.shape[0]

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(self.mean.astype("<f8").tobytes())
        h.update(self.std.astype("<f8").tobytes())
        return h.hexdigest()


def fit_normalization(train_matrix):
    X = np.asarray(train_matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("need a non-empty 2-D training matrix")
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return NormalizationStats(X.mean(axis=0), std)


def _check_dim(x, stats):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != stats.dim:
        raise DataError(f"dimension mismatch: got {x.shape[-1]}, stats have {stats.dim}")
    return x


def normalize(x, stats):
    return (_check_dim(x, stats) - stats.mean) / stats.std


def denormalize(x, stats):
    return _check_dim(x, stats) * stats.std + stats.mean


def compute_bounds(train_matrix_normalized):
    X = np.asarray(train_matrix_normalized, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("need a non-empty 2-D matrix")
    return X.min(axis=0), X.max(axis=0)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema
    stats: NormalizationStats
    x_min: np.ndarray
    x_max: np.ndarray
    difficulty: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx):
        diff = None if self.difficulty is None else self.difficulty[idx]
        return Dataset(self.X[idx], self.y[idx], self.schema, self.stats, self.x_min, self.x_max, diff)

    def class_counts(self):
        return np.bincount(self.y, minlength=nslkdd.N_CLASSES)


def make_dataset(labelled, schema, stats, bounds):
    """Encode and normalize ``(RawRecord, label)`` pairs with already-fitted schema/stats/bounds."""
    records = [rec for rec, _ in labelled]
    y = np.array([lab for _, lab in labelled], dtype=np.intp)
    X = normalize(encode(records, schema), stats) if records else np.zeros((0, schema.encoded_dim))
    diff = np.array([-1 if r.difficulty is None else r.difficulty for r in records], dtype=np.int64)
    return Dataset(X, y, schema, stats, bounds[0], bounds[1], diff)


def build_datasets(train_records, test_records=()):
    """Full ingestion pipeline for the official split.

    Categorical levels come from train and test together; normalization
    statistics and box bounds from the training split only.
    """
    train = filter_and_relabel(train_records)
    test = filter_and_relabel(test_records)
    if not train:
        raise DataError("no Normal/DOS/Probe records in the training data")
    schema = FeatureSchema.fit([r for r, _ in train], [r for r, _ in test])
    raw = encode([r for r, _ in train], schema)
    stats = fit_normalization(raw)
    bounds = compute_bounds(normalize(raw, stats))
    return make_dataset(train, schema, stats, bounds), make_dataset(test, schema, stats, bounds)


def balanced_minibatch(dataset, batch_size, rng):
    """Draw a class-balanced minibatch with replacement.

    ``dataset`` may be a Dataset or an ``(X, y)`` pair. Per-class counts are
    ``batch_size // n_classes`` with the remainder going to the lowest class
    indices.
    """
    X, y = (dataset.X, dataset.y) if isinstance(dataset, Dataset) else dataset
    n_classes = nslkdd.N_CLASSES
    if batch_size < n_classes:
        raise DataError(f"batch_size must be at least {n_classes}")
    base, extra = divmod(batch_size, n_classes)
    picks = []
    for c in range(n_classes):
        members = np.flatnonzero(y == c)
        if members.size == 0:
            raise DataError(f"class {nslkdd.CLASS_NAMES[c]} has no samples")
        picks.append(members[rng.integers(0, members.size, size=base + (c < extra))])
    idx = np.concatenate(picks)
    return X[idx], y[idx]
