"""Tabular schema, CSV ingestion and the preprocessing chain.

The chain mirrors the crash-record pipeline::

    load_csv -> clean -> derive_features -> binarize_target -> encode
             -> stratified_split -> scale_minmax (fit on train, reuse on test)

Every step returns a new object; inputs are never mutated.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DataError, EmptyDatasetError, SchemaError

KINDS = ("numeric", "categorical", "ordinal")
FATAL = "Fatal"
NON_FATAL = "Non Fatal"

# hour ranges are inclusive
TIME_BUCKETS = (("night", 0, 5), ("morning", 6, 11), ("afternoon", 12, 17), ("evening", 18, 23))
DAY_COLUMN = "Day of week"
TIME_COLUMN = "Time"
WEEKEND_COLUMN = "Weekend"
TIME_OF_DAY_COLUMN = "Time of day"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    categories: tuple[str, ...] = ()
    value_range: tuple[float, float] | None = None
    derived: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "numeric":
            if self.value_range is None:
                raise SchemaError(f"numeric column {self.name!r} needs a value_range")
            lo, hi = self.value_range
            if not lo <= hi:
                raise SchemaError(f"numeric column {self.name!r}: lower bound exceeds upper bound")
        else:
            if len(self.categories) < 2:
                raise SchemaError(f"column {self.name!r} needs at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r} has duplicate categories")

    @property
    def is_numeric(self) -> bool:
        return self.kind == "numeric"

    def admits(self, value) -> bool:
        if value is None:
            return False
        if self.is_numeric:
            lo, hi = self.value_range
            return lo <= value <= hi
        return value in self.categories

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.is_numeric:
            d["value_range"] = list(self.value_range)
        else:
            d["categories"] = list(self.categories)
        if self.derived:
            d["derived"] = True
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnSpec":
        vr = d.get("value_range")
        return cls(
            name=d["name"],
            kind=d["kind"],
            categories=tuple(d.get("categories", ())),
            value_range=tuple(float(v) for v in vr) if vr is not None else None,
            derived=bool(d.get("derived", False)),
        )


@dataclass(frozen=True)
class TabularSchema:
    """Declared feature columns, the binary target and the raw severity column.

    ``severity`` is the four-level outcome found in raw exports; it is folded
    into ``target`` by :func:`binarize_target`.
    """

    features: tuple[ColumnSpec, ...]
    target: ColumnSpec
    severity: ColumnSpec | None = None
    weekend_days: tuple[str, ...] = ("Friday", "Saturday")
    name: str = "schema"
    version: str = "1"

    def __post_init__(self):
        names = [c.name for c in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.target.name in names:
            raise SchemaError("target column must not be a feature")
        if self.target.kind != "ordinal" or tuple(self.target.categories) != (NON_FATAL, FATAL):
            raise SchemaError(f"target must be ordinal with categories [{NON_FATAL}, {FATAL}]")
        if self.severity is not None and self.severity.name in names + [self.target.name]:
            raise SchemaError("severity column name collides with another column")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.features)

    @property
    def raw_features(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.features if not c.derived)

    def column(self, name: str) -> ColumnSpec:
        for c in self.features:
            if c.name == name:
                return c
        if name == self.target.name:
            return self.target
        if self.severity is not None and name == self.severity.name:
            return self.severity
        raise SchemaError(f"unknown column {name!r}")

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "version": self.version,
            "features": [c.to_dict() for c in self.features],
            "target": self.target.to_dict(),
            "metadata": {"weekend_days": list(self.weekend_days)},
        }
        if self.severity is not None:
            d["severity"] = self.severity.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TabularSchema":
        try:
            meta = d.get("metadata", {})
            return cls(
                features=tuple(ColumnSpec.from_dict(c) for c in d["features"]),
                target=ColumnSpec.from_dict(d["target"]),
                severity=ColumnSpec.from_dict(d["severity"]) if d.get("severity") else None,
                weekend_days=tuple(meta.get("weekend_days", ("Friday", "Saturday"))),
                name=d.get("name", "schema"),
                version=str(d.get("version", "1")),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc


def load_schema(path: str | Path | None = None) -> TabularSchema:
    """Load a schema JSON file; with no path, the shipped crash schema."""
    if path is None:
        text = resources.files("crashshap").joinpath("data/crash_schema.json").read_text("utf-8")
    else:
        try:
            text = Path(path).read_text("utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    try:
        return TabularSchema.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema is not valid JSON: {exc}") from exc


BUNDLED_DATA = "data/synthetic_seed42.csv"


def bundled_data_path() -> Path:
    """The shipped 1700-row synthetic set (``crashshap synth`` defaults)."""
    return Path(str(resources.files("crashshap").joinpath(BUNDLED_DATA)))


@dataclass(frozen=True)
class RawTable:
    schema: TabularSchema
    columns: tuple[str, ...]
    rows: tuple[dict, ...]

    def __len__(self):
        return len(self.rows)

    def column_values(self, name: str) -> list:
        return [r[name] for r in self.rows]


# ---------------------------------------------------------------------------
# CSV

def _parse_cell(spec: ColumnSpec, text: str):
    text = text.strip()
    if text == "":
        return None
    if spec.is_numeric:
        try:
            v = float(text)
        except ValueError:
            return None
        return v if math.isfinite(v) else None
    return text


def load_csv(path: str | Path, schema: TabularSchema) -> RawTable:
    """Read a comma-separated UTF-8 file whose header names schema columns.

    Raw feature columns are required, as is either the severity column or the
    binarized target. Derived columns may be present. Unparseable or empty
    cells become ``None``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise SchemaError(f"{path}: duplicate header columns {dupes}")
        allowed = set(schema.feature_names) | {schema.target.name}
        if schema.severity is not None:
            allowed.add(schema.severity.name)
        unknown = [h for h in header if h not in allowed]
        if unknown:
            raise SchemaError(f"{path}: unknown header columns {unknown}")
        missing = [c.name for c in schema.raw_features if c.name not in header]
        outcome = [h for h in header if h == schema.target.name or (schema.severity and h == schema.severity.name)]
        if not outcome:
            missing.append(schema.severity.name if schema.severity else schema.target.name)
        if missing:
            raise SchemaError(f"{path}: missing header columns {missing}")

        specs = [schema.column(h) for h in header]
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(record)}")
            rows.append({h: _parse_cell(s, cell) for h, s, cell in zip(header, specs, record)})
    ordered = [c.name for c in schema.features if c.name in header]
    ordered += [h for h in header if h not in ordered]
    rows = [{c: r[c] for c in ordered} for r in rows]
    return RawTable(schema, tuple(ordered), tuple(rows))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


def write_csv(table: RawTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([_fmt(r[c]) for c in table.columns])


# ---------------------------------------------------------------------------
# cleaning and derived columns

def _row_ok(row: dict, specs: Sequence[ColumnSpec]) -> bool:
    for s in specs:
        v = row[s.name]
        if v is None:
            return False
        # out-of-range numerics count as nulls; categorical admissibility is checked by encode
        if s.is_numeric and not s.admits(v):
            return False
    return True


def clean(table: RawTable) -> RawTable:
    """Drop every row holding a null (or out-of-range numeric) cell."""
    specs = [table.schema.column(c) for c in table.columns]
    kept = tuple(r for r in table.rows if _row_ok(r, specs))
    if not kept:
        raise EmptyDatasetError("cleaning eliminated every row")
    return replace(table, rows=kept)


def time_bucket(hour) -> str:
    h = int(math.floor(hour))
    for name, lo, hi in TIME_BUCKETS:
        if lo <= h <= hi:
            return name
    raise DataError(f"hour {hour!r} outside 0-23")


def derive_features(table: RawTable) -> RawTable:
    """Add the weekend indicator and the time-of-day bucket.

    Each derived column is produced only when the schema declares it, so
    schemas without calendar columns pass through unchanged.
    """
    declared = set(table.schema.feature_names)
    wanted = [(WEEKEND_COLUMN, DAY_COLUMN), (TIME_OF_DAY_COLUMN, TIME_COLUMN)]
    wanted = [(d, src) for d, src in wanted if d in declared]
    for _, src in wanted:
        if src not in table.columns:
            raise DataError(f"derive_features needs column {src!r}")
    if not wanted:
        return table
    weekend = set(table.schema.weekend_days)
    rows = []
    for r in table.rows:
        r = dict(r)
        for d, src in wanted:
            v = r[src]
            if d == WEEKEND_COLUMN:
                r[d] = None if v is None else float(v in weekend)
            else:
                r[d] = None if v is None else time_bucket(v)
        rows.append(r)
    names = set(table.columns) | {d for d, _ in wanted}
    ordered = [c.name for c in table.schema.features if c.name in names]
    ordered += [c for c in table.columns if c not in ordered]
    return RawTable(table.schema, tuple(ordered), tuple({c: r[c] for c in ordered} for r in rows))


def binarize_target(table: RawTable) -> RawTable:
    """Fold Serious/Slight/No Injury into Non Fatal; keep Fatal."""
    schema = table.schema
    tname = schema.target.name
    if tname in table.columns:
        for r in table.rows:
            if r[tname] not in (FATAL, NON_FATAL):
                raise DataError(f"unknown target value {r[tname]!r}")
        return table
    if schema.severity is None or schema.severity.name not in table.columns:
        raise DataError("table has neither a severity nor a target column")
    sname = schema.severity.name
    rows = []
    for r in table.rows:
        v = r[sname]
        if v not in schema.severity.categories:
            raise DataError(f"unknown severity value {v!r}")
        r = {c: r[c] for c in table.columns if c != sname}
        r[tname] = FATAL if v == FATAL else NON_FATAL
        rows.append(r)
    cols = tuple(c for c in table.columns if c != sname) + (tname,)
    return RawTable(schema, cols, tuple(rows))


# ---------------------------------------------------------------------------
# encoding and scaling

@dataclass(frozen=True)
class EncodedMatrix:
    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    encoding_maps: dict = field(default_factory=dict)
    scale_params: tuple | None = None

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape[1] != len(self.feature_names):
            raise DataError("x must be n x p with one name per column")
        if self.y.shape != (self.x.shape[0],):
            raise DataError("y must have one label per row")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def class_counts(self) -> tuple[int, int]:
        pos = int(self.y.sum())
        return self.n - pos, pos

    def subset(self, rows) -> "EncodedMatrix":
        rows = np.asarray(rows, dtype=np.intp)
        return replace(self, x=self.x[rows], y=self.y[rows])

    def select(self, names: Sequence[str]) -> "EncodedMatrix":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise DataError(f"unknown features {missing}")
        idx = [self.feature_names.index(n) for n in names]
        params = None if self.scale_params is None else tuple(self.scale_params[i] for i in idx)
        maps = {n: self.encoding_maps[n] for n in names if n in self.encoding_maps}
        return EncodedMatrix(self.x[:, idx], self.y, tuple(names), maps, params)

    def decode(self, feature: str, code: int) -> str:
        inverse = {v: k for k, v in self.encoding_maps[feature].items()}
        return inverse[int(code)]


def fit_encoding(table: RawTable) -> dict:
    """Category -> code tables: sorted observed values (categorical), declared order (ordinal)."""
    maps = {}
    for name in table.columns:
        spec = table.schema.column(name)
        if name == table.schema.target.name or spec.is_numeric:
            continue
        if spec.kind == "ordinal":
            maps[name] = {c: i for i, c in enumerate(spec.categories)}
        else:
            observed = {r[name] for r in table.rows}
            bad = sorted(v for v in observed if not spec.admits(v))
            if bad:
                raise SchemaError(f"column {name!r}: inadmissible categories {bad}")
            maps[name] = {c: i for i, c in enumerate(sorted(observed))}
    return maps


def encode(table: RawTable, encoding_maps: Mapping | None = None) -> EncodedMatrix:
    """Turn a cleaned, binarized table into a numeric matrix.

    Pass ``encoding_maps`` from a previous fit to encode new data with the
    same codes.
    """
    schema = table.schema
    tname = schema.target.name
    if tname not in table.columns:
        raise DataError("encode needs a binarized target column")
    names = [c.name for c in schema.features if c.name in table.columns]
    maps = fit_encoding(table) if encoding_maps is None else {k: dict(v) for k, v in encoding_maps.items()}
    x = np.empty((len(table.rows), len(names)), dtype=np.float64)
    for j, name in enumerate(names):
        spec = schema.column(name)
        col = table.column_values(name)
        if spec.is_numeric:
            if any(v is None for v in col):
                raise DataError(f"column {name!r} holds nulls; run clean first")
            x[:, j] = col
            continue
        table_map = maps.get(name)
        if table_map is None:
            raise DataError(f"no encoding map for column {name!r}")
        for i, v in enumerate(col):
            if not spec.admits(v):
                raise SchemaError(f"column {name!r}: inadmissible category {v!r}")
            if v not in table_map:
                raise DataError(f"column {name!r}: category {v!r} unseen when encoding was fit")
            x[i, j] = table_map[v]
    target_codes = {c: i for i, c in enumerate(schema.target.categories)}
    y = np.array([target_codes[v] for v in table.column_values(tname)], dtype=np.int64)
    maps = {k: v for k, v in maps.items() if k in names}
    return EncodedMatrix(x, y, tuple(names), maps)


def fit_scaler(matrix: EncodedMatrix) -> tuple:
    if matrix.n == 0:
        raise EmptyDatasetError("cannot fit scaling on zero rows")
    lo = matrix.x.min(axis=0)
    hi = matrix.x.max(axis=0)
    return tuple((float(a), float(b)) for a, b in zip(lo, hi))


def scale_minmax(matrix: EncodedMatrix, params: Sequence | None = None) -> EncodedMatrix:
    """Min-max scale to [0, 1].

    With ``params`` None the parameters are fit on ``matrix`` itself. Values
    outside a reused range are clamped; constant columns map to 0.
    """
    if params is None:
        params = fit_scaler(matrix)
    params = tuple((float(a), float(b)) for a, b in params)
    if len(params) != matrix.p:
        raise DataError("scale params do not match the feature count")
    lo = np.array([a for a, _ in params])
    hi = np.array([b for _, b in params])
    span = hi - lo
    const = span <= 0
    safe = np.where(const, 1.0, span)
    x = (matrix.x - lo) / safe
    x[:, const] = 0.0
    np.clip(x, 0.0, 1.0, out=x)
    return replace(matrix, x=x, scale_params=params)


# ---------------------------------------------------------------------------
# splitting

def split_indices(y: np.ndarray, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if len(idx) < 2:
            raise DataError(f"class {cls} has {len(idx)} rows; need at least 2 to stratify")
        n_test = int(math.floor(len(idx) * test_fraction + 0.5))
        if n_test == 0 or n_test == len(idx):
            raise DataError(f"class {cls} too small to stratify at fraction {test_fraction}")
        test.append(rng.permutation(idx)[:n_test])
    test_idx = np.sort(np.concatenate(test))
    mask = np.ones(len(y), dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


def stratified_split(matrix: EncodedMatrix, test_fraction: float, seed: int):
    """Return ``(train, test)`` with per-class test counts round(count * fraction)."""
    train_idx, test_idx = split_indices(matrix.y, test_fraction, seed)
    return matrix.subset(train_idx), matrix.subset(test_idx)


# ---------------------------------------------------------------------------
# synthetic data

@dataclass(frozen=True)
class SignalSpec:
    """Ground-truth log-odds weights for the synthetic generator.

    Each weighted column contributes ``weight * s`` where ``s`` runs linearly
    from -1 to +1 over the column's code range (sorted categories, declared
    ordinal order, or the numeric range). ``fatal_ratio`` is fatal:non-fatal.
    """

    weights: Mapping[str, float] = field(default_factory=dict)
    fatal_ratio: tuple[float, float] = (1165.0, 535.0)

    @property
    def prior(self) -> float:
        f, nf = self.fatal_ratio
        return f / (f + nf)

    def ranking(self) -> list[tuple[str, float]]:
        return sorted(self.weights.items(), key=lambda kv: (-abs(kv[1]), kv[0]))

    def to_dict(self) -> dict:
        return {
            "weights": dict(self.weights),
            "fatal_ratio": list(self.fatal_ratio),
            "prior": self.prior,
            "ranking": [name for name, _ in self.ranking()],
        }


DEFAULT_SIGNAL = SignalSpec(
    weights={
        "Casualty class": 4.0,
        "Time": 3.0,
        "Sub-district": 2.0,
        "Vehicle type": 1.75,
        "Road class": 1.5,
    }
)

_NON_FATAL_SEVERITY = (("Serious", 0.96), ("Slight", 0.03), ("No Injury", 0.01))


def _signed_position(spec: ColumnSpec, values: np.ndarray) -> np.ndarray:
    if spec.is_numeric:
        lo, hi = spec.value_range
        return 2.0 * (values - lo) / (hi - lo) - 1.0 if hi > lo else np.zeros(len(values))
    k = len(spec.categories)
    return 2.0 * values / (k - 1) - 1.0


def generate_synthetic(schema: TabularSchema, n: int, seed: int, signal: SignalSpec | None = None) -> RawTable:
    """Sample a raw table with a known logistic dependence of fatality on features.

    Columns are drawn independently (uniform categories, uniform integer
    ranges). A latent score ``sum(w * s) + Logistic(0, 1)`` is computed per
    row and the top ``round(n * prior)`` rows are labelled Fatal, so the class
    ratio is exact and the ordering of feature weights is the ground truth.
    """
    if n < 50:
        raise DataError(f"n must be at least 50, got {n}")
    signal = DEFAULT_SIGNAL if signal is None else signal
    raw = {c.name: c for c in schema.raw_features}
    unknown = [k for k in signal.weights if k not in raw]
    if unknown:
        raise DataError(f"signal references unknown or derived features {unknown}")
    if schema.severity is None:
        raise SchemaError("schema needs a severity column to synthesize raw data")

    rng = np.random.default_rng(seed)
    columns: dict[str, list] = {}
    latent = np.zeros(n)
    for spec in schema.raw_features:
        if spec.is_numeric:
            lo, hi = (int(v) for v in spec.value_range)
            draw = rng.integers(lo, hi + 1, size=n).astype(np.float64)
            columns[spec.name] = [float(v) for v in draw]
            pos = draw
        else:
            draw = rng.integers(0, len(spec.categories), size=n)
            columns[spec.name] = [spec.categories[i] for i in draw]
            if spec.kind == "categorical":
                # contributions follow sorted order so they line up with encode()
                order = {c: i for i, c in enumerate(sorted(spec.categories))}
                pos = np.array([order[spec.categories[i]] for i in draw], dtype=np.float64)
            else:
                pos = draw.astype(np.float64)
        w = signal.weights.get(spec.name, 0.0)
        if w:
            latent += w * _signed_position(spec, pos)
    latent += rng.logistic(0.0, 1.0, size=n)

    n_fatal = int(math.floor(n * signal.prior + 0.5))
    order = np.argsort(-latent, kind="stable")
    fatal = np.zeros(n, dtype=bool)
    fatal[order[:n_fatal]] = True

    labels, probs = zip(*_NON_FATAL_SEVERITY)
    nf_draw = rng.choice(len(labels), size=n, p=np.array(probs))
    severity = [FATAL if fatal[i] else labels[nf_draw[i]] for i in range(n)]

    sname = schema.severity.name
    cols = tuple(c.name for c in schema.raw_features) + (sname,)
    rows = tuple(
        {**{c: columns[c][i] for c in cols[:-1]}, sname: severity[i]} for i in range(n)
    )
    return RawTable(schema, cols, rows)


def preprocess(table: RawTable, encoding_maps: Mapping | None = None) -> EncodedMatrix:
    """clean -> derive_features -> binarize_target -> encode."""
    return encode(binarize_target(derive_features(clean(table))), encoding_maps)
