"""
Typed mixed continuous/categorical tables, CSV/JSON I/O and dataset recipes.

A :class:`DataTable` is stored column-wise. Continuous columns are float64
arrays with ``NaN`` marking a missing cell; categorical columns are int64
arrays of category indices with ``-1`` marking a missing cell. Category
dictionaries live in the :class:`ColumnSpec`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ColumnTypeError, ImputationError, ParseError, PreparationError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
MISSING_CODE = -1
DEFAULT_MISSING_TOKENS = frozenset({"", "NA", "?"})
INFER_DISTINCT_THRESHOLD = 20


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    categories: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == CONTINUOUS and self.categories:
            raise ValueError(f"continuous column {self.name!r} cannot have categories")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"column {self.name!r} has duplicate categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "categories": list(self.categories)}

    @classmethod
    def from_json(cls, obj: dict) -> "ColumnSpec":
        return cls(obj["name"], obj["kind"], tuple(obj.get("categories", ())))


def check_schema(schema: Sequence[ColumnSpec]) -> None:
    names = [c.name for c in schema]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ValueError(f"duplicate column names: {sorted(dup)}")


class DataTable:
    """Column-wise table of typed cells."""

    def __init__(self, schema: Sequence[ColumnSpec], columns: Sequence[np.ndarray]):
        schema = list(schema)
        check_schema(schema)
        if len(schema) != len(columns):
            raise ValueError(f"{len(schema)} column specs for {len(columns)} columns")
        cols = []
        n = None
        for spec, col in zip(schema, columns):
            if spec.is_categorical:
                col = np.asarray(col, dtype=np.int64).reshape(-1)
                bad = (col < MISSING_CODE) | (col >= len(spec.categories))
                if bad.any():
                    raise ValueError(
                        f"column {spec.name!r}: category index out of range at row {int(np.argmax(bad))}"
                    )
            else:
                col = np.asarray(col, dtype=np.float64).reshape(-1)
            if n is None:
                n = col.shape[0]
            elif col.shape[0] != n:
                raise ValueError(f"column {spec.name!r} has {col.shape[0]} rows, expected {n}")
            cols.append(col)
        self.schema = schema
        self.columns = cols

    @property
    def n_rows(self) -> int:
        return self.columns[0].shape[0] if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    def __len__(self):
        return self.n_rows

    def __repr__(self):
        return f"DataTable({self.n_rows} rows, columns={self.names})"

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no column named {name!r}") from None

    def spec(self, name: str) -> ColumnSpec:
        return self.schema[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.index(name)]

    def missing_mask(self, name: str) -> np.ndarray:
        col = self.column(name)
        return col == MISSING_CODE if self.spec(name).is_categorical else np.isnan(col)

    def has_missing(self) -> bool:
        return any(self.missing_mask(n).any() for n in self.names)

    def labels(self, name: str) -> list:
        """Cell values of one column as python objects (strings, floats or ``None``)."""
        spec = self.spec(name)
        col = self.column(name)
        if spec.is_categorical:
            return [None if i == MISSING_CODE else spec.categories[i] for i in col]
        return [None if math.isnan(v) else float(v) for v in col]

    def rows(self) -> list[tuple]:
        return list(zip(*(self.labels(n) for n in self.names)))

    def replace(self, name: str, spec: ColumnSpec, column: np.ndarray) -> "DataTable":
        i = self.index(name)
        schema, cols = list(self.schema), list(self.columns)
        schema[i], cols[i] = spec, column
        return DataTable(schema, cols)

    def select(self, names: Sequence[str]) -> "DataTable":
        return DataTable([self.spec(n) for n in names], [self.column(n) for n in names])

    def take(self, rows) -> "DataTable":
        rows = np.asarray(rows, dtype=np.int64)
        return DataTable(self.schema, [c[rows] for c in self.columns])

    def equals(self, other: "DataTable") -> bool:
        if self.schema != other.schema or self.n_rows != other.n_rows:
            return False
        return all(
            np.array_equal(a, b, equal_nan=not s.is_categorical)
            for s, a, b in zip(self.schema, self.columns, other.columns)
        )

    @classmethod
    def from_labels(cls, schema: Sequence[ColumnSpec], data: dict[str, Sequence]) -> "DataTable":
        """Build a table from per-column label lists; ``None`` marks a missing cell.

        Categorical columns whose spec has no categories get a dictionary in
        first-appearance order.
        """
        specs, cols = [], []
        for spec in schema:
            values = data[spec.name]
            if spec.is_categorical:
                cats = list(spec.categories)
                lookup = {c: i for i, c in enumerate(cats)}
                col = np.empty(len(values), dtype=np.int64)
                for r, v in enumerate(values):
                    if v is None:
                        col[r] = MISSING_CODE
                        continue
                    v = str(v)
                    if v not in lookup:
                        if spec.categories:
                            raise ValueError(f"column {spec.name!r}: unknown category {v!r}")
                        lookup[v] = len(cats)
                        cats.append(v)
                    col[r] = lookup[v]
                spec = ColumnSpec(spec.name, CATEGORICAL, tuple(cats))
            else:
                col = np.array([np.nan if v is None else float(v) for v in values], dtype=np.float64)
            specs.append(spec)
            cols.append(col)
        return cls(specs, cols)


# ---------------------------------------------------------------------------
# CSV and schema files


def _parse_float(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _infer_kind(cells: Iterable[str | None]) -> str:
    distinct = set()
    for c in cells:
        if c is None:
            continue
        if _parse_float(c) is None:
            return CATEGORICAL
        distinct.add(c)
    return CONTINUOUS if len(distinct) > INFER_DISTINCT_THRESHOLD else CATEGORICAL


def load_csv(
    path,
    schema: Sequence[ColumnSpec] | None = None,
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
    names: Sequence[str] | None = None,
) -> DataTable:
    """Read a header-first CSV into a :class:`DataTable`.

    Without ``schema`` a column is continuous when every non-missing cell is
    numeric and it has more than 20 distinct values. With a schema, declared
    categories are enforced; a categorical spec with no categories collects
    them in first-appearance order. Surrounding whitespace is stripped from
    every cell before the missing-token check. Passing ``names`` reads a
    headerless file, using ``names`` as the header.
    """
    path = Path(path)
    missing_tokens = frozenset(missing_tokens)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if names is not None:
                header, first_line = [str(n) for n in names], 1
            else:
                try:
                    header = [h.strip() for h in next(reader)]
                except StopIteration:
                    raise ParseError(f"{path}: empty file, expected a header row") from None
                first_line = 2
            raw = []
            for line_no, record in enumerate(reader, start=first_line):
                if not record:
                    continue
                if len(record) != len(header):
                    raise ParseError(
                        f"{path}: row {line_no} has {len(record)} fields, header has {len(header)}"
                    )
                cells = [cell.strip() for cell in record]
                raw.append([None if c in missing_tokens else c for c in cells])
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc

    if schema is None:
        schema = [
            ColumnSpec(name, _infer_kind(row[j] for row in raw)) for j, name in enumerate(header)
        ]
    else:
        schema = list(schema)
        declared = [c.name for c in schema]
        if declared != header:
            raise ParseError(f"{path}: header {header} does not match schema columns {declared}")

    data = {}
    for j, spec in enumerate(schema):
        values = [row[j] for row in raw]
        if spec.kind == CONTINUOUS:
            parsed = []
            for r, v in enumerate(values):
                if v is None:
                    parsed.append(None)
                    continue
                f = _parse_float(v)
                if f is None:
                    raise ParseError(f"{path}: row {r + first_line}, column {spec.name!r}: {v!r} is not a number")
                parsed.append(f)
            values = parsed
        elif spec.categories:
            known = set(spec.categories)
            for r, v in enumerate(values):
                if v is not None and v not in known:
                    raise ParseError(
                        f"{path}: row {r + first_line}, column {spec.name!r}: {v!r} is not a declared category"
                    )
        data[spec.name] = values
    return DataTable.from_labels(schema, data)


def format_float(v: float) -> str:
    if math.isnan(v):
        return ""
    return repr(float(v))


def write_csv(table: DataTable, path) -> None:
    """Write ``table`` in the same dialect :func:`load_csv` reads; missing cells are empty."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.names)
        cols = []
        for spec, col in zip(table.schema, table.columns):
            if spec.is_categorical:
                cats = spec.categories
                cols.append(["" if i == MISSING_CODE else cats[i] for i in col])
            else:
                cols.append([format_float(v) for v in col])
        writer.writerows(zip(*cols))


def schema_to_json(schema: Sequence[ColumnSpec]) -> list[dict]:
    return [c.to_json() for c in schema]


def schema_from_json(obj: list[dict]) -> list[ColumnSpec]:
    schema = [ColumnSpec.from_json(o) for o in obj]
    check_schema(schema)
    return schema


def save_schema(schema: Sequence[ColumnSpec], path) -> None:
    text = json.dumps(schema_to_json(schema), indent=2, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_schema(path) -> list[ColumnSpec]:
    return schema_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Column coercion


def _category_label(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def as_categorical(table: DataTable, name: str) -> DataTable:
    """Turn a continuous column into a categorical one (labels in first-appearance order)."""
    spec = table.spec(name)
    if spec.is_categorical:
        return table
    labels = [None if math.isnan(v) else _category_label(v) for v in table.column(name)]
    new = DataTable.from_labels([ColumnSpec(name, CATEGORICAL)], {name: labels})
    return table.replace(name, new.schema[0], new.columns[0])


def as_continuous(table: DataTable, name: str) -> DataTable:
    """Parse a categorical column's labels as numbers."""
    spec = table.spec(name)
    if not spec.is_categorical:
        return table
    values = np.full(table.n_rows, np.nan)
    for r, label in enumerate(table.labels(name)):
        if label is None:
            continue
        f = _parse_float(label)
        if f is None:
            raise ColumnTypeError(f"column {name!r}: category {label!r} is not numeric")
        values[r] = f
    return table.replace(name, ColumnSpec(name, CONTINUOUS), values)


# ---------------------------------------------------------------------------
# Cleaning operations


def impute_group_median(table: DataTable, target: str, group_by: Sequence[str]) -> DataTable:
    """Fill missing cells of a continuous column with the median of their group.

    Groups are keyed by the ``group_by`` categorical columns. A group with no
    observed values falls back to the global median.
    """
    if table.spec(target).is_categorical:
        raise ColumnTypeError(f"imputation target {target!r} must be continuous")
    for g in group_by:
        if not table.spec(g).is_categorical:
            raise ColumnTypeError(f"group column {g!r} must be categorical")
    values = table.column(target)
    missing = np.isnan(values)
    if not missing.any():
        return table
    if missing.all():
        raise ImputationError(f"column {target!r} has no observed values to impute from")
    global_median = float(np.median(values[~missing]))

    keys = [tuple(int(table.column(g)[r]) for g in group_by) for r in range(table.n_rows)]
    observed: dict[tuple, list[float]] = {}
    for k, v, m in zip(keys, values, missing):
        if not m:
            observed.setdefault(k, []).append(v)
    medians = {k: float(np.median(v)) for k, v in observed.items()}

    filled = values.copy()
    for r in np.flatnonzero(missing):
        filled[r] = medians.get(keys[r], global_median)
    return table.replace(target, table.spec(target), filled)


def fill_categorical(table: DataTable, column: str, fill_value: str) -> DataTable:
    """Replace missing cells of a categorical column with ``fill_value``."""
    spec = table.spec(column)
    if not spec.is_categorical:
        raise ColumnTypeError(f"column {column!r} is not categorical")
    cats = list(spec.categories)
    if fill_value in cats:
        code = cats.index(fill_value)
    else:
        code = len(cats)
        cats.append(fill_value)
    col = table.column(column).copy()
    col[col == MISSING_CODE] = code
    return table.replace(column, ColumnSpec(column, CATEGORICAL, tuple(cats)), col)


def dedup_with_participation_counts(
    table: DataTable,
    identity_cols: Sequence[str],
    year_col: str,
    sport_col: str,
    event_col: str,
    sports_name: str = "AOS",
    events_name: str = "AOE",
) -> DataTable:
    """Collapse rows sharing (identity, year) and count distinct sports and events.

    The first row of each group (input order) represents it. The counts are
    appended as categorical columns holding decimal strings.
    """
    needed = list(identity_cols) + [year_col, sport_col, event_col]
    for name in needed:
        table.index(name)
    bad = np.zeros(table.n_rows, dtype=bool)
    for name in identity_cols:
        bad |= table.missing_mask(name)
    if bad.any():
        rows = (np.flatnonzero(bad) + 1).tolist()
        raise PreparationError(f"missing identity values in rows {rows}")

    key_cols = [table.column(n) for n in list(identity_cols) + [year_col]]
    sport, event = table.column(sport_col), table.column(event_col)
    first: dict[tuple, int] = {}
    sports: dict[tuple, set] = {}
    events: dict[tuple, set] = {}
    for r in range(table.n_rows):
        key = tuple(c[r].item() for c in key_cols)
        if key not in first:
            first[key] = r
            sports[key], events[key] = set(), set()
        sports[key].add(sport[r].item())
        events[key].add(event[r].item())

    keep = np.array(sorted(first.values()), dtype=np.int64)
    order = sorted(first, key=first.get)
    out = table.take(keep)
    counts = DataTable.from_labels(
        [ColumnSpec(sports_name, CATEGORICAL), ColumnSpec(events_name, CATEGORICAL)],
        {
            sports_name: [str(len(sports[k])) for k in order],
            events_name: [str(len(events[k])) for k in order],
        },
    )
    return DataTable(out.schema + counts.schema, out.columns + counts.columns)


# ---------------------------------------------------------------------------
# Dataset recipes

OLYMPIC_CONTINUOUS = ("age", "height", "weight")
OLYMPIC_CATEGORICAL = ("sex", "year", "season", "city", "sport", "medal")
OLYMPIC_OUTPUT = OLYMPIC_CONTINUOUS + OLYMPIC_CATEGORICAL + ("AOS", "AOE")


def _resolve(table: DataTable, wanted: str) -> str | None:
    for name in table.names:
        if name.lower() == wanted.lower():
            return name
    return None


def prepare_olympic(raw: DataTable, identity_cols: Sequence[str] | None = None) -> DataTable:
    """Clean the raw athlete-events table into the 11-column training table.

    Steps, in order: age/height/weight medians per (sport, sex); missing medal
    becomes ``"Thanks"``; one row per athlete and year with AOS/AOE counts.
    Athlete identity is the ``ID`` column when present, else (name, sex).
    Column names are matched case-insensitively; output names are lowercase.
    """
    required = OLYMPIC_CONTINUOUS + OLYMPIC_CATEGORICAL + ("event",)
    rename = {}
    for col in required:
        found = _resolve(raw, col)
        if found is None:
            raise PreparationError(f"raw Olympic table is missing required column {col!r}")
        rename[found] = col
    if identity_cols is None:
        if _resolve(raw, "id") is not None:
            identity_cols = [_resolve(raw, "id")]
        elif _resolve(raw, "name") is not None:
            identity_cols = [_resolve(raw, "name"), _resolve(raw, "sex")]
        else:
            raise PreparationError("raw Olympic table has neither an 'ID' nor a 'name' column")
    for col in identity_cols:
        raw.index(col)

    keep = list(dict.fromkeys(list(rename) + list(identity_cols)))
    t = raw.select(keep)
    t = DataTable(
        [ColumnSpec(rename.get(s.name, s.name), s.kind, s.categories) for s in t.schema],
        t.columns,
    )
    identity = [rename.get(c, c) for c in identity_cols]

    for col in OLYMPIC_CONTINUOUS:
        t = as_continuous(t, col)
    for col in OLYMPIC_CATEGORICAL + ("event",):
        t = as_categorical(t, col)
    for col in identity:
        if not t.spec(col).is_categorical:
            t = as_categorical(t, col)

    for col in OLYMPIC_CONTINUOUS:
        t = impute_group_median(t, col, ["sport", "sex"])
    t = fill_categorical(t, "medal", "Thanks")
    t = dedup_with_participation_counts(t, identity, "year", "sport", "event")
    t = t.select(list(OLYMPIC_OUTPUT))
    for name in OLYMPIC_OUTPUT:
        if t.missing_mask(name).any():
            rows = (np.flatnonzero(t.missing_mask(name)) + 1).tolist()
            raise PreparationError(f"column {name!r} still has missing cells in rows {rows}")
    return t


ADULT_COLUMNS = (
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
)
ADULT_CONTINUOUS = ("age", "fnlwgt", "education-num", "capital-gain", "capital-loss", "hours-per-week")


def prepare_census(raw: DataTable, fill_label: str = "Unknown") -> DataTable:
    """Fill census gaps: categorical cells become ``"Unknown"``, continuous cells the global median.

    The standard numeric adult columns present in ``raw`` are parsed as
    continuous whatever the CSV inference said. A literal ``"?"`` category is
    treated as missing too, for tables loaded with a custom missing-token set.
    """
    t = raw
    for spec in raw.schema:
        if spec.is_categorical and "?" in spec.categories:
            labels = [None if v == "?" else v for v in t.labels(spec.name)]
            cats = tuple(c for c in spec.categories if c != "?")
            t = t.replace(spec.name, *_recode(spec.name, labels, cats))
    for name in ADULT_CONTINUOUS:
        if name in t.names:
            t = as_continuous(t, name)
    for spec in list(t.schema):
        if spec.is_categorical:
            if t.missing_mask(spec.name).any():
                t = fill_categorical(t, spec.name, fill_label)
        else:
            values = t.column(spec.name)
            missing = np.isnan(values)
            if missing.all():
                raise ImputationError(f"column {spec.name!r} has no observed values")
            if missing.any():
                filled = values.copy()
                filled[missing] = float(np.median(values[~missing]))
                t = t.replace(spec.name, spec, filled)
    return t


def _recode(name, labels, cats):
    lookup = {c: i for i, c in enumerate(cats)}
    col = np.array([MISSING_CODE if v is None else lookup[v] for v in labels], dtype=np.int64)
    return ColumnSpec(name, CATEGORICAL, cats), col
