"""
Normalization of continuous columns and one-hot encoding of categorical ones.

``encode_table`` turns a :class:`~dggan.table.DataTable` into a float matrix
whose columns are laid out block by block in schema order; ``decode_matrix``
inverts it. Normalizer statistics are always fitted on real data and reused
unchanged to decode synthetic rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DecodeError, EncodeError, FitError
from .table import CATEGORICAL, ColumnSpec, DataTable

MAX_ABSOLUTE = "max_absolute"
MIN_MAX = "min_max"
STANDARDIZATION = "standardization"
METHODS = (MAX_ABSOLUTE, MIN_MAX, STANDARDIZATION)
DEFAULT_METHOD = MIN_MAX


@dataclass(frozen=True)
class NormalizerParams:
    method: str
    min: float = 0.0
    max: float = 0.0
    max_abs: float = 0.0
    mean: float = 0.0
    std: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise FitError(f"unknown normalization method {self.method!r}")
        if self.method == MIN_MAX and not self.max > self.min:
            raise FitError("min_max needs max > min")
        if self.method == STANDARDIZATION and not self.std > 0:
            raise FitError("standardization needs std > 0")
        if self.method == MAX_ABSOLUTE and not self.max_abs > 0:
            raise FitError("max_absolute needs a nonzero value")

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "stats": {
                "min": self.min,
                "max": self.max,
                "max_abs": self.max_abs,
                "mean": self.mean,
                "std": self.std,
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NormalizerParams":
        return cls(obj["method"], **{k: float(v) for k, v in obj["stats"].items()})


def fit_normalizer(values, method: str = DEFAULT_METHOD, column: str = "?") -> NormalizerParams:
    """Fit normalization statistics. Standardization uses the population std."""
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if method not in METHODS:
        raise FitError(f"column {column!r}: unknown normalization method {method!r}")
    if x.size < 2:
        raise FitError(f"column {column!r}: {method} needs at least 2 values, got {x.size}")
    lo, hi = float(x.min()), float(x.max())
    if method == MIN_MAX:
        if not hi > lo:
            raise FitError(f"column {column!r}: min_max on a constant column")
        return NormalizerParams(MIN_MAX, min=lo, max=hi)
    if method == MAX_ABSOLUTE:
        m = float(np.abs(x).max())
        if m == 0:
            raise FitError(f"column {column!r}: max_absolute on an all-zero column")
        return NormalizerParams(MAX_ABSOLUTE, max_abs=m)
    mean, std = float(x.mean()), float(x.std())
    if not std > 0:
        raise FitError(f"column {column!r}: standardization on a zero-variance column")
    return NormalizerParams(STANDARDIZATION, mean=mean, std=std)


def normalize(x, p: NormalizerParams):
    x = np.asarray(x, dtype=np.float64)
    if p.method == MIN_MAX:
        y = (x - p.min) / (p.max - p.min)
    elif p.method == MAX_ABSOLUTE:
        y = x / p.max_abs
    else:
        y = (x - p.mean) / p.std
    return y if y.ndim else float(y)


def denormalize(y, p: NormalizerParams):
    """Inverse of :func:`normalize`; min_max inputs are clamped to ``[0, 1]`` first."""
    y = np.asarray(y, dtype=np.float64)
    if p.method == MIN_MAX:
        x = np.clip(y, 0.0, 1.0) * (p.max - p.min) + p.min
    elif p.method == MAX_ABSOLUTE:
        x = y * p.max_abs
    else:
        x = y * p.std + p.mean
    return x if x.ndim else float(x)


@dataclass(frozen=True)
class Block:
    name: str
    kind: str
    offset: int
    width: int

    @property
    def stop(self) -> int:
        return self.offset + self.width


@dataclass(frozen=True)
class BlockLayout:
    blocks: tuple[Block, ...]

    @property
    def width(self) -> int:
        return self.blocks[-1].stop if self.blocks else 0

    @classmethod
    def from_schema(cls, schema: Sequence[ColumnSpec]) -> "BlockLayout":
        blocks, offset = [], 0
        for spec in schema:
            width = len(spec.categories) if spec.is_categorical else 1
            if width < 1:
                raise EncodeError(f"categorical column {spec.name!r} has no categories")
            blocks.append(Block(spec.name, spec.kind, offset, width))
            offset += width
        return cls(tuple(blocks))

    def categorical(self) -> list[Block]:
        return [b for b in self.blocks if b.kind == CATEGORICAL]

    def continuous(self) -> list[Block]:
        return [b for b in self.blocks if b.kind != CATEGORICAL]


@dataclass
class EncodedMatrix:
    layout: BlockLayout
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != self.layout.width:
            raise DecodeError(
                f"matrix shape {self.data.shape} does not match layout width {self.layout.width}"
            )


def encode_table(
    table: DataTable,
    methods: Mapping[str, str] | str | None = None,
    params: Mapping[str, NormalizerParams] | None = None,
) -> tuple[EncodedMatrix, dict[str, NormalizerParams]]:
    """Normalize continuous columns and one-hot the categorical ones.

    ``methods`` is one method name for every continuous column or a per-column
    mapping (missing names fall back to min_max). Pass ``params`` to reuse
    already-fitted statistics instead of fitting.
    """
    layout = BlockLayout.from_schema(table.schema)
    out = np.zeros((table.n_rows, layout.width))
    fitted = {}
    for spec, col, block in zip(table.schema, table.columns, layout.blocks):
        missing = table.missing_mask(spec.name)
        if missing.any():
            r = int(np.argmax(missing))
            raise EncodeError(f"missing cell at row {r + 1}, column {spec.name!r}")
        if spec.is_categorical:
            out[np.arange(table.n_rows), block.offset + col] = 1.0
            continue
        if params is not None and spec.name in params:
            p = params[spec.name]
        else:
            method = methods if isinstance(methods, str) else (methods or {}).get(spec.name, DEFAULT_METHOD)
            p = fit_normalizer(col, method, spec.name)
        fitted[spec.name] = p
        out[:, block.offset] = normalize(col, p)
    return EncodedMatrix(layout, out), fitted


def decode_matrix(
    m: EncodedMatrix,
    schema: Sequence[ColumnSpec],
    params: Mapping[str, NormalizerParams],
    sample: bool = False,
    rng: np.random.Generator | None = None,
) -> DataTable:
    """Map encoded rows back to table cells.

    Categorical blocks decode by argmax, ties going to the lowest index. With
    ``sample=True`` each block is instead treated as unnormalized category
    weights and sampled from ``rng`` (negative entries count as zero).
    """
    layout = BlockLayout.from_schema(schema)
    if layout != m.layout:
        raise DecodeError("encoded layout does not match the schema")
    if sample and rng is None:
        raise ValueError("sampling decode needs an rng")
    data = m.data
    cols = []
    for spec, block in zip(schema, layout.blocks):
        part = data[:, block.offset : block.stop]
        if spec.is_categorical:
            if sample:
                cols.append(_sample_block(part, rng))
            else:
                # argmax returns the first maximum, which is the lowest index
                cols.append(np.argmax(part, axis=1).astype(np.int64))
        else:
            if spec.name not in params:
                raise DecodeError(f"no normalizer fitted for column {spec.name!r}")
            cols.append(np.asarray(denormalize(part[:, 0], params[spec.name]), dtype=np.float64))
    return DataTable(list(schema), cols)


def _sample_block(part: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    w = np.clip(part, 0.0, None)
    totals = w.sum(axis=1, keepdims=True)
    k = part.shape[1]
    w = np.where(totals > 0, w / np.where(totals > 0, totals, 1.0), 1.0 / k)
    cdf = np.cumsum(w, axis=1)
    u = rng.random((part.shape[0], 1))
    idx = (u >= cdf).sum(axis=1)
    return np.minimum(idx, k - 1).astype(np.int64)


def check_one_hot(m: EncodedMatrix) -> bool:
    for b in m.layout.categorical():
        part = m.data[:, b.offset : b.stop]
        if not (np.isin(part, (0.0, 1.0)).all() and (part.sum(axis=1) == 1.0).all()):
            return False
    return True


__all__ = [
    "NormalizerParams",
    "Block",
    "BlockLayout",
    "EncodedMatrix",
    "fit_normalizer",
    "normalize",
    "denormalize",
    "encode_table",
    "decode_matrix",
    "check_one_hot",
]
