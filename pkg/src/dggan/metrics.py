"""
Column-shape and column-pair similarity scores between real and synthetic data.

All scores lie in ``[0, 1]``, 1 meaning the two samples agree exactly:

* ``ks_complement``          1 - KS statistic, continuous column shape
* ``tv_complement``          1 - total variation distance, categorical shape
* ``correlation_similarity`` 1 - |rho_real - rho_synth| / 2, continuous pair
* ``contingency_similarity`` 1 - TV distance of joint frequencies, categorical pair

Frequencies are plain relative counts (divide by n) with no smoothing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import EvaluationError, MetricError
from .table import ColumnSpec, DataTable

TYPE_A, TYPE_B, TYPE_C = "A", "B", "C"
TYPE_PAIRS = ("AA", "AB", "AC", "BB", "BC", "CC")
DEFAULT_SMALL_THRESHOLD = 15
DEFAULT_BINS = 10


def _nonempty(x, what):
    x = np.asarray(x).reshape(-1)
    if x.size == 0:
        raise ValueError(f"{what} is empty")
    return x


def ks_complement(real, synth) -> float:
    """``1 - sup_x |F_real(x) - F_synth(x)|`` over the empirical CDFs."""
    a = np.sort(_nonempty(real, "real sample").astype(np.float64))
    b = np.sort(_nonempty(synth, "synthetic sample").astype(np.float64))
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(1.0 - np.max(np.abs(fa - fb)))


def _frequencies(keys) -> dict:
    values, counts = np.unique(keys, return_counts=True, axis=0)
    n = counts.sum()
    if values.ndim > 1:
        return {tuple(v.tolist()): c / n for v, c in zip(values, counts)}
    return {v.item(): c / n for v, c in zip(values, counts)}


def _tv_similarity(f_real: dict, f_synth: dict) -> float:
    support = set(f_real) | set(f_synth)
    total = sum(abs(f_real.get(k, 0.0) - f_synth.get(k, 0.0)) for k in sorted(support, key=repr))
    return float(max(0.0, 1.0 - 0.5 * total))


def tv_complement(real, synth) -> float:
    """``1 - TV`` between the category frequency tables of two samples."""
    a = _nonempty(real, "real sample")
    b = _nonempty(synth, "synthetic sample")
    return _tv_similarity(_frequencies(a), _frequencies(b))


def _pearson(x, y, name):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size:
        raise ValueError(f"{name}: columns have different lengths {x.size} and {y.size}")
    if x.size < 2:
        raise MetricError(f"{name}: correlation needs at least 2 rows")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        which = "x" if sxx == 0 else "y"
        raise MetricError(f"{name}: column {which} has zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def correlation_similarity(real_x, real_y, synth_x, synth_y) -> float:
    """``1 - |rho_real - rho_synth| / 2`` with Pearson correlation."""
    rho_r = _pearson(real_x, real_y, "real")
    rho_s = _pearson(synth_x, synth_y, "synthetic")
    return float(1.0 - abs(rho_r - rho_s) / 2.0)


def contingency_similarity(real_a, real_b, synth_a, synth_b) -> float:
    """``1 - TV`` between the joint frequency tables of two categorical columns."""
    ra, rb = _nonempty(real_a, "real column"), _nonempty(real_b, "real column")
    sa, sb = _nonempty(synth_a, "synthetic column"), _nonempty(synth_b, "synthetic column")
    if ra.size != rb.size:
        raise ValueError(f"real columns have different lengths {ra.size} and {rb.size}")
    if sa.size != sb.size:
        raise ValueError(f"synthetic columns have different lengths {sa.size} and {sb.size}")
    f_real = _frequencies(np.stack([ra, rb], axis=1))
    f_synth = _frequencies(np.stack([sa, sb], axis=1))
    return _tv_similarity(f_real, f_synth)


def classify_column_type(spec: ColumnSpec, small_threshold: int = DEFAULT_SMALL_THRESHOLD) -> str:
    if small_threshold < 2:
        raise ValueError("small_threshold must be at least 2")
    if not spec.is_categorical:
        return TYPE_A
    return TYPE_B if len(spec.categories) <= small_threshold else TYPE_C


def discretize(values, real_values, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin index of each value on ``bins`` equal-width bins spanning the real range.

    Values outside the real range land in the edge bins.
    """
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(np.min(real_values)), float(np.max(real_values))
    if hi == lo:
        return np.zeros(v.shape, dtype=np.int64)
    idx = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _safe_correlation_similarity(rx, ry, sx, sy) -> float:
    """Correlation similarity where a constant column counts as correlation 0."""

    def rho(x, y):
        try:
            return _pearson(x, y, "pair")
        except MetricError:
            return 0.0

    return float(1.0 - abs(rho(rx, ry) - rho(sx, sy)) / 2.0)


@dataclass
class FidelityReport:
    columns: list[dict]
    pairs: np.ndarray
    pair_metrics: list[list[str]]
    averages: dict[str, float | None]
    type_pairs: dict[str, float | None]
    column_types: list[str] = field(default_factory=list)

    @property
    def shape_score(self) -> float:
        return self.averages["shape"]

    @property
    def pair_trend_score(self) -> float:
        return self.averages["pair_trend"]

    @property
    def overall(self) -> float:
        return self.averages["overall"]

    def to_json(self) -> dict:
        return {
            "columns": self.columns,
            "pairs": self.pairs.tolist(),
            "pair_metrics": self.pair_metrics,
            "averages": self.averages,
            "type_pairs": self.type_pairs,
        }

    def save(self, path, extra: dict | None = None) -> None:
        obj = self.to_json()
        if extra:
            obj.update(extra)
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def pairs_csv(self) -> str:
        names = [c["name"] for c in self.columns]
        lines = ["," + ",".join(names)]
        for name, row in zip(names, self.pairs):
            lines.append(name + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else None


def evaluate_all(
    real: DataTable,
    synth: DataTable,
    small_threshold: int = DEFAULT_SMALL_THRESHOLD,
    bins: int = DEFAULT_BINS,
) -> FidelityReport:
    """Score every column and every unordered column pair.

    Mixed continuous/categorical pairs use contingency similarity after the
    continuous member is cut into ``bins`` equal-width bins over the real
    range. In pair scores a constant column is treated as uncorrelated
    instead of raising. The pair matrix diagonal is 1 and is left out of
    every average.
    """
    if real.schema != synth.schema:
        raise EvaluationError("real and synthetic tables have different schemas")
    if real.has_missing() or synth.has_missing():
        raise EvaluationError("tables must not contain missing cells")
    if real.n_rows == 0 or synth.n_rows == 0:
        raise EvaluationError("tables must not be empty")
    schema = real.schema
    types = [classify_column_type(s, small_threshold) for s in schema]

    columns = []
    for spec, r, s, t in zip(schema, real.columns, synth.columns, types):
        if spec.is_categorical:
            metric, score = "TVComplement", tv_complement(r, s)
        else:
            metric, score = "KSComplement", ks_complement(r, s)
        columns.append({"name": spec.name, "type": t, "metric": metric, "score": score})

    k = len(schema)
    pairs = np.eye(k)
    pair_metrics = [["" for _ in range(k)] for _ in range(k)]
    buckets: dict[str, list[float]] = {tp: [] for tp in TYPE_PAIRS}
    cont_pairs, cat_pairs, all_pairs = [], [], []
    for i, j in combinations(range(k), 2):
        si, sj = schema[i], schema[j]
        ri, rj, yi, yj = real.columns[i], real.columns[j], synth.columns[i], synth.columns[j]
        if not si.is_categorical and not sj.is_categorical:
            metric, score = "CorrelationSimilarity", _safe_correlation_similarity(ri, rj, yi, yj)
            cont_pairs.append(score)
        else:
            if not si.is_categorical:
                ri, yi = discretize(ri, ri, bins), discretize(yi, ri, bins)
            if not sj.is_categorical:
                rj, yj = discretize(rj, rj, bins), discretize(yj, rj, bins)
            metric, score = "ContingencySimilarity", contingency_similarity(ri, rj, yi, yj)
            if si.is_categorical and sj.is_categorical:
                cat_pairs.append(score)
        pairs[i, j] = pairs[j, i] = score
        pair_metrics[i][j] = pair_metrics[j][i] = metric
        buckets["".join(sorted(types[i] + types[j]))].append(score)
        all_pairs.append(score)

    shape_scores = [c["score"] for c in columns]
    shape = _mean(shape_scores)
    pair_trend = _mean(all_pairs)
    overall = _mean([x for x in (shape, pair_trend) if x is not None])
    averages = {
        "shape": shape,
        "pair_trend": pair_trend,
        "overall": overall,
        "continuous_shape": _mean([c["score"] for c in columns if c["type"] == TYPE_A]),
        "categorical_shape": _mean([c["score"] for c in columns if c["type"] != TYPE_A]),
        "continuous_pair_trend": _mean(cont_pairs),
        "categorical_pair_trend": _mean(cat_pairs),
    }
    type_pairs = {tp: _mean(v) for tp, v in buckets.items()}
    return FidelityReport(columns, pairs, pair_metrics, averages, type_pairs, types)


def overall_score(real: DataTable, synth: DataTable, **kwargs) -> float:
    return evaluate_all(real, synth, **kwargs).overall

