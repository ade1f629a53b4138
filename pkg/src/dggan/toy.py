"""Small synthetic tables with imbalanced categorical columns, for demos and tests."""

from __future__ import annotations

import numpy as np

from .table import CATEGORICAL, CONTINUOUS, ColumnSpec, DataTable


def imbalanced_table(n_rows: int = 5000, seed: int = 0) -> DataTable:
    """One bimodal continuous column plus 90/10 and 70/20/10 categorical columns.

    Category counts are exact (rounded) proportions in shuffled order; the
    continuous column is a 60/40 mixture of N(20, 3^2) and N(45, 5^2).
    """
    rng = np.random.default_rng(seed)
    comp = rng.random(n_rows) < 0.6
    value = np.where(comp, rng.normal(20.0, 3.0, n_rows), rng.normal(45.0, 5.0, n_rows))

    def exact(props):
        counts = [int(round(p * n_rows)) for p in props]
        counts[0] += n_rows - sum(counts)
        codes = np.repeat(np.arange(len(props)), counts)
        return rng.permutation(codes)

    schema = [
        ColumnSpec("value", CONTINUOUS),
        ColumnSpec("flag", CATEGORICAL, ("major", "minor")),
        ColumnSpec("level", CATEGORICAL, ("low", "mid", "high")),
    ]
    return DataTable(schema, [value, exact([0.9, 0.1]), exact([0.7, 0.2, 0.1])])
