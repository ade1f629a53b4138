"""
Scoring synthetic data
======================

Column shapes and column-pair trends between a real and a synthetic table,
and the per-type summary of pair scores.
"""

import numpy as np

from dggan.metrics import evaluate_all, ks_complement, tv_complement
from dggan.table import DataTable
from dggan.toy import imbalanced_table

real = imbalanced_table(2000, seed=0)

###############################################################################
# A perturbed copy: shifted values, and some rare categories replaced by the
# common one.
rng = np.random.default_rng(1)
value = real.column("value") + rng.normal(0, 4, real.n_rows)
flag = real.column("flag").copy()
flag[(flag == 1) & (rng.random(real.n_rows) < 0.5)] = 0
synth = DataTable(real.schema, [value, flag, real.column("level")])

print("KS complement (value):", round(ks_complement(real.column("value"), value), 4))
print("TV complement (flag): ", round(tv_complement(real.column("flag"), flag), 4))

rep = evaluate_all(real, synth)
print("\naverages:", {k: None if v is None else round(v, 4) for k, v in rep.averages.items()})
print("type pairs:", {k: None if v is None else round(v, 4) for k, v in rep.type_pairs.items()})
print("\npair matrix")
print(rep.pairs_csv())
