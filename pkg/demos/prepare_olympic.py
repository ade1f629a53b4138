"""
Preparing the athlete table
===========================

A 20-row excerpt in the layout of the public athlete-events file runs
through the cleaning recipe: group-median imputation, a filler medal label,
and one row per athlete and year with sport and event counts.
"""

from pathlib import Path

from dggan.table import load_csv, prepare_olympic

raw = load_csv(Path(__file__).resolve().parents[1] / "tests" / "data" / "olympic_raw_20.csv")
print(raw)
print("columns with gaps:", [n for n in raw.names if raw.missing_mask(n).any()])

clean = prepare_olympic(raw)
print(clean)
for spec in clean.schema:
    print(f"  {spec.name:>7}  {spec.kind}")

###############################################################################
# Ann took part in three events across two sports in 2000, so her 2000 row
# carries AOS=2 and AOE=3.
for row in clean.rows()[:4]:
    print(row)
