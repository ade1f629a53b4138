"""
Encoding tables for the networks
================================

Continuous columns are scaled, categorical columns become one-hot blocks,
and decoding maps generator output (any real numbers) back to valid cells.
"""

import numpy as np

from dggan.codec import EncodedMatrix, decode_matrix, encode_table
from dggan.toy import imbalanced_table

table = imbalanced_table(6, seed=1)
for method in ("min_max", "max_absolute", "standardization"):
    m, params = encode_table(table, method)
    print(method, "->", params["value"].to_json())
    back = decode_matrix(m, table.schema, params)
    err = np.max(np.abs(back.column("value") - table.column("value")))
    same = all(np.array_equal(back.column(n), table.column(n)) for n in ("flag", "level"))
    print("   roundtrip error:", f"{err:.1e}", " categories equal:", same)

###############################################################################
# Raw generator rows: out-of-range values are clamped and each categorical
# block decodes to its largest entry.
m, params = encode_table(table)
print([(b.name, b.offset, b.width) for b in m.layout.blocks])
raw = np.array([[1.4, 0.2, 0.8, 0.1, 0.1, 0.8],
                [-0.3, 0.5, 0.5, 0.3, 0.3, 0.3]])
print(decode_matrix(EncodedMatrix(m.layout, raw), table.schema, params).rows())
