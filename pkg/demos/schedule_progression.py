"""
Generation schedules
====================

Three ways to spread a synthetic row budget over training epochs, and the
common ratio that makes a geometric progression add up to the requested
total.
"""

import numpy as np

from dggan.schedule import build_schedule, geometric_sum, solve_common_ratio

###############################################################################
# A first share of 0.1% over 200 epochs must grow by a ratio a little above 1
# for the shares to add up to 100%.
r = solve_common_ratio(0.1, 200, 100)
print(f"ratio for (0.1%, 200 epochs): {r:.6f}")
print(f"sum of shares: {geometric_sum(0.1, r, 200):.9f}%")

###############################################################################
# When the first share times the epoch count already equals the total, the
# progression is flat.
print("ratio for (2%, 50 epochs):", solve_common_ratio(2.0, 50, 100))

###############################################################################
# Quotas for 10,000 rows over 50 epochs under each mode.
for mode in ("all_at_end", "uniform", "geometric"):
    s = build_schedule(mode, 10_000, 50, 0.2 if mode == "geometric" else None)
    q = np.array(s.quotas)
    print(f"{mode:>10}: first five {q[:5].tolist()}, last five {q[-5:].tolist()}, total {q.sum()}")

###############################################################################
# A ratio can also be forced. Shares are then rescaled by their own sum so
# the quotas still add up to the target.
s = build_schedule("geometric", 10_000, 50, 0.2, ratio_override=1.15884)
print("forced ratio, raw share sum:", round(sum(s.percentages), 1), "%")
print("forced ratio, last quota:", s.quotas[-1], "of", sum(s.quotas))
