"""
Per-epoch synthetic-row quotas for training with generation.

Three modes are supported:

``all_at_end``
    every synthetic row is drawn after the last epoch (the classic baseline).
``uniform``
    the same share after every epoch.
``geometric``
    epoch ``e`` contributes ``a * r**(e-1)`` percent, where ``r`` is chosen
    so that the shares over ``E`` epochs add up to the total ``S`` percent.

Quotas are floored and the leftover rows go one each to the last epochs,
so the quotas always add up to the requested row count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ScheduleError

ALL_AT_END = "all_at_end"
UNIFORM = "uniform"
GEOMETRIC = "geometric"
MODES = (ALL_AT_END, UNIFORM, GEOMETRIC)

SUM_TOLERANCE = 1e-9


def geometric_sum(a: float, r: float, n: int) -> float:
    """``a + a*r + ... + a*r**(n-1)``, accurate for ``r`` close to 1."""
    if r == 1.0:
        return a * n
    return a * math.expm1(n * math.log(r)) / (r - 1.0)


def solve_common_ratio(first_item: float, epochs: int, total: float = 100.0) -> float:
    """Common ratio ``r >= 1`` with ``geometric_sum(first_item, r, epochs) == total``.

    Found by bisection on the increasing function ``r -> geometric_sum``. The
    returned ratio never overshoots: its sum is at most ``total`` and within
    1e-9 of it (or as close as float64 allows).

    >>> round(solve_common_ratio(0.1, 200, 100), 5)
    1.01344
    """
    a, E, S = float(first_item), int(epochs), float(total)
    if not (a > 0 and S > 0):
        raise ScheduleError(f"first item and total must be positive, got a={a}, S={S}")
    if E < 1:
        raise ScheduleError(f"need at least one epoch, got {E}")
    if a > S:
        raise ScheduleError(f"first item {a} exceeds the total {S}")
    if math.isclose(a * E, S, rel_tol=1e-12):
        return 1.0
    if E == 1:
        raise ScheduleError(f"with one epoch the first item must equal the total ({a} != {S})")
    if a * E > S:
        raise ScheduleError(
            f"a*E = {a * E:g} exceeds the total {S:g}; a growing progression cannot fit"
        )

    lo, hi = 1.0, 2.0
    while geometric_sum(a, hi, E) < S:
        lo, hi = hi, hi * 2.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if geometric_sum(a, mid, E) <= S:
            lo = mid
        else:
            hi = mid
        if S - geometric_sum(a, lo, E) <= SUM_TOLERANCE:
            break
    return lo


@dataclass
class GenerationSchedule:
    mode: str
    epochs: int
    n_target: int
    quotas: list[int]
    first_item: float | None = None
    total: float | None = None
    ratio: float | None = None
    percentages: list[float] = field(default_factory=list)

    @property
    def cumulative(self) -> list[int]:
        out, acc = [], 0
        for q in self.quotas:
            acc += q
            out.append(acc)
        return out

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "epochs": self.epochs,
            "n_target": self.n_target,
            "first_item": self.first_item,
            "total": self.total,
            "ratio": self.ratio,
            "quotas": list(self.quotas),
        }


def _spread_remainder(quotas: list[int], n_target: int) -> list[int]:
    remainder = n_target - sum(quotas)
    if remainder < 0:
        raise ScheduleError("quota rounding overshot the target")
    E = len(quotas)
    for k in range(remainder):
        quotas[E - 1 - (k % E)] += 1
    return quotas


def build_schedule(
    mode: str,
    n_target: int,
    epochs: int,
    first_item: float | None = None,
    total: float = 100.0,
    ratio_override: float | None = None,
) -> GenerationSchedule:
    """Quotas for ``n_target`` synthetic rows over ``epochs`` epochs.

    With ``ratio_override`` the given ratio is used as-is and the shares are
    rescaled to their own sum, so the quotas still add up to ``n_target``.
    """
    if mode not in MODES:
        raise ScheduleError(f"unknown schedule mode {mode!r}; expected one of {MODES}")
    n_target, E = int(n_target), int(epochs)
    if n_target < 0:
        raise ScheduleError(f"synthetic row count must be non-negative, got {n_target}")
    if E < 1:
        raise ScheduleError(f"need at least one epoch, got {E}")

    if mode == ALL_AT_END:
        quotas = [0] * (E - 1) + [n_target]
        return GenerationSchedule(mode, E, n_target, quotas)

    if mode == UNIFORM:
        base = n_target // E
        quotas = _spread_remainder([base] * E, n_target)
        return GenerationSchedule(
            mode, E, n_target, quotas, total=total, percentages=[total / E] * E
        )

    if first_item is None:
        raise ScheduleError("geometric schedule needs a first item percentage")
    a = float(first_item)
    if ratio_override is not None:
        r = float(ratio_override)
        if not r > 0:
            raise ScheduleError(f"ratio override must be positive, got {r}")
        pct = [a * r**e for e in range(E)]
        denom = math.fsum(pct)
    else:
        r = solve_common_ratio(a, E, total)
        pct = [a * r**e for e in range(E)]
        denom = float(total)
    quotas = [math.floor(n_target * p / denom) for p in pct]
    if sum(quotas) > n_target:
        # ratio override with float round-off; renormalize from the realized sum
        quotas = [math.floor(n_target * p / math.fsum(pct) * (1 - 1e-12)) for p in pct]
    quotas = _spread_remainder(quotas, n_target)
    return GenerationSchedule(mode, E, n_target, quotas, a, float(total), r, pct)
