import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from dggan.errors import ScheduleError
from dggan.schedule import build_schedule, geometric_sum, solve_common_ratio


def loop_sum(a, r, n):
    # plain term-by-term sum, independent of the closed form
    total, term = 0.0, a
    for _ in range(n):
        total += term
        term *= r
    return total


def oracle_ratio(a, n, s):
    return brentq(lambda r: loop_sum(a, r, n) - s, 1.0 + 1e-12, 10.0, xtol=1e-15, rtol=1e-15)


# -- ratio solver -------------------------------------------------------------


def test_ratio_small_first_item_many_epochs():
    assert solve_common_ratio(0.1, 200, 100) == pytest.approx(1.01344, abs=5e-4)


def test_ratio_uniform_case_is_exactly_one():
    assert solve_common_ratio(2.0, 50, 100) == 1.0


@pytest.mark.parametrize("a, n", [(5.0, 10), (0.1, 200), (0.2, 50), (1.0, 30), (0.3, 100)])
def test_ratio_matches_independent_oracle(a, n):
    assert solve_common_ratio(a, n, 100) == pytest.approx(oracle_ratio(a, n, 100), rel=1e-9)


def test_ratio_five_over_ten():
    assert solve_common_ratio(5.0, 10, 100) == pytest.approx(1.1469, abs=1e-4)


@pytest.mark.parametrize(
    "a, n, s", [(3.0, 50, 100), (50.0, 1, 100), (0.0, 10, 100), (-1.0, 10, 100), (1.0, 0, 100), (200, 5, 100)]
)
def test_ratio_errors(a, n, s):
    with pytest.raises(ScheduleError):
        solve_common_ratio(a, n, s)


def test_single_epoch_full_total():
    assert solve_common_ratio(100.0, 1, 100) == 1.0


@settings(max_examples=100)
@given(st.floats(0.01, 10.0), st.integers(2, 300))
def test_ratio_reproduces_total(a, n):
    if a * n > 100:
        with pytest.raises(ScheduleError):
            solve_common_ratio(a, n, 100)
        return
    r = solve_common_ratio(a, n, 100)
    got = loop_sum(a, r, n)
    assert abs(got - 100) / 100 <= 1e-6
    assert geometric_sum(a, r, n) <= 100 + 1e-9


def test_literal_triple_is_inconsistent():
    # the advertised (50, 0.2, 1.15884) sums to about 2000 percent
    assert loop_sum(0.2, 1.15884, 50) == pytest.approx(1999.7, abs=0.1)


# -- schedules ----------------------------------------------------------------


def test_uniform_example():
    s = build_schedule("uniform", 1000, 50, 2.0, 100)
    assert s.quotas == [20] * 50


def test_uniform_remainder_goes_last():
    assert build_schedule("uniform", 10, 4).quotas == [2, 2, 3, 3]


def test_all_at_end_example():
    assert build_schedule("all_at_end", 7, 3).quotas == [0, 0, 7]


def test_geometric_example():
    s = build_schedule("geometric", 1000, 200, 0.1, 100)
    assert s.quotas[0] == 1
    assert sum(s.quotas) == 1000
    assert all(x <= y for x, y in zip(s.quotas, s.quotas[1:]))
    assert s.ratio == pytest.approx(1.01344, abs=5e-4)


def test_geometric_quotas_follow_floor_rule():
    s = build_schedule("geometric", 997, 10, 5.0, 100)
    r = s.ratio
    floors = [math.floor(997 * 5.0 * r ** e / 100) for e in range(10)]
    extra = 997 - sum(floors)
    expected = floors[:]
    for i in range(extra):
        expected[-1 - i] += 1
    assert s.quotas == expected


def test_ratio_override_reproduces_literal_triple():
    s = build_schedule("geometric", 10000, 50, 0.2, 100, ratio_override=1.15884)
    assert s.ratio == 1.15884
    assert sum(s.quotas) == 10000
    assert s.quotas[-1] > 10 * s.quotas[5]


def test_cumulative_and_json():
    s = build_schedule("uniform", 6, 3)
    assert s.cumulative == [2, 4, 6]
    obj = json.loads(json.dumps(s.to_json()))
    assert obj["quotas"] == [2, 2, 2] and obj["mode"] == "uniform"


def test_zero_target():
    assert build_schedule("geometric", 0, 5, 10.0).quotas == [0] * 5


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(mode="spiral", n_target=10, epochs=3),
        dict(mode="uniform", n_target=-1, epochs=3),
        dict(mode="geometric", n_target=10, epochs=3),
        dict(mode="geometric", n_target=10, epochs=3, first_item=50.0),
        dict(mode="uniform", n_target=10, epochs=0),
    ],
)
def test_schedule_errors(kwargs):
    with pytest.raises(ScheduleError):
        build_schedule(**kwargs)


@settings(max_examples=200)
@given(
    st.sampled_from(["uniform", "all_at_end", "geometric"]),
    st.integers(0, 200000),
    st.integers(1, 300),
    st.floats(0.01, 5.0),
)
def test_random_schedules_sum_exactly(mode, n, epochs, a):
    if mode == "geometric":
        a = min(a, 100.0 / epochs)
        if epochs == 1:
            a = 100.0
    s = build_schedule(mode, n, epochs, a if mode == "geometric" else None)
    assert len(s.quotas) == epochs
    assert sum(s.quotas) == n
    assert min(s.quotas) >= 0
    if mode == "geometric" and s.ratio > 1:
        assert all(x <= y for x, y in zip(s.quotas, s.quotas[1:]))
