import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractube.params import (
    ParamSchedule,
    ScheduleError,
    WidthLedger,
    default_schedule,
    make_schedule,
    schedule_from_json,
    schedule_to_json,
    validate_schedule,
    width,
)


def test_linear_tilde_family():
    sched = make_schedule("linear-tilde", [2, 3, 1, 3], d=2, q=1.5, horizon=4)
    assert sched.s == (4, 5, 6, 7)
    assert sched.s_tilde == (5, 7, 9, 11)
    assert all(t >= s for s, t in zip(sched.s, sched.s_tilde))


def test_log_m_family_floors():
    sched = make_schedule("log-M", [3, 1], d=2, q=1.5, horizon=4)
    assert sched.s == (4, 5, 6, 7)
    # floor(log s_k) = 1 for s_k in 4..7, lifted to the minimum 3
    assert sched.M == (3, 3, 3, 3)


def test_small_s_rejected():
    with pytest.raises(ScheduleError, match="3 <= M_k <= s_k"):
        ParamSchedule(d=2, q=1.5, horizon=2, s=(2, 5), M=(3, 3), s_tilde=(2, 5))


def test_m_exceeding_s_rejected():
    with pytest.raises(ScheduleError):
        ParamSchedule(d=2, q=1.5, horizon=1, s=(4,), M=(5,), s_tilde=(4,))


def test_q_range_rejected():
    for bad_q in (0.5, 1.0, 2.0, 2.5):
        with pytest.raises(ScheduleError):
            make_schedule("log-M", [3, 1], d=2, q=bad_q, horizon=2)


def test_width_values():
    sched = default_schedule(horizon=4)
    exp1, val1 = width(sched, 1)
    assert exp1 == 4
    assert val1 == pytest.approx(16 / 81, rel=1e-12)
    exp2, val2 = width(sched, 2)
    assert exp2 == 9
    assert val2 == pytest.approx(1.5 ** -9, rel=1e-12)


def test_width_out_of_range():
    sched = default_schedule()
    with pytest.raises(ScheduleError):
        width(sched, 0)
    with pytest.raises(ScheduleError):
        width(sched, sched.horizon + 1)


def test_width_ledger_strictly_decreasing():
    sched = default_schedule(horizon=5)
    ledger = WidthLedger.from_schedule(sched)
    assert all(b < a for a, b in zip(ledger.values, ledger.values[1:]))
    assert ledger.exponents == (4, 9, 15, 22, 30)


@settings(max_examples=50, deadline=None)
@given(
    a=st.integers(min_value=1, max_value=3),
    b=st.integers(min_value=3, max_value=8),
    q=st.floats(min_value=1.05, max_value=1.95),
    k=st.integers(min_value=2, max_value=6),
)
def test_width_ratio_property(a, b, q, k):
    sched = schedule_from_json(
        '{"d": 2, "Q": %r, "s": {"kind": "affine", "a": %d, "b": %d},'
        ' "M": {"kind": "logfloor", "min": 3}, "sTilde": "same-as-s", "K": 6}' % (q, a, b)
    )
    _, wk = width(sched, k)
    _, wk1 = width(sched, k - 1)
    assert wk / wk1 == pytest.approx(q ** -sched.s[k - 1], rel=1e-12)


def test_validate_tilde_ratio_values():
    sched = default_schedule(horizon=4)
    report = validate_schedule(sched, 4)
    assert report.tilde_diff_ratio == pytest.approx((1 / 5, 1 / 6, 1 / 7))
    assert report.tilde_trend_pass
    assert report.hard_pass


def test_validate_constant_s_fails_growth():
    sched = ParamSchedule(d=2, q=1.5, horizon=4, s=(5, 5, 5, 5), M=(3, 3, 3, 3),
                          s_tilde=(5, 5, 5, 5))
    report = validate_schedule(sched)
    assert not report.s_growth


def test_validate_m_equal_s_trend_fails():
    sched = ParamSchedule(d=2, q=1.5, horizon=4, s=(4, 5, 6, 7), M=(4, 5, 6, 7),
                          s_tilde=(4, 5, 6, 7))
    report = validate_schedule(sched)
    # M_k log s_k / s_k = log s_k, strictly increasing
    assert report.m_log_ratio == pytest.approx(tuple(math.log(s) for s in (4, 5, 6, 7)))
    assert not report.m_log_trend_pass


def test_validate_is_pure():
    sched = default_schedule(horizon=3)
    assert validate_schedule(sched) == validate_schedule(sched)


def test_json_round_trip():
    sched = default_schedule(horizon=3)
    doc = schedule_to_json(sched)
    again = schedule_from_json(doc)
    assert again == sched
    assert schedule_to_json(again) == doc


def test_documented_json_schema_loads():
    text = ('{"d":2,"Q":1.5,"s":{"kind":"affine","a":1,"b":3},'
            '"M":{"kind":"logfloor","min":3},"sTilde":"same-as-s","K":3}')
    sched = schedule_from_json(text)
    assert sched.s == (4, 5, 6)
    assert sched.M == (3, 3, 3)
    assert sched.s_tilde == sched.s
