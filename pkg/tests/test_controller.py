import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from befilter.controller import (
    ControllerConfig,
    StepOutcome,
    StepSizeUnderflow,
    TooManyRejections,
    clamp_dt,
    decide,
    propose_dt,
)

TOL = 1e-3


def cfg(**kw):
    base = dict(tol=TOL, dt_min=1e-12, dt_max=10.0)
    base.update(kw)
    return ControllerConfig(**base)


def test_propose_examples():
    assert propose_dt(0.1, TOL, TOL, 1, 0.9) == pytest.approx(0.09, rel=1e-15)
    assert propose_dt(0.1, 4 * TOL, TOL, 1, 0.9) == pytest.approx(0.045, rel=1e-14)
    assert propose_dt(0.1, 8 * TOL, TOL, 2, 0.9) == pytest.approx(0.045, rel=1e-14)


def test_propose_zero_estimate_hits_ratio_clamp():
    assert propose_dt(0.1, 0.0, TOL, 2, 0.9, ratio_max=5.0) == pytest.approx(0.5)


def test_decide_accepts_order_one():
    dec = decide(StepOutcome("be", "y2", 0.5e-3, 2e-3), cfg(), 0.1)
    assert dec.accepted and dec.verdict == "accept"
    assert dec.order == 1 and dec.state == "be"
    assert dec.next_dt == pytest.approx(0.09 * math.sqrt(2), rel=1e-14)


def test_decide_rejects_with_largest_retry():
    dec = decide(StepOutcome("be", "y2", 4e-3, 8e-3), cfg(), 0.1)
    assert not dec.accepted and dec.verdict == "reject"
    assert dec.next_dt == pytest.approx(0.035, rel=1e-14)


def test_decide_zero_estimates():
    dec = decide(StepOutcome("be", "y2", 0.0, 0.0), cfg(), 0.1)
    assert dec.accepted and dec.order == 2
    assert dec.next_dt == pytest.approx(0.5)
    dec = decide(StepOutcome("be", "y2", 0.0, 0.0), cfg(dt_max=0.3), 0.1)
    assert dec.next_dt == pytest.approx(0.3)


def test_tie_prefers_order_two():
    # (1/4)^(-1/2) == (1/8)^(-1/3) == 2
    dec = decide(StepOutcome("be", "y2", TOL / 4, TOL / 8), cfg(), 0.1)
    assert dec.order == 2 and dec.state == "y2"


def test_missing_est2_uses_est1_only():
    dec = decide(StepOutcome("be", "y2", 0.5e-3), cfg(), 0.1)
    assert dec.accepted and dec.order == 1


def test_reject_storm_and_underflow():
    with pytest.raises(TooManyRejections):
        decide(StepOutcome(0, 0, 1.0, 1.0), cfg(max_consecutive_rejects=3), 0.1,
               consecutive_rejects=3)
    c = cfg(dt_min=1e-3)
    with pytest.raises(StepSizeUnderflow):
        decide(StepOutcome(0, 0, 1.0, 1.0), c, 1e-3)


@pytest.mark.parametrize("kw", [
    dict(tol=0.0), dict(dt_min=1.0, dt_max=0.5), dict(ratio_min=1.5), dict(ratio_max=0.9),
    dict(safety_accept=1.5), dict(safety_reject=0.0), dict(max_consecutive_rejects=0),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        cfg(**kw)


def test_for_interval_defaults():
    c = ControllerConfig.for_interval(1.0, 3.0, 1e-4)
    assert c.dt_min == pytest.approx(2e-14) and c.dt_max == 1.0
    assert (c.ratio_min, c.ratio_max, c.max_consecutive_rejects) == (0.1, 5.0, 20)
    assert (c.safety_accept, c.safety_reject) == (0.9, 0.7)
    assert ControllerConfig.for_interval(0, 1, 1e-4, dt_max=None).dt_max == 0.5


est = st.floats(0.0, 1.0)
dts = st.floats(1e-6, 1.0)


@given(dts, est, st.one_of(st.none(), est))
def test_next_dt_respects_clamps(dt, e1, e2):
    c = cfg(dt_min=1e-7, dt_max=0.5)
    try:
        dec = decide(StepOutcome(0, 0, e1, e2), c, dt)
    except StepSizeUnderflow:
        return
    assert c.dt_min <= dec.next_dt <= c.dt_max
    lo, hi = max(c.ratio_min * dt, c.dt_min), min(c.ratio_max * dt, c.dt_max)
    if lo <= hi:
        assert lo * (1 - 1e-12) <= dec.next_dt <= hi * (1 + 1e-12)


@given(dts, est, est, st.sampled_from([1, 2]))
def test_propose_nonincreasing_in_estimate(dt, a, b, order):
    lo, hi = sorted((a, b))
    assert propose_dt(dt, hi, TOL, order, 0.9) <= propose_dt(dt, lo, TOL, order, 0.9)


@given(dts, st.floats(1e-6, 1e-2), st.floats(1e-6, 1e-2))
def test_decide_matches_brute_force_selection(dt, e1, e2):
    c = cfg()
    dec = decide(StepOutcome("be", "y2", e1, e2), c, dt)
    cands = []
    for order, e in ((1, e1), (2, e2)):
        if e < TOL:
            raw = 0.9 * dt * (TOL / e) ** (1 / (order + 1))
            cands.append((clamp_dt(raw, dt, dt_min=c.dt_min, dt_max=c.dt_max), order))
    if not cands:
        assert not dec.accepted
        retry = max(clamp_dt(0.7 * dt * (TOL / e) ** (1 / (o + 1)), dt, dt_min=c.dt_min,
                             dt_max=c.dt_max) for o, e in ((1, e1), (2, e2)))
        assert dec.next_dt == pytest.approx(retry, rel=1e-12)
    else:
        best = max(cands)
        assert dec.accepted and dec.order == best[1]
        assert dec.next_dt == pytest.approx(best[0], rel=1e-12)
