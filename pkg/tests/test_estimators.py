import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from befilter.estimators import ErrorEstimates, est1, est2
from befilter.filters import filter_order2
from befilter.problems import decay
from befilter.verify import est2_quadratic_trials, local_errors


def test_est1_examples():
    np.testing.assert_array_equal(est1(np.array([2.0]), np.array([2.0])), [0.0])
    assert est1(3.0, 4.0) == 1.0
    y2 = filter_order2(4.0, 2.0, 1.0, 1.0)
    assert est1(4.0, y2) == pytest.approx(-1 / 3, rel=1e-14)


def test_est2_examples():
    # t^2 sampled at 3, 2, 1, 0
    assert est2(9.0, 4.0, 1.0, 0.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert est2(4.0, 2.0, 1.0, 0.0, 1.0, 1.0) == pytest.approx(2 / 11, rel=1e-14)


def test_est2_unavailable_during_startup():
    assert est2(1.0, 1.0, 1.0, None, 1.0, 1.0) is None
    assert est2(1.0, 1.0, None, None, 1.0, 1.0) is None


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_est2_vanishes_on_quadratics(rc, rp, a, b, c):
    t = np.cumsum([0.0, 0.2, 0.2 * rp, 0.2 * rp * rc])
    y = a + b * t + c * t ** 2
    assert abs(est2(y[3], y[2], y[1], y[0], rc, rp)) <= 1e-11 * (1 + np.abs(y).max())


def test_est2_randomized_histories():
    assert est2_quadratic_trials(1000, seed=3) <= 1e-12


def test_error_estimates_norms():
    e = ErrorEstimates.from_vectors(np.array([3.0, 4.0]))
    assert e.est1 == pytest.approx(5 / np.sqrt(2))
    assert e.est2 is None and e.est2_vec is None
    e = ErrorEstimates.from_vectors(np.array([1.0]), np.array([-2.0]))
    assert e.est2 == 2.0


@pytest.mark.parametrize("lam", [-1.0, -3.0, 0.5])
@pytest.mark.parametrize("dt", [0.02, 0.005])
def test_estimates_track_local_errors_on_dahlquist(lam, dt):
    errs = local_errors(decay(lam=lam), dt, t_n=0.5)
    r1 = abs(errs["est1"] / errs["be"])
    r2 = abs(errs["est2"] / errs["filter"])
    assert 0.25 <= r1 <= 4
    assert 0.25 <= r2 <= 4
