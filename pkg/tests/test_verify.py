from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from befilter.driver import integrate
from befilter.problems import cubic, decay, tracking, zero
from befilter.stepper import be_step
from befilter.verify import (
    G_MATRIX,
    RateReport,
    a_stability_probe,
    check_equivalence,
    check_g_form,
    check_identity,
    consistency_rates,
    est2_quadratic_trials,
    fit_slope,
    g_form,
    lte_coefficients,
    lte_drop_ratio,
    random_identity_trials,
    run_all,
    sine_consistency,
)


def _identity_exact(a, b, c):
    a, b, c = Fraction(a), Fraction(b), Fraction(c)
    lhs = (Fraction(3, 2) * a - 2 * b + c / 2) * (Fraction(3, 2) * a - b + c / 2)
    e = lambda x, y: (x * x + (2 * x - y) ** 2 + (x - y) ** 2) / 4
    return lhs - (e(a, b) - e(b, c) + Fraction(3, 4) * (a - 2 * b + c) ** 2)


def test_identity_examples():
    assert check_identity(1.0, 0.0, 0.0) == 0.0
    assert check_identity(2.5, 2.5, 2.5) == 0.0


@given(st.integers(-1000, 1000), st.integers(-1000, 1000), st.integers(-1000, 1000))
def test_identity_holds_exactly_in_rationals(a, b, c):
    assert _identity_exact(a, b, c) == 0
    assert check_identity(a, b, c) <= 1e-12 * max(1, abs(a), abs(b), abs(c)) ** 2


def test_g_matrix_entries_exact():
    assert G_MATRIX == ((Fraction(3, 2), Fraction(-3, 4)), (Fraction(-3, 4), Fraction(1, 2)))
    G = np.array(G_MATRIX, dtype=float)
    assert np.all(np.linalg.eigvalsh(G) > 0)


def test_g_form_examples():
    assert g_form(np.array([1.0]), np.array([0.0])) == 1.5
    assert g_form(np.array([1.0]), np.array([1.0])) == 0.5
    assert check_g_form(1.0, 0.0) == 0.0
    assert check_g_form(1.0, 1.0) == 0.0


def test_random_trials_small():
    id_max, g_max = random_identity_trials(1000, seed=3)
    assert id_max <= 1e-12 and g_max <= 1e-12
    assert est2_quadratic_trials(1000, seed=3) <= 1e-12


def test_consistency_quadratic_and_cubic():
    dts = (0.1, 0.05)
    sq = consistency_rates(lambda t: t * t, lambda t: 2 * t, lambda t: 2.0, lambda t: 0.0,
                           dts=dts)
    assert max(sq.d_gap.errors) <= 1e-13
    cube = consistency_rates(lambda t: t ** 3, lambda t: 3 * t * t, lambda t: 6 * t,
                             lambda t: 6.0, dts=dts)
    for dt, gap in zip(dts, cube.d_gap.errors):
        assert gap == pytest.approx(2 * dt * dt, rel=1e-10)


def test_sine_consistency_rates_and_bounds():
    rep = sine_consistency()
    assert 1.9 <= rep.d_gap.slope <= 2.1
    assert 1.9 <= rep.i_gap.slope <= 2.1
    assert rep.bounds_hold


def test_rate_report_slope_oracle():
    dts = [0.1, 0.05, 0.025]
    rep = RateReport(dts, [3 * d ** 2 for d in dts])
    assert rep.slope == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(rep.pairwise, [2.0, 2.0], atol=1e-12)
    assert fit_slope(dts, dts) == pytest.approx(1.0, abs=1e-12)


def test_equivalence_examples():
    dt = 0.1
    assert check_equivalence(zero(), 1.0, 1.0, dt, 50) == 0.0
    y1, _ = be_step(decay(), 0.0, 1.0, dt)
    assert check_equivalence(decay(), 1.0, y1, dt, 100) <= 1e-11
    prob = cubic()
    y1, _ = be_step(prob, 0.0, 1.0, dt)
    assert check_equivalence(prob, 1.0, y1, dt, 100) <= 10 * prob.solver_tol


def test_a_stability_probe():
    probe = a_stability_probe()
    assert probe.bounded and probe.energy_monotone
    assert abs(probe.asymptotic_ratio - np.sqrt(1 / 3)) <= 1e-3
    # the characteristic polynomial z^2 - (2/3)(1 + 1/(1 - z0)) z + 1/3 has |roots| = sqrt(1/3)
    assert probe.root_modulus == pytest.approx(np.sqrt(1 / 3), rel=1e-9)


def test_a_stability_probe_moderate_stiffness():
    probe = a_stability_probe(z=-5.0, steps=40)
    assert probe.bounded
    assert probe.asymptotic_ratio == pytest.approx(np.sqrt(1 / 3), rel=1e-9)


@pytest.mark.parametrize("prob", [tracking(), cubic()], ids=["tracking", "cubic"])
def test_lte_coefficients_match_taylor_predictions(prob):
    coarse = lte_coefficients(prob, 5e-4, 0.7)
    fine = lte_coefficients(prob, 2.5e-4, 0.7)
    for key in ("filter", "double"):
        measured, predicted = fine[key]
        assert measured == pytest.approx(predicted, rel=0.03)
        # the remaining gap is the next Taylor term, so it halves with dt
        gap_ratio = (coarse[key][0] - coarse[key][1]) / (measured - predicted)
        assert 1.6 <= gap_ratio <= 2.4


def test_double_filter_drops_local_error_on_tracking():
    assert lte_drop_ratio() >= 1.5


def test_double_filter_smaller_error_on_tracking():
    prob = tracking()
    dt = 0.0125
    y0 = prob.exact(0.0)
    e2 = integrate(prob, y0, 0.0, 1.0, mode="constant_order2", dt0=dt)[0].states[-1]
    e3 = integrate(prob, y0, 0.0, 1.0, mode="constant_double", dt0=dt)[0].states[-1]
    ex = prob.exact(1.0)
    assert abs(e3 - ex)[0] < abs(e2 - ex)[0]


def test_run_all_passes():
    results = run_all(trials=200)
    assert len(results) == 12
    failed = [r.name for r in results if not r.passed]
    assert not failed
