import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats

from freshsense import energy
from freshsense.energy import (
    EnergyDetectorParams,
    closed_form_pd,
    closed_form_pf,
    energy_statistic,
    q_function,
    q_inverse,
    threshold_for_pf,
    uncertainty_bounds,
    worst_case_pd,
)
from freshsense.errors import InvalidParameterError
from freshsense.sigmodel import IqBuffer, trial_rng


def _bisect_q_inverse(p):
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * special.erfc(mid / math.sqrt(2)) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_energy_statistic_examples():
    assert energy_statistic(IqBuffer(np.zeros(10), 1.0)) == 0.0
    assert energy_statistic(IqBuffer([3 + 4j], 1.0)) == 25.0
    assert energy_statistic(IqBuffer(np.ones(17), 1.0)) == 17.0


def test_energy_statistic_batch_and_additivity(rng):
    xs = rng.standard_normal((4, 50)) + 1j * rng.standard_normal((4, 50))
    e = energy_statistic(xs)
    assert e.shape == (4,)
    whole = energy_statistic(IqBuffer(xs[0], 1.0))
    parts = energy_statistic(IqBuffer(xs[0, :20], 1.0)) + energy_statistic(IqBuffer(xs[0, 20:], 1.0))
    assert whole == pytest.approx(parts, rel=1e-14)
    assert e[0] == pytest.approx(whole, rel=1e-14)


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert q_function(2.3263478740408408) == pytest.approx(0.01, rel=1e-4)
    assert q_function(-1.7) == pytest.approx(1 - q_function(1.7), abs=1e-15)


def test_q_function_matches_reference_to_1e12():
    for x in np.linspace(-8, 8, 161):
        assert abs(q_function(x) - stats.norm.sf(x)) <= 1e-12


def test_q_inverse_values():
    assert q_inverse(0.5) == 0.0
    assert q_inverse(0.01) == pytest.approx(_bisect_q_inverse(0.01), abs=1e-10)
    assert q_inverse(0.01) == pytest.approx(2.3263, abs=5e-5)


@pytest.mark.parametrize("p", [1e-4, 0.01, 0.5, 0.99])
def test_q_round_trip(p):
    assert abs(q_function(q_inverse(p)) - p) < 1e-10


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_q_inverse_domain(p):
    with pytest.raises(InvalidParameterError):
        q_inverse(p)


@given(st.floats(1e-6, 0.5), st.floats(1e-6, 0.5))
def test_q_inverse_decreasing(p1, p2):
    if p1 < p2:
        assert q_inverse(p1) > q_inverse(p2)


def test_closed_form_pf_examples():
    assert closed_form_pf(1000.0, 1000, 1.0) == 0.5
    # (1104.03 - 1000) / sqrt(2000) = 2.32618...
    assert closed_form_pf(1104.03, 1000, 1.0) == pytest.approx(0.01, abs=1e-4)
    assert closed_form_pf(1e9, 1000, 1.0) == 0.0


def test_closed_form_pd_examples():
    assert closed_form_pd(2000.0, 1000, 1.0, 1.0) == 0.5
    assert closed_form_pd(1104.03, 1000, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    for lam in (900.0, 1050.0, 1200.0):
        assert closed_form_pd(lam, 1000, 1.0, 0.0) == closed_form_pf(lam, 1000, 1.0)


def test_threshold_for_pf():
    assert threshold_for_pf(0.5, 1000, 1.0) == 1000.0
    assert threshold_for_pf(0.01, 1000, 1.0) == pytest.approx(1000 + 2.3263478740408408 * math.sqrt(2000), rel=1e-12)
    assert threshold_for_pf(0.01, 1000, 1.0) == pytest.approx(1104.03, abs=0.01)
    for pf in (1e-3, 0.01, 0.2, 0.9):
        for var in ("real", "complex"):
            lam = threshold_for_pf(pf, 640, 2.5, var)
            assert abs(closed_form_pf(lam, 640, 2.5, var) - pf) < 1e-10


def test_complex_variance_convention():
    lam = threshold_for_pf(0.01, 1000, 1.0, "complex")
    assert lam == pytest.approx(1000 + q_inverse(0.01) * math.sqrt(1000), rel=1e-12)
    with pytest.raises(InvalidParameterError):
        closed_form_pf(1.0, 10, 1.0, "quaternion")


@pytest.mark.parametrize(
    "call",
    [
        lambda: closed_form_pf(1.0, 0, 1.0),
        lambda: closed_form_pf(1.0, 10, 0.0),
        lambda: closed_form_pd(1.0, 10, 1.0, -1.0),
        lambda: threshold_for_pf(1.0, 10, 1.0),
        lambda: uncertainty_bounds(1.0, -1.0),
        lambda: EnergyDetectorParams(0),
    ],
)
def test_invalid_parameters(call):
    with pytest.raises(InvalidParameterError):
        call()


def test_monotone_in_threshold():
    lams = np.linspace(800, 1400, 61)
    pf = [closed_form_pf(l, 1000, 1.0) for l in lams]
    pd = [closed_form_pd(l, 1000, 1.0, 0.2) for l in lams]
    assert np.all(np.diff(pf) <= 0) and np.all(np.diff(pd) <= 0)


@pytest.mark.parametrize("n", [800, 1600, 3200])
def test_pd_increases_with_signal_at_sweep_points(n):
    lam = threshold_for_pf(0.01, n, 1.0)
    snrs = 10 ** (np.arange(-20, 1, 2) / 10)
    pd = [closed_form_pd(lam, n, 1.0, s) for s in snrs]
    assert np.all(np.diff(pd) >= 0)


def test_uncertainty_bounds():
    assert uncertainty_bounds(2.0, 0.0) == (2.0, 2.0)
    low, high = uncertainty_bounds(1.0, 1.0)
    assert low == pytest.approx(0.7943282347242815, rel=1e-12)
    assert high == pytest.approx(1.2589254117941673, rel=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(0, 10))
def test_uncertainty_bounds_geometric(var, a):
    low, high = uncertainty_bounds(var, a)
    assert low * high == pytest.approx(var**2, rel=1e-12)


def test_worst_case_collapses_without_uncertainty():
    lam = threshold_for_pf(0.01, 1000, 1.0)
    assert worst_case_pd(0.01, 1000, 1.0, 0.3, 0.0) == closed_form_pd(lam, 1000, 1.0, 0.3)


def test_worst_case_matches_hand_composition():
    low, high = 10 ** -0.1, 10 ** 0.1
    z = stats.norm.isf(0.01)
    lam = 1000 * low + z * math.sqrt(2000) * low
    expected = stats.norm.sf((lam - 1000 * high) / math.sqrt(2000 * high**2))
    assert worst_case_pd(0.01, 1000, 1.0, 0.0, 1.0) == pytest.approx(expected, rel=1e-9)
    lam_w = 1000 * high + z * math.sqrt(2000) * high
    expected_w = stats.norm.sf((lam_w - 1000 * low) / math.sqrt(2000 * low**2))
    assert worst_case_pd(0.01, 1000, 1.0, 0.0, 1.0, convention="wall") == pytest.approx(expected_w, rel=1e-6, abs=1e-300)


def test_worst_case_relation_to_known_noise():
    # Record the actual ordering at a sweep point rather than assume one.
    known = worst_case_pd(0.01, 1600, 1.0, 0.1, 0.0)
    low = worst_case_pd(0.01, 1600, 1.0, 0.1, 1.0, convention="low-bound")
    wall = worst_case_pd(0.01, 1600, 1.0, 0.1, 1.0, convention="wall")
    assert low > known > wall
    with pytest.raises(InvalidParameterError):
        worst_case_pd(0.01, 1600, 1.0, 0.1, 1.0, convention="other")


def test_real_noise_false_alarm_matches_exact_tail():
    # The Gaussian form is an approximation: at N = 1000 the exact chi-square
    # tail at the 0.01 threshold is 0.01176.  Empirical Pf should track that.
    lam = threshold_for_pf(0.01, 1000, 1.0)
    exact = stats.chi2.sf(lam, 1000)
    rng = trial_rng(4, 4)
    trials = 100_000
    hits = 0
    for _ in range(trials // 10_000):
        hits += int(np.count_nonzero(energy_statistic(rng.standard_normal((10_000, 1000))) > lam))
    pf = hits / trials
    band = 3 * math.sqrt(exact * (1 - exact) / trials)
    assert abs(pf - exact) < band
