import math

import numpy as np
import pytest

from freshsense import trials
from freshsense.caf import CycleFreqSpec, estimate_caf
from freshsense.detector import (
    CalibratedThreshold,
    DirectPipeline,
    FreshPipeline,
    TestStatisticSpec,
    calibrate_threshold,
    decide,
    pipeline_statistics,
    spec_hash,
    statistic_batch,
    test_statistic,
    threshold_from_statistics,
)
from freshsense.errors import ConfigurationError, InvalidParameterError
from freshsense.fresh import FreshConfig
from freshsense.sigmodel import IqBuffer, RadioParams, phasor

FS = 102400.0


@pytest.fixture
def spec():
    return TestStatisticSpec.for_radio()


def test_default_alphas(spec):
    assert spec.alphas == (61440.0, 64640.0, 58240.0)
    assert spec.lag == 0 and spec.combine == "sum-abs"


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        TestStatisticSpec(())
    with pytest.raises(InvalidParameterError):
        TestStatisticSpec((1.0,), lag=-1)
    with pytest.raises(InvalidParameterError):
        TestStatisticSpec((1.0,), combine="max")


def test_zero_buffer_statistic(spec):
    assert test_statistic(IqBuffer(np.zeros(800), FS), spec) == 0.0


def test_carrier_tone_gives_unit_statistic(spec, radio):
    y = IqBuffer(phasor(radio.carrier_hz, np.arange(3200), FS), FS)
    assert test_statistic(y, spec) == pytest.approx(1.0, abs=1e-12)


def test_statistic_is_sum_of_caf_magnitudes(spec, rng):
    y = IqBuffer(rng.standard_normal(777) + 1j * rng.standard_normal(777), FS)
    parts = [abs(estimate_caf(y, CycleFreqSpec(a, 0, True)).value) for a in spec.alphas]
    assert test_statistic(y, spec) == pytest.approx(math.fsum(parts), rel=1e-12)


def test_abs_sum_combination(rng):
    s = TestStatisticSpec.for_radio(combine="abs-sum")
    y = IqBuffer(rng.standard_normal(500) + 1j * rng.standard_normal(500), FS)
    total = sum(estimate_caf(y, CycleFreqSpec(a, 0, True)).value for a in s.alphas)
    assert test_statistic(y, s) == pytest.approx(abs(total), rel=1e-12)
    assert test_statistic(y, s) <= test_statistic(y, TestStatisticSpec.for_radio()) + 1e-15


def test_phase_rotation_invariance(spec, rng):
    y = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    t0 = test_statistic(IqBuffer(y, FS), spec)
    t1 = test_statistic(IqBuffer(np.exp(1j * math.pi / 3) * y, FS), spec)
    assert t1 == pytest.approx(t0, rel=1e-12)


def test_quadratic_scaling(spec, rng):
    y = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    t0 = test_statistic(IqBuffer(y, FS), spec)
    assert test_statistic(IqBuffer(2 * y, FS), spec) == pytest.approx(4 * t0, rel=1e-12)


def test_discard_prefix(rng):
    y = rng.standard_normal(600) + 1j * rng.standard_normal(600)
    # dropping samples shifts the time origin; magnitudes are unaffected by that
    s = TestStatisticSpec.for_radio(discard=100)
    expected = test_statistic(IqBuffer(y[100:], FS), TestStatisticSpec.for_radio())
    assert test_statistic(IqBuffer(y, FS), s) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        statistic_batch(y[None, :50], TestStatisticSpec.for_radio(discard=50), FS)


def test_batch_matches_single(spec, rng):
    ys = rng.standard_normal((4, 300)) + 1j * rng.standard_normal((4, 300))
    batch = statistic_batch(ys, spec, FS)
    for row, t in zip(ys, batch):
        assert t == pytest.approx(test_statistic(IqBuffer(row, FS), spec), rel=1e-12)


# --- thresholds --------------------------------------------------------------


def test_threshold_median():
    stats = np.arange(1, 102, dtype=float)
    rng = np.random.default_rng(0)
    rng.shuffle(stats)
    # ceil(101 * 0.5) = 51st largest of 1..101 is 51
    assert threshold_from_statistics(stats, 0.5) == 51.0


def test_threshold_order_statistic():
    stats = np.random.default_rng(1).standard_normal(10000)
    assert threshold_from_statistics(stats, 0.01) == np.sort(stats)[-100]
    assert np.count_nonzero(stats > threshold_from_statistics(stats, 0.01)) == 99


def test_threshold_monotone_in_pf():
    stats = np.random.default_rng(2).exponential(size=5000)
    assert threshold_from_statistics(stats, 0.05) <= threshold_from_statistics(stats, 0.01)


def test_calibration_needs_enough_trials(spec):
    with pytest.raises(InvalidParameterError):
        calibrate_threshold(DirectPipeline(), spec, 800, 0.01, n_trials=4999)
    with pytest.raises(InvalidParameterError):
        calibrate_threshold(DirectPipeline(), spec, 800, 1.5, n_trials=5000)


def test_calibration_direct(spec):
    t = calibrate_threshold(DirectPipeline(), spec, 800, 0.05, n_trials=1000, seed=3)
    xs = trials.noise_batch(RadioParams(), 800, 3, trials.CALIBRATION, 0, 1000)
    stats = statistic_batch(xs, spec, FS)
    assert t.lam == np.sort(stats)[-50]
    assert t.spec_hash == spec_hash(DirectPipeline(), 800, spec)
    assert t.n_diverged == 0
    strict = calibrate_threshold(DirectPipeline(), spec, 800, 0.01, n_trials=5000, seed=3)
    assert strict.lam >= t.lam


def test_calibration_is_deterministic(spec):
    a = calibrate_threshold(DirectPipeline(), spec, 400, 0.1, n_trials=600, seed=9, chunk=128)
    b = calibrate_threshold(DirectPipeline(), spec, 400, 0.1, n_trials=600, seed=9, chunk=500)
    assert a == b


def test_spec_hash_binds_configuration(spec):
    fresh = FreshPipeline(FreshConfig.six_branch())
    hashes = {
        spec_hash(DirectPipeline(), 800, spec),
        spec_hash(DirectPipeline(), 1600, spec),
        spec_hash(fresh, 800, spec),
        spec_hash(FreshPipeline(FreshConfig.six_branch(step_size=1e-4)), 800, spec),
        spec_hash(DirectPipeline(), 800, TestStatisticSpec.for_radio(lag=16)),
    }
    assert len(hashes) == 5


# --- decisions ---------------------------------------------------------------


def _threshold(lam, spec, n, pipeline=DirectPipeline()):
    return CalibratedThreshold(lam, 0.01, 10000, spec_hash(pipeline, n, spec))


def test_zero_buffer_never_detected(spec):
    out = decide(IqBuffer(np.zeros(800), FS), spec, _threshold(1e-9, spec, 800))
    assert out.statistic == 0.0 and out.decision is False


def test_tie_is_not_a_detection(spec, rng):
    y = IqBuffer(rng.standard_normal(800) + 1j * rng.standard_normal(800), FS)
    t = test_statistic(y, spec)
    assert decide(y, spec, _threshold(t, spec, 800)).decision is False
    assert decide(y, spec, _threshold(np.nextafter(t, 0), spec, 800)).decision is True


def test_decide_rejects_foreign_threshold(spec):
    y = IqBuffer(np.zeros(800), FS)
    with pytest.raises(ConfigurationError):
        decide(y, spec, _threshold(1.0, spec, 1600))
    with pytest.raises(ConfigurationError):
        decide(y, spec, _threshold(1.0, spec, 800, FreshPipeline(FreshConfig.six_branch())))


def test_fresh_h0_statistic_is_positive(spec):
    xs = trials.noise_batch(RadioParams(), 800, 0, trials.HOLDOUT, 0, 20)
    stats, div = pipeline_statistics(FreshPipeline(FreshConfig.six_branch()), xs, spec, FS)
    assert not div.any()
    assert np.all(stats > 0)


def test_direct_high_snr_detection(spec):
    radio = RadioParams()
    t = calibrate_threshold(DirectPipeline(), spec, 3200, 0.01, 10000, seed=21, radio=radio)
    xs = trials.signal_batch(radio, 3200, 10.0, 21, 0, 1000)
    assert np.mean(statistic_batch(xs, spec, FS) > t.lam) >= 0.99


@pytest.mark.slow
def test_fresh_high_snr_detection(spec):
    radio = RadioParams()
    pipeline = FreshPipeline(FreshConfig.six_branch(radio))
    t = calibrate_threshold(pipeline, spec, 3200, 0.01, 5000, seed=22, radio=radio)
    xs = trials.signal_batch(radio, 3200, 10.0, 22, 0, 1000)
    stats, div = pipeline_statistics(pipeline, xs, spec, FS)
    assert not div.any()
    assert np.mean(stats > t.lam) >= 0.99
    y = pipeline.process(IqBuffer(xs[0], FS))
    assert decide(y, spec, t, pipeline).decision is True
