"""Conjugate-cyclic hypothesis test with empirically calibrated CFAR thresholds.

The statistic sums the magnitudes of the conjugate CAF at ``2fc`` and
``2fc +- baud``.  It can be applied directly to the received record
(:class:`DirectPipeline`) or to the output of a blind FRESH filter adapted
on that record (:class:`FreshPipeline`).  Because filtering turns white
noise cyclostationary, thresholds are always quantiles of the statistic
over simulated noise-only records pushed through the same pipeline, and
they are bound by hash to the pipeline, record length and statistic.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import trials
from .caf import _caf_array
from .errors import ConfigurationError, DivergenceError, InvalidParameterError
from .fresh import FreshConfig, run_blind, run_blind_batch
from .sigmodel import IqBuffer, RadioParams

COMBINE_RULES = ("sum-abs", "abs-sum")


@dataclass(frozen=True)
class TestStatisticSpec:
    """Cycle frequencies, lag and combination rule of the test statistic.

    ``combine="sum-abs"`` adds the CAF magnitudes; ``"abs-sum"`` takes the
    magnitude of the complex sum.  ``discard`` drops that many leading
    output samples (e.g. an adaptation transient) before estimating.
    """

    __test__ = False

    alphas: tuple
    lag: int = 0
    combine: str = "sum-abs"
    discard: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.alphas:
            raise InvalidParameterError("at least one cycle frequency is required")
        if self.lag < 0 or self.discard < 0:
            raise InvalidParameterError("lag and discard must be >= 0")
        if self.combine not in COMBINE_RULES:
            raise InvalidParameterError(f"combine must be one of {COMBINE_RULES}")

    @classmethod
    def for_radio(cls, radio: RadioParams = RadioParams(), lag=0, combine="sum-abs", discard=0):
        two_fc = 2.0 * radio.carrier_hz
        return cls((two_fc, two_fc + radio.baud_hz, two_fc - radio.baud_hz), lag, combine, discard)

    def key(self):
        a = ",".join(repr(v) for v in self.alphas)
        return f"alphas={a};lag={self.lag};combine={self.combine};discard={self.discard}"


@dataclass(frozen=True)
class CalibratedThreshold:
    lam: float
    pf_target: float
    n_calibration_trials: int
    spec_hash: str
    seed: int | None = None
    n_diverged: int = 0


@dataclass(frozen=True)
class DetectorOutcome:
    statistic: float
    lam: float
    decision: bool


class DirectPipeline:
    """Statistic applied to the received record as is."""

    key = "direct"

    def process(self, r: IqBuffer) -> IqBuffer:
        return r

    def process_batch(self, xs):
        return xs, np.zeros(xs.shape[0], dtype=bool)


class FreshPipeline:
    """Blind FRESH adaptation on the record, statistic on the filter output."""

    def __init__(self, config: FreshConfig):
        self.config = config

    @property
    def key(self):
        return f"fresh[{self.config.config_hash()};mu={self.config.step_size!r}]"

    def process(self, r: IqBuffer) -> IqBuffer:
        return run_blind(r, self.config)[0]

    def process_batch(self, xs):
        return run_blind_batch(xs, self.config)


def spec_hash(pipeline, n_samples, spec: TestStatisticSpec):
    text = f"{pipeline.key}|N={int(n_samples)}|{spec.key()}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _combine(values, rule):
    if rule == "sum-abs":
        return np.sum(np.abs(values), axis=0)
    return np.abs(np.sum(values, axis=0))


def statistic_batch(ys, spec: TestStatisticSpec, sample_rate_hz):
    """Test statistic for every row of a ``(trials, N)`` array."""
    ys = np.asarray(ys)[..., spec.discard:]
    if ys.shape[-1] == 0 or spec.lag >= ys.shape[-1]:
        raise InvalidParameterError("record too short for the requested lag/discard")
    vals = np.stack([_caf_array(ys, a, spec.lag, True, sample_rate_hz) for a in spec.alphas])
    return _combine(vals, spec.combine)


def test_statistic(y: IqBuffer, spec: TestStatisticSpec) -> float:
    return float(statistic_batch(y.samples, spec, y.sample_rate_hz))


test_statistic.__test__ = False


def threshold_from_statistics(stats, pf_target):
    """The ``ceil(n * pf)``-th largest statistic."""
    stats = np.sort(np.asarray(stats, dtype=np.float64))
    if stats.size == 0:
        raise InvalidParameterError("no statistics to calibrate from")
    rank = math.ceil(stats.size * pf_target - 1e-9)
    rank = min(max(rank, 1), stats.size)
    return float(stats[-rank])


def pipeline_statistics(pipeline, xs, spec: TestStatisticSpec, sample_rate_hz):
    """Run a batch through the pipeline; returns ``(statistics, diverged_mask)``.

    Statistics of diverged rows are NaN.
    """
    ys, diverged = pipeline.process_batch(xs)
    stats = np.full(xs.shape[0], np.nan)
    ok = ~diverged
    if ok.any():
        stats[ok] = statistic_batch(ys[ok], spec, sample_rate_hz)
    return stats, diverged


def calibrate_threshold(pipeline, spec: TestStatisticSpec, n_samples, pf_target=0.01,
                        n_trials=10000, seed=0, radio: RadioParams = RadioParams(),
                        chunk=500, min_exceedances=50):
    """Empirical CFAR threshold from ``n_trials`` noise-only records.

    Records come from the calibration stream of ``seed``, so they never
    overlap the held-out noise records used to measure Pf.  Diverged trials
    are excluded and counted.
    """
    if not 0.0 < pf_target < 1.0:
        raise InvalidParameterError("pf_target must lie in (0, 1)")
    if n_trials * pf_target < min_exceedances:
        raise InvalidParameterError(
            f"{n_trials} trials give fewer than {min_exceedances} expected exceedances at pf={pf_target}"
        )
    collected = []
    n_div = 0
    for start, count in trials.chunks(n_trials, chunk):
        xs = trials.noise_batch(radio, n_samples, seed, trials.CALIBRATION, start, count)
        stats, div = pipeline_statistics(pipeline, xs, spec, radio.sample_rate_hz)
        collected.append(stats[~div])
        n_div += int(div.sum())
    collected = np.concatenate(collected)
    if collected.size == 0:
        raise DivergenceError(None, f"all {n_trials} calibration trials diverged")
    lam = threshold_from_statistics(collected, pf_target)
    return CalibratedThreshold(lam, pf_target, n_trials, spec_hash(pipeline, n_samples, spec), seed, n_div)


def decide(y: IqBuffer, spec: TestStatisticSpec, threshold: CalibratedThreshold,
           pipeline=DirectPipeline()) -> DetectorOutcome:
    """Declare H1 when the statistic strictly exceeds the threshold.

    ``y`` is the pipeline output for a record of the same length; the
    threshold must have been calibrated for that pipeline, length and spec.
    """
    expected = spec_hash(pipeline, len(y), spec)
    if threshold.spec_hash != expected:
        raise ConfigurationError(
            f"threshold {threshold.spec_hash} was calibrated for a different configuration ({expected})"
        )
    t = test_statistic(y, spec)
    return DetectorOutcome(t, threshold.lam, bool(t > threshold.lam))
