"""Monte-Carlo detection sweeps and the LMS learning-curve experiment."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import energy, trials
from ..detector import (
    DirectPipeline,
    FreshPipeline,
    calibrate_threshold,
    pipeline_statistics,
    spec_hash,
)
from ..errors import ConfigurationError, DivergenceError
from ..fresh import FreshState, MseTrace, run_blind
from ..sigmodel import IqBuffer, add, gen_awgn, gen_bpsk, snr_to_amplitude, trial_rng
from .config import ExperimentSpec, MseSpec
from .records import CalibrationStore, SweepRecord

log = logging.getLogger(__name__)

CHUNK = 500


@dataclass
class SweepDiagnostics:
    n_trials: int = 0
    n_diverged: int = 0
    thresholds: dict = field(default_factory=dict)

    @property
    def diverged_fraction(self):
        return self.n_diverged / self.n_trials if self.n_trials else 0.0

    def merge(self, other):
        self.n_trials += other.n_trials
        self.n_diverged += other.n_diverged
        self.thresholds.update(other.thresholds)


def pipeline_for(spec: ExperimentSpec):
    if spec.method == "cyclo-direct":
        return DirectPipeline()
    if spec.method == "cyclo-fresh":
        return FreshPipeline(spec.fresh)
    raise ConfigurationError(f"{spec.method} has no cyclostationary pipeline")


def cyclo_threshold(spec: ExperimentSpec, store: CalibrationStore | None = None):
    """Stored threshold for the spec's pipeline, or a fresh calibration (added to ``store``)."""
    pipeline = pipeline_for(spec)
    h = spec_hash(pipeline, spec.n_samples, spec.statistic)
    if store is not None:
        found = store.lookup(h, spec.pf_target, spec.n_calibration_trials, spec.seed)
        if found is not None:
            return found
    log.info("calibrating %s N=%d with %d H0 trials", spec.method, spec.n_samples, spec.n_calibration_trials)
    t = calibrate_threshold(pipeline, spec.statistic, spec.n_samples, spec.pf_target,
                            spec.n_calibration_trials, spec.seed, spec.radio, chunk=CHUNK)
    if store is not None:
        store.add(t, f"{spec.method} N={spec.n_samples} {pipeline.key} {spec.statistic.key()}")
    return t


def energy_setup(spec: ExperimentSpec):
    """Threshold and the noise variances used for H0 and H1 records.

    energy-known: threshold from the true variance.  energy-uncertain with
    the ``wall`` convention: threshold from the upper variance bound, noise
    records drawn at the upper bound (worst-case Pf) and signal records at
    the lower bound (worst-case Pd).  The ``low-bound`` convention swaps the
    bounds.
    """
    var = spec.radio.noise_var
    if spec.method == "energy-known":
        lam = energy.threshold_for_pf(spec.pf_target, spec.n_samples, var, spec.energy_variance)
        return lam, var, var
    low, high = energy.uncertainty_bounds(var, spec.uncertainty_db)
    set_var, eval_var = (high, low) if spec.energy_convention == "wall" else (low, high)
    lam = energy.threshold_for_pf(spec.pf_target, spec.n_samples, set_var, spec.energy_variance)
    return lam, set_var, eval_var


def _rate(stat_batches, lam):
    hits = valid = 0
    for s in stat_batches:
        ok = np.isfinite(s)
        valid += int(ok.sum())
        hits += int(np.count_nonzero(s[ok] > lam))
    return hits / valid if valid else float("nan")


def run_detection_sweep(spec: ExperimentSpec, store: CalibrationStore | None = None):
    """Empirical Pd per SNR cell and held-out Pf for one (method, N).

    Returns ``(records, diagnostics)``.  Diverged FRESH trials are dropped
    from the rates and counted in the diagnostics.
    """
    diag = SweepDiagnostics()
    radio, n = spec.radio, spec.n_samples
    if spec.method.startswith("energy"):
        lam, h0_var, h1_var = energy_setup(spec)

        def stats_for(xs):
            return energy.energy_statistic(xs)

    else:
        threshold = cyclo_threshold(spec, store)
        lam, h0_var, h1_var = threshold.lam, None, None
        pipeline = pipeline_for(spec)
        diag.thresholds[(spec.method, n)] = threshold

        def stats_for(xs):
            s, div = pipeline_statistics(pipeline, xs, spec.statistic, radio.sample_rate_hz)
            diag.n_diverged += int(div.sum())
            return s

    h0 = []
    for start, count in trials.chunks(spec.h0_trials, CHUNK):
        xs = trials.noise_batch(radio, n, spec.seed, trials.HOLDOUT, start, count, h0_var)
        h0.append(stats_for(xs))
        diag.n_trials += count
    pf = _rate(h0, lam)

    records = []
    for snr in spec.snr_grid_db:
        h1 = []
        for start, count in trials.chunks(spec.n_trials, CHUNK):
            xs = trials.signal_batch(radio, n, snr, spec.seed, start, count, h1_var)
            h1.append(stats_for(xs))
            diag.n_trials += count
        pd = _rate(h1, lam)
        records.append(SweepRecord(spec.method, n, snr, pd, pf, lam, spec.n_trials, spec.seed))
        log.info("%s N=%d snr=%g dB: pd=%.4f pf=%.4f", spec.method, n, snr, pd, pf)
    return records, diag


@dataclass
class MseResult:
    mu: float
    squared_error: np.ndarray
    diverged_at: int | None = None
    final_state: FreshState | None = None


def mse_record(spec: MseSpec, run, start=0):
    """Received record (BPSK plus noise) for learning-curve run ``run``.

    ``start`` offsets the record in time so that a resumed filter sees a
    carrier and symbol grid continuous with its stored sample index.
    """
    radio = spec.radio
    total = start + spec.iterations
    rng = trial_rng(spec.seed, trials.MSE, total, trials.snr_key(spec.snr_db), run)
    amp = snr_to_amplitude(spec.snr_db, radio.noise_var)
    x = gen_bpsk(radio, total, amp, rng)
    w = gen_awgn(total, radio.noise_var, rng, sample_rate_hz=radio.sample_rate_hz)
    r = add(x, w)
    return r if start == 0 else IqBuffer(r.samples[start:], r.sample_rate_hz)


def run_mse_experiment(spec: MseSpec, initial_state: FreshState | None = None):
    """Learning curves of the blind FRESH filter for every step size in the grid.

    Each run adapts on ``spec.iterations`` samples of BPSK plus noise at
    ``spec.snr_db``; per-sample squared errors are averaged over
    ``spec.runs`` independent records, then smoothed with a trailing window
    of ``spec.window`` samples.  Returns ``(rows, results)`` where rows are
    ``(mu, iteration, time_averaged_mse, diverged)`` with iterations counted
    from 1.  A diverged step size keeps all its rows, NaN from the
    divergence point on, with the flag set.
    """
    offset = initial_state.sample_index if initial_state is not None else 0
    inputs = [mse_record(spec, r, offset) for r in range(spec.runs)]
    rows, results = [], []
    for mu in spec.mu_grid:
        cfg = spec.fresh.with_step_size(mu)
        acc = np.zeros(spec.iterations)
        diverged_at = None
        final = None
        for k, x in enumerate(inputs):
            try:
                _, trace, state = run_blind(x, cfg, initial_state, spec.window)
                e2 = trace.squared_error
                if k == 0:
                    final = state
            except DivergenceError as exc:
                local = exc.sample_index - offset
                diverged_at = local if diverged_at is None else min(diverged_at, local)
                e2 = np.full(spec.iterations, np.nan)
                e2[: exc.partial.size] = exc.partial
            acc += e2
        acc /= spec.runs
        results.append(MseResult(mu, acc, diverged_at, final))
        avg = MseTrace(acc, spec.window).time_averaged()
        flag = diverged_at is not None
        rows.extend((mu, i + 1, float(v), flag) for i, v in enumerate(avg))
    return rows, results
