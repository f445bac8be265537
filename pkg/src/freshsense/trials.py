"""Seeded Monte-Carlo trial batches.

Trial ``i`` of a batch draws from ``trial_rng(seed, stream, n_samples, snr_key, i)``:
data bits first (signal trials only), then noise.  The noise is unit-variance
Gaussian scaled by ``sqrt(noise_var)``, so the same trial under a different
noise variance or detector sees the same underlying draws.
"""
from __future__ import annotations

import numpy as np

from .sigmodel import RadioParams, gen_awgn, gen_bpsk, snr_to_amplitude, trial_rng

CALIBRATION = 0
HOLDOUT = 1
SIGNAL = 2
MSE = 3


def snr_key(snr_db):
    """Non-negative integer tag for an SNR value (milli-dB resolution)."""
    return int(round(snr_db * 1000)) + 1_000_000


def noise_batch(radio: RadioParams, n_samples, seed, stream, start, count, noise_var=None):
    """H0 records: rows ``start .. start+count-1`` of the stream."""
    var = radio.noise_var if noise_var is None else noise_var
    out = np.empty((count, n_samples), dtype=np.complex128)
    for i in range(count):
        rng = trial_rng(seed, stream, n_samples, 0, start + i)
        out[i] = gen_awgn(n_samples, var, rng, sample_rate_hz=radio.sample_rate_hz).samples
    return out


def signal_batch(radio: RadioParams, n_samples, snr_db, seed, start, count, noise_var=None):
    """H1 records: BPSK at ``snr_db`` (relative to ``radio.noise_var``) plus noise."""
    var = radio.noise_var if noise_var is None else noise_var
    amp = snr_to_amplitude(snr_db, radio.noise_var)
    key = snr_key(snr_db)
    out = np.empty((count, n_samples), dtype=np.complex128)
    for i in range(count):
        rng = trial_rng(seed, SIGNAL, n_samples, key, start + i)
        x = gen_bpsk(radio, n_samples, amp, rng).samples
        w = gen_awgn(n_samples, var, rng, sample_rate_hz=radio.sample_rate_hz).samples
        out[i] = x + w
    return out


def chunks(total, size):
    for start in range(0, total, size):
        yield start, min(size, total - start)
