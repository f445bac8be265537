"""Cyclic autocorrelation estimates from a single finite record.

Conjugation naming follows the usual cyclostationary convention:

* non-conjugate CAF (``conjugate=False``): ``mean x(n) x*(n+k) e^{-j2 pi a n Ts}``
* conjugate CAF (``conjugate=True``): ``mean x(n) x(n+k) e^{-j2 pi a n Ts}``

Both are averaged over the ``N - k`` available products (no padding, no
wraparound), so values are in signal-power units and comparable across
record lengths.  Cyclic frequencies are taken modulo the sample rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParameterError
from .sigmodel import IqBuffer, RadioParams, phase_cycles


@dataclass(frozen=True)
class CycleFreqSpec:
    alpha_hz: float
    lag: int = 0
    conjugate: bool = True


@dataclass(frozen=True)
class CafEstimate:
    spec: CycleFreqSpec
    value: complex
    n_used: int


def _check(x: IqBuffer, spec: CycleFreqSpec):
    n = len(x)
    if n == 0:
        raise InvalidParameterError("cannot estimate a CAF from an empty buffer")
    if spec.lag < 0 or spec.lag >= n:
        raise InvalidParameterError(f"lag {spec.lag} outside [0, {n})")
    return n - spec.lag


def _caf_array(samples, alpha_hz, lag, conjugate, fs):
    """Vectorised CAF along the last axis of ``samples`` (1-D or batched 2-D)."""
    n_used = samples.shape[-1] - lag
    head = samples[..., :n_used]
    tail = samples[..., lag:]
    prod = head * (tail if conjugate else np.conj(tail))
    rot = np.exp(-2j * np.pi * phase_cycles(alpha_hz, np.arange(n_used), fs))
    return (prod @ rot) / n_used


def estimate_caf(x: IqBuffer, spec: CycleFreqSpec) -> CafEstimate:
    n_used = _check(x, spec)
    value = _caf_array(x.samples, spec.alpha_hz, spec.lag, spec.conjugate, x.sample_rate_hz)
    return CafEstimate(spec, complex(value), n_used)


def estimate_caf_oracle(x: IqBuffer, spec: CycleFreqSpec) -> CafEstimate:
    """Reference CAF: one term at a time, exact rational phase, ``math.fsum`` accumulation.

    Slow by design.  Shares no arithmetic path with :func:`estimate_caf`.
    """
    n_used = _check(x, spec)
    data = [complex(v) for v in x.samples]
    alpha = Fraction(spec.alpha_hz)
    fs = Fraction(x.sample_rate_hz)
    re_terms, im_terms = [], []
    for n in range(n_used):
        a = data[n]
        b = data[n + spec.lag]
        if not spec.conjugate:
            b = b.conjugate()
        p = a * b
        cycles = (alpha * n / fs) % 1
        ang = -2.0 * math.pi * float(cycles)
        c, s = math.cos(ang), math.sin(ang)
        re_terms.append(p.real * c - p.imag * s)
        im_terms.append(p.real * s + p.imag * c)
    value = complex(math.fsum(re_terms), math.fsum(im_terms)) / n_used
    return CafEstimate(spec, value, n_used)


def caf_profile(x: IqBuffer, alphas, lag=0, conjugate=True):
    alphas = list(alphas)
    if not alphas:
        raise InvalidParameterError("alphas must be nonempty")
    return [estimate_caf(x, CycleFreqSpec(float(a), lag, conjugate)) for a in alphas]


def reduce_frequency(freq_hz, sample_rate_hz):
    """Map a frequency onto ``[0, fs)``."""
    r = math.fmod(freq_hz, sample_rate_hz)
    if r < 0:
        r += sample_rate_hz
    return 0.0 if r == sample_rate_hz else r


def bpsk_cycle_frequencies(params: RadioParams, k_max=1):
    """Non-conjugate and conjugate cycle frequencies of rectangular BPSK.

    Returns two sorted lists reduced modulo the sample rate:
    ``{+-m*baud : 1 <= m <= k_max}`` and ``{+-2fc +- m*baud : 0 <= m <= k_max}``.
    """
    if k_max < 1:
        raise InvalidParameterError("k_max must be >= 1 (alpha = 0 is ordinary stationarity)")
    fs = params.sample_rate_hz
    baud = params.baud_hz
    two_fc = 2.0 * params.carrier_hz
    plain = {reduce_frequency(s * m * baud, fs) for m in range(1, k_max + 1) for s in (1, -1)}
    conj = {
        reduce_frequency(s * two_fc + t * m * baud, fs)
        for m in range(0, k_max + 1)
        for s in (1, -1)
        for t in (1, -1)
    }
    return sorted(plain), sorted(conj)
