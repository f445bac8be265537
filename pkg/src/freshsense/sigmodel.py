"""BPSK primary-user signal, AWGN channel and radio-parameter helpers.

All randomness goes through ``numpy.random.Generator`` instances backed by
PCG64.  Per-trial streams come from :func:`trial_rng`, which derives a
``SeedSequence`` from ``(seed, *key)`` so a trial's samples depend only on
its coordinates and never on the order in which trials are executed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, ShapeError

DEFAULT_CARRIER_HZ = 30720.0
DEFAULT_BAUD_HZ = 3200.0
DEFAULT_OVERSAMPLING = 32


@dataclass(frozen=True)
class RadioParams:
    """Carrier, symbol rate, sampling rate and channel noise of the BPSK link.

    Defaults are the 30.72 kHz carrier / 3.2 kbaud link sampled at 32
    samples per symbol with unit noise variance.
    """

    carrier_hz: float = DEFAULT_CARRIER_HZ
    baud_hz: float = DEFAULT_BAUD_HZ
    sample_rate_hz: float = DEFAULT_BAUD_HZ * DEFAULT_OVERSAMPLING
    noise_var: float = 1.0
    snr_db: float = 0.0

    def __post_init__(self):
        if not self.noise_var > 0:
            raise InvalidParameterError(f"noise_var must be > 0, got {self.noise_var}")
        if not self.carrier_hz >= 0:
            raise InvalidParameterError(f"carrier_hz must be >= 0, got {self.carrier_hz}")
        for name in ("baud_hz", "sample_rate_hz"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        sps = self.sample_rate_hz / self.baud_hz
        if abs(sps - round(sps)) > 1e-9 or round(sps) < 1:
            raise InvalidParameterError(
                f"sample rate {self.sample_rate_hz} is not an integer multiple of baud {self.baud_hz}"
            )

    @property
    def samples_per_symbol(self) -> int:
        return int(round(self.sample_rate_hz / self.baud_hz))

    @property
    def amplitude(self) -> float:
        return snr_to_amplitude(self.snr_db, self.noise_var)


@dataclass(frozen=True, eq=False)
class IqBuffer:
    """Complex baseband samples; sample ``n`` sits at time ``n / sample_rate_hz``."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128, copy=True).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("IqBuffer samples must be finite")
        if not self.sample_rate_hz > 0:
            raise InvalidParameterError("sample_rate_hz must be > 0")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, IqBuffer):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(
            self.samples, other.samples
        )

    __hash__ = None


def phase_cycles(freq_hz, n, sample_rate_hz):
    """Fractional cycles ``freq * n / fs`` reduced modulo one period.

    ``freq`` is split into an integer part and a remainder so that the
    large product is formed exactly before the modulo reduction; phases stay
    accurate to ~1e-16 cycles even for sample indices in the millions.
    """
    n = np.asarray(n, dtype=np.float64)
    whole = math.floor(freq_hz)
    frac = freq_hz - whole
    return (np.fmod(whole * n, sample_rate_hz) + frac * n) / sample_rate_hz


def phasor(freq_hz, n, sample_rate_hz):
    """``exp(j 2 pi freq n / fs)`` evaluated from exact sample indices."""
    return np.exp(2j * np.pi * phase_cycles(freq_hz, n, sample_rate_hz))


def snr_to_amplitude(snr_db, noise_var):
    """Envelope ``A`` of a constant-modulus signal with ``A**2 / noise_var`` at ``snr_db``."""
    if not noise_var > 0:
        raise InvalidParameterError(f"noise_var must be > 0, got {noise_var}")
    return math.sqrt(noise_var * 10.0 ** (snr_db / 10.0))


def trial_rng(seed, *key):
    """Independent PCG64 generator for the stream addressed by ``(seed, *key)``.

    Key entries must be non-negative integers.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def gen_bpsk(params: RadioParams, n_samples, amplitude, rng) -> IqBuffer:
    """Rectangular-pulse BPSK on a complex carrier.

    ``x(n) = A * c[n // sps] * exp(j 2 pi f_c n T_s)`` with equiprobable
    ``c in {+1, -1}``; symbol boundaries and carrier phase are aligned to
    sample 0.
    """
    if n_samples < 0:
        raise InvalidParameterError("n_samples must be >= 0")
    sps = params.samples_per_symbol
    n_sym = -(-n_samples // sps)
    bits = rng.integers(0, 2, size=n_sym) * 2 - 1
    chips = np.repeat(bits.astype(np.float64), sps)[:n_samples]
    n = np.arange(n_samples)
    x = amplitude * chips * phasor(params.carrier_hz, n, params.sample_rate_hz)
    return IqBuffer(x, params.sample_rate_hz)


def gen_awgn(n_samples, noise_var, rng, complex_flag=True, sample_rate_hz=DEFAULT_BAUD_HZ * DEFAULT_OVERSAMPLING) -> IqBuffer:
    """White Gaussian noise with ``E|w|^2 = noise_var``.

    Complex noise is circularly symmetric (``noise_var / 2`` per component);
    real noise has variance ``noise_var`` and a zero imaginary part.
    """
    if not noise_var > 0:
        raise InvalidParameterError(f"noise_var must be > 0, got {noise_var}")
    if n_samples < 0:
        raise InvalidParameterError("n_samples must be >= 0")
    if complex_flag:
        g = rng.standard_normal((n_samples, 2))
        w = (g[:, 0] + 1j * g[:, 1]) * math.sqrt(noise_var / 2.0)
    else:
        w = rng.standard_normal(n_samples) * math.sqrt(noise_var) + 0j
    return IqBuffer(w, sample_rate_hz)


def add(a: IqBuffer, b: IqBuffer) -> IqBuffer:
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate_hz != b.sample_rate_hz:
        raise ShapeError(f"sample rate mismatch: {a.sample_rate_hz} vs {b.sample_rate_hz}")
    return IqBuffer(a.samples + b.samples, a.sample_rate_hz)


def zeros(n_samples, sample_rate_hz) -> IqBuffer:
    return IqBuffer(np.zeros(n_samples, dtype=np.complex128), sample_rate_hz)
