"""Radiometer baseline: energy statistic, Gaussian-approximation Pf/Pd, noise uncertainty.

The closed forms use the central-limit approximation of the energy
statistic.  Its variance depends on the sample type:

* ``"real"``    -- ``2 N sigma^4`` (real Gaussian samples; the textbook form)
* ``"complex"`` -- ``N sigma^4`` (circularly-symmetric complex samples)

``"real"`` is the default everywhere in this module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameterError
from .sigmodel import IqBuffer

_VAR_FACTOR = {"real": 2.0, "complex": 1.0}


@dataclass(frozen=True)
class EnergyDetectorParams:
    n_samples: int
    noise_var: float = 1.0
    signal_var: float = 0.0
    uncertainty_db: float = 0.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidParameterError("n_samples must be >= 1")
        if not self.noise_var > 0:
            raise InvalidParameterError("noise_var must be > 0")
        if self.signal_var < 0 or self.uncertainty_db < 0:
            raise InvalidParameterError("signal_var and uncertainty_db must be >= 0")


def energy_statistic(r):
    """Sum of ``|r(n)|^2``.

    Accepts an :class:`IqBuffer` or an array; arrays are reduced along the
    last axis so a ``(trials, N)`` batch gives one energy per trial.
    """
    samples = r.samples if isinstance(r, IqBuffer) else np.asarray(r)
    if np.iscomplexobj(samples):
        e = np.sum(samples.real**2 + samples.imag**2, axis=-1)
    else:
        e = np.sum(samples**2, axis=-1)
    return float(e) if np.ndim(e) == 0 else e


def q_function(x):
    """Standard Gaussian tail probability ``P(Z > x)``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def q_inverse(p):
    if not 0.0 < p < 1.0:
        raise InvalidParameterError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    # Q(+-40) underflows/saturates; the bracket covers every representable p.
    return brentq(lambda x: q_function(x) - p, -40.0, 40.0, xtol=1e-14, maxiter=500)


def _check(n, noise_var, variance):
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if not noise_var > 0:
        raise InvalidParameterError("noise_var must be > 0")
    if variance not in _VAR_FACTOR:
        raise InvalidParameterError(f"unknown variance convention {variance!r}")


def closed_form_pf(lam, n, noise_var, variance="real"):
    _check(n, noise_var, variance)
    sd = math.sqrt(_VAR_FACTOR[variance] * n * noise_var**2)
    return q_function((lam - n * noise_var) / sd)


def closed_form_pd(lam, n, noise_var, signal_var, variance="real"):
    _check(n, noise_var, variance)
    if signal_var < 0:
        raise InvalidParameterError("signal_var must be >= 0")
    total = noise_var + signal_var
    sd = math.sqrt(_VAR_FACTOR[variance] * n * total**2)
    return q_function((lam - n * total) / sd)


def threshold_for_pf(pf, n, noise_var, variance="real"):
    _check(n, noise_var, variance)
    return n * noise_var + q_inverse(pf) * math.sqrt(_VAR_FACTOR[variance] * n * noise_var**2)


def uncertainty_bounds(noise_var, a_db):
    if a_db < 0:
        raise InvalidParameterError("uncertainty must be >= 0 dB")
    return noise_var * 10.0 ** (-a_db / 10.0), noise_var * 10.0 ** (a_db / 10.0)


def worst_case_pd(pf, n, noise_var, signal_var, a_db, convention="low-bound", variance="real"):
    """Detection probability under a noise-variance uncertainty of ``a_db``.

    ``convention="low-bound"`` sets the threshold from the low variance bound
    and evaluates Pd at the high bound.  ``convention="wall"`` is the
    SNR-wall form: threshold from the high bound (Pf is then met for every
    variance in the interval) and Pd evaluated at the low bound.
    """
    low, high = uncertainty_bounds(noise_var, a_db)
    if convention == "low-bound":
        set_var, eval_var = low, high
    elif convention == "wall":
        set_var, eval_var = high, low
    else:
        raise InvalidParameterError(f"unknown worst-case convention {convention!r}")
    lam = threshold_for_pf(pf, n, set_var, variance)
    return closed_form_pd(lam, n, eval_var, signal_var, variance)
