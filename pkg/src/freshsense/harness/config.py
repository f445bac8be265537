"""Experiment descriptions, presets and the key-value config format.

Config files hold one ``key = value`` per line; ``#`` starts a comment and
list values are comma separated.  Recognised keys:

======================  ==================================================
carrier_hz, baud_hz,    radio parameters
sample_rate_hz,
noise_var
method                  one or more of energy-known, energy-uncertain,
                        cyclo-direct, cyclo-fresh
n_samples               one or more record lengths
snr_grid_db             SNR values in dB
pf_target               target false-alarm probability
n_trials                H1 trials per SNR cell
n_h0_trials             held-out H0 trials per (method, N); 0 = n_trials
n_calibration_trials    H0 trials used to calibrate cyclo thresholds
uncertainty_db          noise-variance uncertainty for energy-uncertain
energy_variance         real | complex (Gaussian-approximation variance)
energy_convention       wall | low-bound (which bound sets the threshold)
step_size, n_taps       FRESH adaptation gain and taps per branch
lag, combine, discard   test-statistic options
seed                    master seed
mu_grid, iterations,    MSE experiment
window, runs, snr_db
======================  ==================================================
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..detector import TestStatisticSpec
from ..errors import ConfigurationError
from ..fresh import FreshConfig, DEFAULT_STEP_SIZE, DEFAULT_TAPS
from ..sigmodel import RadioParams

METHODS = ("energy-known", "energy-uncertain", "cyclo-direct", "cyclo-fresh")
DEFAULT_SNR_GRID = tuple(float(s) for s in np.arange(0, -21, -2))


@dataclass(frozen=True)
class ExperimentSpec:
    """One detection sweep: a single method at a single record length over an SNR grid."""

    method: str
    n_samples: int
    radio: RadioParams = RadioParams()
    snr_grid_db: tuple = DEFAULT_SNR_GRID
    pf_target: float = 0.01
    n_trials: int = 1000
    n_h0_trials: int = 0
    n_calibration_trials: int = 10000
    uncertainty_db: float = 1.0
    energy_variance: str = "complex"
    energy_convention: str = "wall"
    fresh: FreshConfig = field(default_factory=FreshConfig.six_branch)
    statistic: TestStatisticSpec = field(default_factory=TestStatisticSpec.for_radio)
    seed: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.n_trials < 1 or self.n_samples < 1:
            raise ConfigurationError("n_trials and n_samples must be >= 1")
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if not self.snr_grid_db:
            raise ConfigurationError("snr_grid_db must be nonempty")
        if not 0.0 < self.pf_target < 1.0:
            raise ConfigurationError("pf_target must lie in (0, 1)")
        if self.energy_variance not in ("real", "complex"):
            raise ConfigurationError("energy_variance must be 'real' or 'complex'")
        if self.energy_convention not in ("wall", "low-bound"):
            raise ConfigurationError("energy_convention must be 'wall' or 'low-bound'")

    @property
    def h0_trials(self):
        return self.n_h0_trials or self.n_trials


@dataclass(frozen=True)
class MseSpec:
    radio: RadioParams = RadioParams()
    fresh: FreshConfig = field(default_factory=FreshConfig.six_branch)
    mu_grid: tuple = (5e-6, 5e-5, 5e-4)
    iterations: int = 20000
    window: int = 200
    runs: int = 1
    snr_db: float = 0.0
    seed: int = 1


PRESETS = {
    "paper-fig2": {"kind": "mse"},
    "paper-fig3": {"kind": "sweep", "n_samples": [800]},
    "paper-fig4": {"kind": "sweep", "n_samples": [1600]},
    "paper-fig5": {"kind": "sweep", "n_samples": [3200]},
}


def resolve_preset(name):
    key = name if name in PRESETS else f"paper-{name}"
    if key not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return dict(PRESETS[key])


def _floats(v):
    return [float(s) for s in str(v).split(",") if s.strip()]


def _ints(v):
    return [int(s) for s in str(v).split(",") if s.strip()]


def _strs(v):
    return [s.strip() for s in str(v).split(",") if s.strip()]


_KEYS = {
    "carrier_hz": float, "baud_hz": float, "sample_rate_hz": float, "noise_var": float,
    "method": _strs, "n_samples": _ints, "snr_grid_db": _floats, "pf_target": float,
    "n_trials": int, "n_h0_trials": int, "n_calibration_trials": int,
    "uncertainty_db": float, "energy_variance": str, "energy_convention": str,
    "step_size": float, "n_taps": int, "lag": int, "combine": str, "discard": int,
    "seed": int, "mu_grid": _floats, "iterations": int, "window": int, "runs": int,
    "snr_db": float,
}


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def _radio(values):
    fields = {k: values[k] for k in ("carrier_hz", "baud_hz", "sample_rate_hz", "noise_var") if k in values}
    try:
        return RadioParams(**fields)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def _fresh(values, radio):
    try:
        return FreshConfig.six_branch(
            radio,
            n_taps=values.get("n_taps", DEFAULT_TAPS),
            step_size=values.get("step_size", DEFAULT_STEP_SIZE),
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def build_sweep_specs(values):
    """Expand merged config values into one ExperimentSpec per (method, N)."""
    radio = _radio(values)
    fresh = _fresh(values, radio)
    try:
        stat = TestStatisticSpec.for_radio(
            radio, lag=values.get("lag", 0), combine=values.get("combine", "sum-abs"),
            discard=values.get("discard", 0),
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    methods = values.get("method", list(METHODS))
    ns = values.get("n_samples", [800, 1600, 3200])
    common = {
        k: values[k]
        for k in ("pf_target", "n_trials", "n_h0_trials", "n_calibration_trials", "uncertainty_db",
                  "energy_variance", "energy_convention", "seed")
        if k in values
    }
    if "snr_grid_db" in values:
        common["snr_grid_db"] = tuple(values["snr_grid_db"])
    return [
        ExperimentSpec(method=m, n_samples=n, radio=radio, fresh=fresh, statistic=stat, **common)
        for m in methods
        for n in ns
    ]


def build_mse_spec(values):
    radio = _radio(values)
    kw = {k: values[k] for k in ("iterations", "window", "runs", "snr_db", "seed") if k in values}
    if "mu_grid" in values:
        kw["mu_grid"] = tuple(values["mu_grid"])
    return MseSpec(radio=radio, fresh=_fresh(values, radio), **kw)

