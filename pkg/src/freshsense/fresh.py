"""Linear-conjugate-linear FRESH filter with blind LMS adaptation.

Each branch multiplies the input (or its conjugate) by ``exp(j 2 pi s n Ts)``
for its shift ``s`` and feeds the product through its own FIR filter; the
branch outputs are summed::

    u_b(n) = x(n)  e^{j 2 pi s_b n Ts}     linear branch
    u_b(n) = x*(n) e^{j 2 pi s_b n Ts}     conjugate-linear branch
    y(n)   = sum_b sum_l w_b[l] u_b(n - l)

Blind adaptation uses the received signal as the desired response,
``e(n) = x(n) - y(n)``, and the stochastic-gradient step
``w_b[l] += mu * e(n) * conj(u_b(n - l))``.

Two execution paths exist: :func:`filter_sample` / :func:`lms_step` work one
sample at a time on a :class:`FreshState`, and :func:`run_blind` /
:func:`run_blind_batch` run a compiled kernel over whole buffers.  They are
numerically interchangeable (tested).
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np

from .errors import ConfigurationError, DivergenceError, InvalidParameterError
from .sigmodel import IqBuffer, RadioParams, phase_cycles

# The TBB layer shipped with some distributions is too old and only warns; pick a
# layer that is always present unless the user chose one.
if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "workqueue"

DEFAULT_STEP_SIZE = 5e-5
DEFAULT_TAPS = 64


@dataclass(frozen=True)
class BranchSpec:
    shift_hz: float
    conjugate: bool
    n_taps: int = DEFAULT_TAPS

    def __post_init__(self):
        object.__setattr__(self, "shift_hz", float(self.shift_hz))
        object.__setattr__(self, "conjugate", bool(self.conjugate))
        object.__setattr__(self, "n_taps", int(self.n_taps))
        if self.n_taps < 1:
            raise InvalidParameterError("n_taps must be >= 1")


@dataclass(frozen=True)
class FreshConfig:
    branches: tuple
    sample_rate_hz: float
    step_size: float = DEFAULT_STEP_SIZE

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "step_size", float(self.step_size))
        if not self.branches:
            raise InvalidParameterError("a FRESH filter needs at least one branch")
        if self.step_size < 0 or not math.isfinite(self.step_size):
            raise InvalidParameterError("step_size must be finite and >= 0")
        if not self.sample_rate_hz > 0:
            raise InvalidParameterError("sample_rate_hz must be > 0")

    @classmethod
    def six_branch(cls, params: RadioParams = RadioParams(), n_taps=DEFAULT_TAPS, step_size=DEFAULT_STEP_SIZE):
        """Six branches: +-baud linear, +-2fc and +-(2fc + baud) conjugate-linear."""
        a1 = params.baud_hz
        a2 = 2.0 * params.carrier_hz
        a3 = 2.0 * params.carrier_hz + params.baud_hz
        branches = (
            BranchSpec(a1, False, n_taps),
            BranchSpec(-a1, False, n_taps),
            BranchSpec(a2, True, n_taps),
            BranchSpec(-a2, True, n_taps),
            BranchSpec(a3, True, n_taps),
            BranchSpec(-a3, True, n_taps),
        )
        return cls(branches, params.sample_rate_hz, step_size)

    def with_step_size(self, step_size):
        return FreshConfig(self.branches, self.sample_rate_hz, step_size)

    @property
    def n_weights(self):
        return sum(b.n_taps for b in self.branches)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum([b.n_taps for b in self.branches])]).astype(np.int64)

    def structure_key(self):
        """Canonical text of the branch layout and sample rate (step size excluded)."""
        parts = [f"fs={self.sample_rate_hz!r}"]
        parts += [f"{b.shift_hz!r}:{int(b.conjugate)}:{b.n_taps}" for b in self.branches]
        return ";".join(parts)

    def config_hash(self):
        return hashlib.sha256(self.structure_key().encode()).hexdigest()[:16]

    def _arrays(self):
        shifts = np.array([b.shift_hz for b in self.branches], dtype=np.float64)
        conj = np.array([b.conjugate for b in self.branches], dtype=np.bool_)
        taps = np.array([b.n_taps for b in self.branches], dtype=np.int64)
        return shifts, conj, taps


@dataclass
class FreshState:
    """Mutable adaptation state owned by one filter run.

    ``weights`` is the concatenation of the branch filters in branch order;
    ``delay_lines[b][l]`` is branch ``b``'s input ``l`` samples ago (index 0
    is the newest); ``sample_index`` is the absolute index of the next
    sample and drives the shifter phases.
    """

    weights: np.ndarray
    delay_lines: list
    sample_index: int = 0

    @classmethod
    def zeros(cls, config: FreshConfig):
        return cls(
            np.zeros(config.n_weights, dtype=np.complex128),
            [np.zeros(b.n_taps, dtype=np.complex128) for b in config.branches],
            0,
        )

    def branch_weights(self, config: FreshConfig, b):
        off = config.offsets
        return self.weights[off[b]:off[b + 1]]

    def copy(self):
        return FreshState(self.weights.copy(), [d.copy() for d in self.delay_lines], self.sample_index)


@dataclass
class MseTrace:
    squared_error: np.ndarray
    window: int = 200

    def time_averaged(self, window=None):
        """Trailing moving average of ``|e(n)|^2``; the first samples average what is available."""
        w = int(window or self.window)
        e = np.asarray(self.squared_error, dtype=np.float64)
        c = np.concatenate([[0.0], np.cumsum(e)])
        idx = np.arange(1, e.size + 1)
        lo = np.maximum(idx - w, 0)
        return (c[idx] - c[lo]) / (idx - lo)


def branch_input(x_n, spec: BranchSpec, n, sample_rate_hz):
    v = complex(x_n)
    if spec.conjugate:
        v = v.conjugate()
    cyc = float(phase_cycles(spec.shift_hz, n, sample_rate_hz))
    return v * complex(math.cos(2 * math.pi * cyc), math.sin(2 * math.pi * cyc))


def _check_finite(state: FreshState):
    if not np.all(np.isfinite(state.weights)):
        raise DivergenceError(state.sample_index)


def filter_sample(state: FreshState, config: FreshConfig, x_n):
    """Push one input sample through the filter and return ``y(n)``."""
    _check_finite(state)
    y = 0j
    for b, spec in enumerate(config.branches):
        dl = state.delay_lines[b]
        dl[1:] = dl[:-1]
        dl[0] = branch_input(x_n, spec, state.sample_index, config.sample_rate_hz)
        y += complex(np.dot(state.branch_weights(config, b), dl))
    state.sample_index += 1
    return y


def lms_step(state: FreshState, config: FreshConfig, x_n, d_n):
    """One blind-LMS iteration; returns ``(y, err)`` with ``err = d - y``."""
    y = filter_sample(state, config, x_n)
    err = complex(d_n) - y
    if not (math.isfinite(err.real) and math.isfinite(err.imag)):
        raise DivergenceError(state.sample_index - 1)
    mu = config.step_size
    off = config.offsets
    with np.errstate(over="ignore", invalid="ignore"):
        for b in range(len(config.branches)):
            state.weights[off[b]:off[b + 1]] += mu * err * np.conj(state.delay_lines[b])
    if not np.all(np.isfinite(state.weights)):
        raise DivergenceError(state.sample_index - 1)
    return y, err


@nb.njit(cache=True)
def _shifted_inputs(x, shifts, conj, fs, n0, hist, pad):
    n_br = shifts.shape[0]
    n = x.shape[0]
    u = np.zeros((n_br, pad + n), dtype=np.complex128)
    for b in range(n_br):
        for j in range(pad):
            u[b, pad - 1 - j] = hist[b, j]
        whole = math.floor(shifts[b])
        frac = shifts[b] - whole
        for i in range(n):
            idx = float(n0 + i)
            cyc = (np.fmod(whole * idx, fs) + frac * idx) / fs
            ang = 2.0 * math.pi * cyc
            v = x[i].conjugate() if conj[b] else x[i]
            u[b, pad + i] = v * complex(math.cos(ang), math.sin(ang))
    return u


@nb.njit(cache=True)
def _adapt(x, u, offsets, taps, pad, mu, w, y, e2):
    """Blind LMS over one record; ``w`` is updated in place. Returns the divergence index or -1."""
    n_br = taps.shape[0]
    for i in range(x.shape[0]):
        p = pad + i
        acc = 0j
        for b in range(n_br):
            o = offsets[b]
            for l in range(taps[b]):
                acc += w[o + l] * u[b, p - l]
        err = x[i] - acc
        y[i] = acc
        mag = err.real * err.real + err.imag * err.imag
        if not math.isfinite(mag):
            return i
        e2[i] = mag
        g = mu * err
        for b in range(n_br):
            o = offsets[b]
            for l in range(taps[b]):
                w[o + l] += g * u[b, p - l].conjugate()
    for j in range(w.shape[0]):
        if not (math.isfinite(w[j].real) and math.isfinite(w[j].imag)):
            return x.shape[0] - 1
    return -1


@nb.njit(cache=True)
def _run_one(x, shifts, conj, taps, offsets, fs, mu, w, hist, n0):
    pad = hist.shape[1]
    u = _shifted_inputs(x, shifts, conj, fs, n0, hist, pad)
    y = np.zeros(x.shape[0], dtype=np.complex128)
    e2 = np.zeros(x.shape[0], dtype=np.float64)
    bad = _adapt(x, u, offsets, taps, pad, mu, w, y, e2)
    return y, e2, bad, u


@nb.njit(cache=True, parallel=True)
def _run_batch(xs, shifts, conj, taps, offsets, fs, mu):
    n_trials, n = xs.shape
    pad = int(taps.max())
    ys = np.zeros((n_trials, n), dtype=np.complex128)
    bad = np.full(n_trials, -1, dtype=np.int64)
    for t in nb.prange(n_trials):
        w = np.zeros(offsets[-1], dtype=np.complex128)
        hist = np.zeros((shifts.shape[0], pad), dtype=np.complex128)
        u = _shifted_inputs(xs[t], shifts, conj, fs, 0, hist, pad)
        e2 = np.zeros(n, dtype=np.float64)
        y = np.zeros(n, dtype=np.complex128)
        bad[t] = _adapt(xs[t], u, offsets, taps, pad, mu, w, y, e2)
        ys[t] = y
    return ys, bad


def _history(state: FreshState, config: FreshConfig, pad):
    hist = np.zeros((len(config.branches), pad), dtype=np.complex128)
    for b, dl in enumerate(state.delay_lines):
        hist[b, : dl.size] = dl
    return hist


def run_blind(x: IqBuffer, config: FreshConfig, state: FreshState | None = None, window=200):
    """Adapt the filter over ``x`` with ``x`` itself as the training signal.

    Starts from zero weights unless a ``state`` is given (which is left
    untouched; the returned final state is a new object).

    Returns
    -------
    y : IqBuffer
        Filter output, one sample per input sample.
    trace : MseTrace
        Per-sample ``|x(n) - y(n)|^2``.
    final : FreshState

    Raises
    ------
    DivergenceError
        If the error becomes non-finite.
    """
    if len(x) == 0:
        raise InvalidParameterError("run_blind needs a nonempty buffer")
    if x.sample_rate_hz != config.sample_rate_hz:
        raise ConfigurationError("buffer and filter sample rates differ")
    state = FreshState.zeros(config) if state is None else state.copy()
    shifts, conj, taps = config._arrays()
    pad = int(taps.max())
    w = state.weights.astype(np.complex128, copy=True)
    y, e2, bad, u = _run_one(
        x.samples, shifts, conj, taps, config.offsets, float(config.sample_rate_hz),
        float(config.step_size), w, _history(state, config, pad), state.sample_index,
    )
    if bad >= 0:
        raise DivergenceError(state.sample_index + bad, partial=e2[:bad].copy())
    n = len(x)
    lines = []
    for b, spec in enumerate(config.branches):
        seq = u[b, : pad + n][::-1]
        lines.append(seq[: spec.n_taps].copy())
    final = FreshState(w, lines, state.sample_index + n)
    return IqBuffer(y, x.sample_rate_hz), MseTrace(e2, window), final


def run_blind_batch(xs, config: FreshConfig):
    """Blind adaptation of independent zero-initialised filters, one per row of ``xs``.

    Returns the ``(trials, N)`` output array and a boolean mask of diverged rows
    (whose outputs must not be used).
    """
    xs = np.ascontiguousarray(xs, dtype=np.complex128)
    if xs.ndim != 2:
        raise InvalidParameterError("expected a (trials, N) array")
    shifts, conj, taps = config._arrays()
    ys, bad = _run_batch(xs, shifts, conj, taps, config.offsets, float(config.sample_rate_hz), float(config.step_size))
    return ys, bad >= 0


_STATE_MAGIC = "# freshsense FRESH state v1"


def _pair(v):
    # repr of a Python float round-trips exactly
    return f"{float(v.real)!r} {float(v.imag)!r}"


def save_state(state: FreshState, config: FreshConfig, path):
    """Write a state snapshot as text.

    Layout: a magic line, then ``config_hash``, ``sample_index`` and ``taps``
    header lines, then one ``re im`` line per weight (branch order), then
    each branch's delay line (newest first) in the same form.
    """
    path = Path(path)
    lines = [
        _STATE_MAGIC,
        f"config_hash {config.config_hash()}",
        f"sample_index {state.sample_index}",
        "taps " + " ".join(str(b.n_taps) for b in config.branches),
        f"weights {state.weights.size}",
    ]
    lines += [_pair(v) for v in state.weights]
    for b, dl in enumerate(state.delay_lines):
        lines.append(f"delay {b} {dl.size}")
        lines += [_pair(v) for v in dl]
    path.write_text("\n".join(lines) + "\n")


def load_state(path, config: FreshConfig) -> FreshState:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0] != _STATE_MAGIC:
        raise ConfigurationError(f"{path}: not a FRESH state file")
    it = iter(rows[1:])

    def header(name):
        parts = next(it).split()
        if parts[0] != name:
            raise ConfigurationError(f"{path}: expected {name!r}, found {parts[0]!r}")
        return parts[1:]

    def values(count):
        out = np.empty(count, dtype=np.complex128)
        for i in range(count):
            re, im = next(it).split()
            out[i] = complex(float(re), float(im))
        return out

    digest = header("config_hash")[0]
    if digest != config.config_hash():
        raise ConfigurationError(f"{path}: state belongs to filter {digest}, not {config.config_hash()}")
    sample_index = int(header("sample_index")[0])
    header("taps")
    weights = values(int(header("weights")[0]))
    lines = []
    for _ in config.branches:
        _, size = header("delay")
        lines.append(values(int(size)))
    return FreshState(weights, lines, sample_index)
