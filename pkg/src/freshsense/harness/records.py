"""CSV formats: sweep results, MSE traces, CAF profiles and the calibration file."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from ..detector import CalibratedThreshold

SWEEP_HEADER = ("method", "n_samples", "snr_db", "pd", "pf", "lambda", "n_trials", "seed")
MSE_HEADER = ("mu", "iteration", "time_averaged_mse", "diverged")
CAF_HEADER = ("alpha_hz", "lag", "re", "im", "magnitude")
CALIBRATION_HEADER = ("spec_hash", "pf_target", "lambda", "n_trials", "seed", "n_diverged", "description")


@dataclass(frozen=True)
class SweepRecord:
    method: str
    n_samples: int
    snr_db: float
    empirical_pd: float
    empirical_pf: float
    lam: float
    n_trials: int
    seed: int
    n_diverged: int = 0

    def sort_key(self):
        return (self.method, self.n_samples, self.snr_db)


def _g(v):
    """Six significant digits, fixed across platforms."""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.6g}"


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def format_sweep_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in sorted(records, key=SweepRecord.sort_key):
        w.writerow([r.method, r.n_samples, _g(r.snr_db), _g(r.empirical_pd), _g(r.empirical_pf),
                    _g(r.lam), r.n_trials, r.seed])
    return buf.getvalue()


def emit_csv(records, path):
    _write(path, format_sweep_csv(records))


def parse_sweep_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SWEEP_HEADER:
        raise ValueError("not a sweep CSV (header mismatch)")
    return [
        SweepRecord(m, int(n), float(s), float(pd), float(pf), float(lam), int(nt), int(seed))
        for m, n, s, pd, pf, lam, nt, seed in rows[1:]
    ]


def read_csv(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    return parse_sweep_csv(text)


def format_mse_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MSE_HEADER)
    for mu, it, mse, diverged in rows:
        w.writerow([_g(mu), it, _g(mse), int(diverged)])
    return buf.getvalue()


def format_caf_csv(estimates):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CAF_HEADER)
    for e in estimates:
        v = e.value
        w.writerow([_g(e.spec.alpha_hz), e.spec.lag, _g(v.real), _g(v.imag), _g(abs(v))])
    return buf.getvalue()


class CalibrationStore:
    """Persisted thresholds keyed by ``(spec_hash, pf_target, n_trials, seed)``.

    Values are written with ``repr`` so a reloaded threshold is bit-identical
    to the one calibrated.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._entries = {}
        self._descriptions = {}
        if self.path is not None and self.path.exists():
            self._load()

    @staticmethod
    def _key(spec_hash, pf_target, n_trials, seed):
        return (spec_hash, float(pf_target), int(n_trials), None if seed is None else int(seed))

    def _load(self):
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise OSError(f"cannot read calibration file {self.path}: {exc}") from exc
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            return
        if tuple(rows[0]) != CALIBRATION_HEADER:
            raise ValueError(f"{self.path}: not a calibration file")
        for h, pf, lam, nt, seed, ndiv, desc in rows[1:]:
            t = CalibratedThreshold(float(lam), float(pf), int(nt), h, None if seed == "" else int(seed), int(ndiv))
            self.add(t, desc)

    def lookup(self, spec_hash, pf_target, n_trials, seed):
        return self._entries.get(self._key(spec_hash, pf_target, n_trials, seed))

    def add(self, threshold: CalibratedThreshold, description=""):
        k = self._key(threshold.spec_hash, threshold.pf_target, threshold.n_calibration_trials, threshold.seed)
        self._entries[k] = threshold
        self._descriptions[k] = description

    def __len__(self):
        return len(self._entries)

    def save(self, path=None):
        path = Path(path) if path else self.path
        if path is None:
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CALIBRATION_HEADER)
        for k in sorted(self._entries, key=lambda k: (k[0], k[1], k[2], -1 if k[3] is None else k[3])):
            t = self._entries[k]
            w.writerow([t.spec_hash, repr(float(t.pf_target)), repr(float(t.lam)), t.n_calibration_trials,
                        "" if t.seed is None else t.seed, t.n_diverged, self._descriptions.get(k, "")])
        _write(path, buf.getvalue())
