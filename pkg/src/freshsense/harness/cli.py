"""Command-line entry point: ``freshsense {caf,mse,calibrate,sweep}``.

Settings are layered: preset, then ``--config`` file, then explicit flags.

Exit codes: 0 success, 2 configuration error, 3 more than 1% of FRESH
trials diverged, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..caf import caf_profile
from ..errors import ConfigurationError, DivergenceError
from ..fresh import load_state, save_state
from ..sigmodel import add, gen_awgn, gen_bpsk, snr_to_amplitude, trial_rng
from . import config as cfgmod
from .experiment import SweepDiagnostics, cyclo_threshold, run_detection_sweep, run_mse_experiment
from .records import CalibrationStore, _write, format_caf_csv, format_mse_csv, format_sweep_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

DIVERGENCE_LIMIT = 0.01
CAF_STREAM = 99

log = logging.getLogger("freshsense")


def _csv_list(kind):
    def parse(text):
        return [kind(s) for s in text.split(",") if s.strip()]

    return parse


def _common(p):
    p.add_argument("--preset", help="paper-fig2 | paper-fig3 | paper-fig4 | paper-fig5")
    p.add_argument("--config", help="key = value file (see freshsense.harness.config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="freshsense", description="FRESH-filter cyclostationary spectrum sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("caf", help="dump a CAF profile of one simulated record")
    _common(p)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--n-samples", type=int, default=32000)
    p.add_argument("--alpha-start", type=float, default=55040.0)
    p.add_argument("--alpha-stop", type=float, default=68000.0)
    p.add_argument("--alpha-step", type=float, default=100.0)
    p.add_argument("--lag", type=int, default=0)
    p.add_argument("--non-conjugate", action="store_true")
    p.add_argument("--noise-only", action="store_true", help="omit the BPSK signal")

    p = sub.add_parser("mse", help="learning curves for a grid of step sizes")
    _common(p)
    p.add_argument("--mu", type=_csv_list(float), dest="mu_grid")
    p.add_argument("--iterations", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--state-out", help="save each step size's final state to <prefix>_mu<mu>.txt")
    p.add_argument("--resume", help="start adaptation from a saved state file")

    for name, text in (("calibrate", "calibrate CFAR thresholds"), ("sweep", "Pd/Pf versus SNR sweep")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--method", type=_csv_list(str))
        p.add_argument("--n-samples", type=_csv_list(int))
        p.add_argument("--pf", type=float, dest="pf_target")
        p.add_argument("--calibration-trials", type=int, dest="n_calibration_trials")
        p.add_argument("--calibration", help="calibration file to read and update")
        p.add_argument("--lag", type=int)
        p.add_argument("--combine", choices=("sum-abs", "abs-sum"))
        p.add_argument("--discard", type=int)
        p.add_argument("--step-size", type=float)
        if name == "sweep":
            p.add_argument("--snr-grid", type=_csv_list(float), dest="snr_grid_db")
            p.add_argument("--trials", type=int, dest="n_trials")
            p.add_argument("--h0-trials", type=int, dest="n_h0_trials")
            p.add_argument("--uncertainty-db", type=float)
            p.add_argument("--energy-variance", choices=("real", "complex"))
            p.add_argument("--energy-convention", choices=("wall", "low-bound"))
    return parser


_FLAG_KEYS = (
    "seed", "mu_grid", "iterations", "window", "runs", "snr_db", "method", "n_samples", "pf_target",
    "n_calibration_trials", "lag", "combine", "discard", "step_size", "snr_grid_db", "n_trials",
    "n_h0_trials", "uncertainty_db", "energy_variance", "energy_convention",
)


def merged_values(args, kind):
    values = {}
    if args.preset:
        preset = cfgmod.resolve_preset(args.preset)
        if preset.pop("kind") != kind:
            raise ConfigurationError(f"preset {args.preset} is not a {kind} preset")
        values.update(preset)
    if args.config:
        values.update(cfgmod.load_config(args.config))
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def _emit(text, out):
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def cmd_caf(args):
    if args.preset:
        # every preset uses the same radio; only the name is validated here
        cfgmod.resolve_preset(args.preset)
    values = cfgmod.load_config(args.config) if args.config else {}
    radio = cfgmod._radio(values)
    seed = args.seed if args.seed is not None else values.get("seed", 1)
    rng = trial_rng(seed, CAF_STREAM, args.n_samples)
    amp = 0.0 if args.noise_only else snr_to_amplitude(args.snr_db, radio.noise_var)
    x = gen_bpsk(radio, args.n_samples, amp, rng)
    r = add(x, gen_awgn(args.n_samples, radio.noise_var, rng, sample_rate_hz=radio.sample_rate_hz))
    alphas = np.arange(args.alpha_start, args.alpha_stop + args.alpha_step / 2, args.alpha_step)
    est = caf_profile(r, alphas, args.lag, not args.non_conjugate)
    _emit(format_caf_csv(est), args.out)
    return EXIT_OK


def cmd_mse(args):
    values = merged_values(args, "mse")
    spec = cfgmod.build_mse_spec(values)
    state = load_state(args.resume, spec.fresh) if args.resume else None
    rows, results = run_mse_experiment(spec, state)
    _emit(format_mse_csv(rows), args.out)
    for res in results:
        if res.diverged_at is not None:
            log.warning("mu=%g diverged at iteration %d", res.mu, res.diverged_at + 1)
        elif args.state_out and res.final_state is not None:
            save_state(res.final_state, spec.fresh, f"{args.state_out}_mu{res.mu:g}.txt")
    return EXIT_OK


def _specs(args, kind):
    values = merged_values(args, "sweep")
    if kind == "calibrate":
        values.setdefault("method", ["cyclo-direct", "cyclo-fresh"])
    return cfgmod.build_sweep_specs(values)


def cmd_calibrate(args):
    specs = _specs(args, "calibrate")
    path = args.calibration or args.out
    if not path:
        raise ConfigurationError("calibrate needs --calibration or --out")
    store = CalibrationStore(path)
    for spec in specs:
        if not spec.method.startswith("cyclo"):
            raise ConfigurationError(f"{spec.method} uses a closed-form threshold; nothing to calibrate")
        t = cyclo_threshold(spec, store)
        log.info("%s N=%d lambda=%r (%d diverged)", spec.method, spec.n_samples, t.lam, t.n_diverged)
        if t.n_diverged > DIVERGENCE_LIMIT * t.n_calibration_trials:
            store.save()
            return EXIT_DIVERGENCE
    store.save()
    return EXIT_OK


def cmd_sweep(args):
    specs = _specs(args, "sweep")
    store = CalibrationStore(args.calibration) if args.calibration else CalibrationStore()
    records = []
    diag = SweepDiagnostics()
    for spec in specs:
        recs, d = run_detection_sweep(spec, store)
        records.extend(recs)
        diag.merge(d)
    store.save()
    _emit(format_sweep_csv(records), args.out)
    bad_cal = [t for t in diag.thresholds.values() if t.n_diverged > DIVERGENCE_LIMIT * t.n_calibration_trials]
    if diag.diverged_fraction > DIVERGENCE_LIMIT or bad_cal:
        log.error("%.2f%% of trials diverged", 100 * diag.diverged_fraction)
        return EXIT_DIVERGENCE
    return EXIT_OK


COMMANDS = {"caf": cmd_caf, "mse": cmd_mse, "calibrate": cmd_calibrate, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
