"""Experiment runner: configuration, Monte-Carlo sweeps, CSV output and the CLI."""
from .config import METHODS, DEFAULT_SNR_GRID, ExperimentSpec, MseSpec, build_mse_spec, build_sweep_specs
from .experiment import (
    SweepDiagnostics,
    cyclo_threshold,
    energy_setup,
    run_detection_sweep,
    run_mse_experiment,
)
from .records import CalibrationStore, SweepRecord, emit_csv, format_sweep_csv, parse_sweep_csv, read_csv

__all__ = [
    "METHODS", "DEFAULT_SNR_GRID", "ExperimentSpec", "MseSpec", "build_mse_spec", "build_sweep_specs",
    "SweepDiagnostics", "cyclo_threshold", "energy_setup", "run_detection_sweep", "run_mse_experiment",
    "CalibrationStore", "SweepRecord", "emit_csv", "format_sweep_csv", "parse_sweep_csv", "read_csv",
]
