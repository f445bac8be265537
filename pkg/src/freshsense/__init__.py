"""Cyclostationary spectrum sensing with blind adaptive FRESH filters.

Submodules
----------
sigmodel   BPSK/AWGN generation and radio parameters
caf        cyclic autocorrelation estimators
energy     energy-detector closed forms and noise uncertainty
fresh      LCL-FRESH filter with blind LMS adaptation
detector   cyclic test statistic and CFAR calibration
harness    Monte-Carlo experiments and the ``freshsense`` CLI
"""
from .errors import ConfigurationError, DivergenceError, InvalidParameterError, ShapeError
from .sigmodel import IqBuffer, RadioParams

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DivergenceError", "InvalidParameterError", "ShapeError",
    "IqBuffer", "RadioParams",
]
