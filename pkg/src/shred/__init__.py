"""Sensor-trajectory field reconstruction toolkit.

Temporal measurements from one or a few (possibly moving) sensors
determine the full spatio-temporal field of a linear PDE exactly; an
SVD-compressed LSTM + shallow-decoder surrogate generalizes the idea to
nonlinear and parametric problems.
"""

from . import pipeline, reconstruct, rom, sense, shrednet, simulate, spectral
from .errors import ShredError

__version__ = "0.1.0"

__all__ = [
    "ShredError",
    "pipeline",
    "reconstruct",
    "rom",
    "sense",
    "shrednet",
    "simulate",
    "spectral",
]
