"""Impedance-transformed Josephson parametric amplifier toolkit."""
from .errors import (
    DivergenceError,
    DomainError,
    FitError,
    ImpaError,
    InfeasibleError,
    NoDecayError,
    NoResonanceError,
    OrderError,
    ParseError,
    PoleError,
    ThresholdError,
)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "DomainError",
    "FitError",
    "ImpaError",
    "InfeasibleError",
    "NoDecayError",
    "NoResonanceError",
    "OrderError",
    "ParseError",
    "PoleError",
    "ThresholdError",
]
