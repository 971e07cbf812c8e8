"""Exception hierarchy shared by the compute modules and the CLI."""


class ImpaError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ImpaError, ValueError):
    """An argument lies outside the domain of the operation."""


class PoleError(ImpaError, ZeroDivisionError):
    """Evaluation hit a pole (open circuit, antiresonance, singular denominator)."""


class DivergenceError(DomainError):
    """Josephson inductance diverges (critical current fully suppressed)."""


class NoResonanceError(ImpaError):
    """No phase traversal was found in the search band."""


class InfeasibleError(ImpaError):
    """Requested target cannot be reached by the model."""


class ThresholdError(ImpaError):
    """Pump strength at or above the parametric oscillation threshold."""


class FitError(ImpaError):
    """Curve fit failed or the data cannot support the model."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoDecayError(FitError):
    """Coherence data shows no decaying trend."""


class ParseError(ImpaError, ValueError):
    """Malformed configuration or trace file."""

    def __init__(self, message, line=None, key=None):
        where = []
        if key is not None:
            where.append(f"key {key}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class OrderError(ParseError):
    """Frequency column is not strictly increasing."""
