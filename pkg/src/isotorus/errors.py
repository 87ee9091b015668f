"""Exception types shared by the numerical modules.

The CLI maps ``ConfigError`` to exit status 2 and every ``NumericalError``
subclass to exit status 3.
"""


class ConfigError(ValueError):
    """Invalid input data or knob values."""


class NumericalError(RuntimeError):
    """A numerical routine could not deliver a certified answer."""


class PrecisionError(NumericalError):
    """Arithmetic precision budget exhausted."""


class NotFoundError(NumericalError):
    """A bounded search finished without a result."""


class BracketError(NumericalError):
    """Root bracket without a sign change."""

    def __init__(self, msg, samples=None):
        super().__init__(msg)
        self.samples = samples


class StiffnessError(NumericalError):
    """Integrator step size collapsed."""

    def __init__(self, msg, where=None):
        super().__init__(msg)
        self.where = where


class InvalidPotentialError(ConfigError):
    """Coefficient data violating reality or decay metadata."""


class InvalidFrameError(NumericalError):
    """Spectral data that cannot define a gap frame or a vector field."""


class ResolutionError(NumericalError):
    """Truncation too small to resolve the requested object."""


class AmbiguityError(NumericalError):
    """Two candidate eigen-branches cannot be told apart."""

    def __init__(self, msg, candidates=None):
        super().__init__(msg)
        self.candidates = candidates


class OutOfBandError(ConfigError):
    """Requested Fourier mode outside the admissible range."""
