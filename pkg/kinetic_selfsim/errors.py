"""Exception hierarchy for the kinetic self-similarity toolkit."""


class KineticError(ValueError):
    """Base class for every error raised by this package."""


class ParameterError(KineticError):
    """A physical or numerical parameter lies outside its admissible range."""


class GridError(KineticError):
    """Grid constraints violated (odd or too small n, L <= 0, mismatched grids)."""


class UnsupportedWeightError(KineticError):
    """Weight polynomial of degree larger than four."""


class DensityError(KineticError):
    """A density is zero or negative where its logarithm is needed."""


class StabilityError(KineticError):
    """Explicit time step violates the parabolic CFL restriction."""


class InsufficientHistoryError(KineticError):
    """Not enough recorded evolution steps to fit a blow-up rate."""


class ConfigError(KineticError):
    """Experiment configuration could not be validated."""
