class HybridVascError(Exception):
    """Base class for errors raised by this package."""


class NetworkFormatError(HybridVascError, ValueError):
    """Malformed network or configuration file."""


class NetworkValidationError(HybridVascError, ValueError):
    """A network violates a structural invariant."""


class SingularSystemError(HybridVascError, ValueError):
    """An assembled system has no unique solution (e.g. missing Dirichlet data)."""


class ConvergenceError(HybridVascError, RuntimeError):
    """The iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])


class ExperimentInfeasibleError(HybridVascError, ValueError):
    """A permeability experiment has no vessel nodes on an inflow or outflow facet."""


class ModelDefinitionError(HybridVascError, ValueError):
    """The hybrid model is undefined for the given decomposition (e.g. empty REV)."""
