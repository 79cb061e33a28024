"""Exception and warning types shared across the package."""


class PatchHopfError(Exception):
    """Base class for all errors raised by patchhopf."""


class DimensionError(PatchHopfError, ValueError):
    """Inputs have incompatible or invalid shapes."""


class AssumptionError(PatchHopfError, ValueError):
    """A standing model assumption (dispersal or growth law) is violated."""


class NumericError(PatchHopfError, RuntimeError):
    """An iterative numerical method failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class NoPositiveEquilibriumError(PatchHopfError):
    """Requested a positive equilibrium at or beyond the critical dispersal rate."""


class ContinuationError(NumericError):
    """Newton failed from the supplied start; a smaller continuation step is needed."""


class BoundaryCaseError(PatchHopfError):
    """A patch or index sits on a degenerate boundary (ties, a_j - b_j = 0, ...)."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class NoCrossingError(PatchHopfError):
    """No purely imaginary root crossing exists in the requested regime."""


class RegimeBoundaryError(PatchHopfError):
    """The Hopf frequency collapsed to zero; the solution left its regime."""


class UnsupportedLawError(PatchHopfError, TypeError):
    """Operation only defined for a specific growth law."""


class DivergenceError(PatchHopfError, RuntimeError):
    """A simulated trajectory blew up."""


class PreconditionError(PatchHopfError, ValueError):
    """An operation was called outside its documented precondition."""


class PositivityWarning(UserWarning):
    """A simulated component went measurably negative."""


class ResolutionWarning(UserWarning):
    """A discretization appears under-resolved."""
