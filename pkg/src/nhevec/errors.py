"""Exception types raised by the numerical routines."""


class NhevecError(Exception):
    """Base class for all package errors."""


class DefectivePair(NhevecError):
    """Left/right eigenvector pairing failed (near-Jordan structure)."""


class SeparationViolated(NhevecError):
    """Selected eigenvalues are closer than the separation scale."""


class IllConditioned(NhevecError):
    """A linear solve would exceed the conditioning budget of double precision."""


class BranchAmbiguity(NhevecError):
    """Two admissible roots of the self-consistent cubic are indistinguishable."""


class QuadratureFailure(NhevecError):
    """Adaptive quadrature could not reach the requested tolerance."""


class BracketFailure(NhevecError):
    """No sign change on the root-finding bracket."""


class FDInstability(NhevecError):
    """Finite-difference estimates at two step sizes disagree."""


class EigenvalueCollision(NhevecError):
    """Eigenvector reconstruction hit a division by a vanishing eigenvalue gap."""


class PositivityLost(NhevecError):
    """A quadratic form that must be positive definite is not."""


class RunFailed(NhevecError):
    """An experiment exceeded its discard cap or could not be dispatched."""
