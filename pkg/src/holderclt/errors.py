"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and input problems exit
with 2, numerical failures with 3, and audit violations with 1.
"""


class HolderCltError(Exception):
    """Base class for package errors."""


class InputError(HolderCltError):
    """Bad user input: malformed files, out-of-range parameters."""


class DomainError(HolderCltError):
    """Argument outside the mathematical domain of an operation."""


class NonIntegrableError(HolderCltError):
    """Orlicz expectation cannot be brought below one for any finite scale."""


class Delta2DivergentError(HolderCltError):
    """The Delta2 constant diverged, downstream constants are undefined."""


class UnboundedConjugateError(HolderCltError):
    """Young-Fenchel transform diverges at a requested point."""


class EmptySupportError(HolderCltError):
    """A psi function was given an empty support interval."""


class NoCommonSupportError(HolderCltError):
    """Moment family supports do not intersect."""


class SupportBelowThetaError(HolderCltError):
    """Support lower endpoint does not exceed the ball exponent theta."""


class NotInvertibleError(HolderCltError):
    """A symbol could not be inverted at the requested value."""


class KramerViolationError(HolderCltError):
    """No finite scale satisfies the exponential moment bound."""


class MgfOverflowError(HolderCltError):
    """Empirical moment generating function overflowed."""

    def __init__(self, lam, msg=None):
        self.lam = lam
        super().__init__(msg or f"mgf overflow at lambda={lam!r}")


class DegenerateError(HolderCltError):
    """Degenerate input: zero distance, vanishing modulus, or constant field."""


class NotPsdError(HolderCltError):
    """Covariance matrix is not positive semidefinite even after jitter."""


class InsufficientReplicasError(HolderCltError):
    """Ensemble does not contain enough replicas for the requested operation."""


class NonFiniteError(HolderCltError):
    """A quantity required to be finite evaluated to infinity or NaN."""


class GammaNotPsiError(HolderCltError):
    """Derived gamma function is not a valid psi function on any support."""


class PreconditionError(HolderCltError):
    """A documented precondition of an audit failed."""
