"""Exception types raised across the package.

Everything derives from CoarsekError so callers can catch broadly; the CLI
maps these onto exit codes (parse -> 2, precondition/domain -> 3,
verification failure -> 1).
"""


class CoarsekError(Exception):
    """Base class for all package errors."""


class MalformedInputError(CoarsekError, ValueError):
    """Input data violates a structural precondition (bad file, bad simplex)."""


class UnknownSimplexError(CoarsekError, KeyError):
    """A simplex was requested that is not part of the complex."""


class UnsupportedDecompositionError(CoarsekError, ValueError):
    """Two-piece decomposition asked of a dimension-0 complex."""


class DomainError(CoarsekError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class ShapeError(CoarsekError, ValueError):
    """Operator shapes/spaces are incompatible."""


class SpectralGapError(CoarsekError, ArithmeticError):
    """An eigenvalue sits inside the forbidden band around 1/2."""


class PropagationError(CoarsekError, ValueError):
    """An operator has support where the construction requires none."""


class CapacityError(CoarsekError, ValueError):
    """Greedy isometry packing ran out of target fiber coordinates."""


class CertificateError(CoarsekError, ValueError):
    """A homotopy certificate cannot be built at the requested resolution."""


class NoDecayError(CoarsekError, ValueError):
    """An operator path never reaches the requested propagation bound."""


class VerificationFailure(CoarsekError, AssertionError):
    """A verification harness found a counterexample."""
