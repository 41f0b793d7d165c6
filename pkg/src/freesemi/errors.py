"""Exception types shared across the package."""


class FreesemiError(Exception):
    """Base class for all package errors."""


class ConfigError(FreesemiError):
    """Bad configuration input (CLI exit code 2)."""


class NumericalError(FreesemiError):
    """Base class for numerical failures (CLI exit code 3)."""


class NonConvergent(NumericalError):
    """Adaptive refinement or a root finder exceeded its budget."""


class OnSupport(NumericalError):
    """Evaluation point sits on the support where the transform is singular."""


class Divergent(NumericalError):
    """Requested inverse-power moment does not converge."""


class WrongKind(NumericalError):
    """Operation applied to a singular point of the wrong kind."""


class OutOfRange(NumericalError):
    """Index or order outside the admissible range."""


class Unclassified(NumericalError):
    """Critical case outside the classified regimes (edge with g2 ~ 0)."""


class SideUndefined(NumericalError):
    """Requested side of a local law is the identically-zero branch."""


class InsufficientSamples(NumericalError):
    """Too few samples inside the fitting window."""


class NonPositive(NumericalError):
    """Power-law fit received non-positive samples."""


class Instability(NumericalError):
    """Orthogonalization lost too much precision."""


class TruncationTooTight(NumericalError):
    """Declared contour truncation fails its tail bound."""


class NewtonDiverged(NumericalError):
    """Newton iteration left its basin; caller may fall back to bisection."""


class BracketFailure(NumericalError):
    """A monotone bracket could not be established."""


class EigenFailure(NumericalError):
    """Eigenvalue decomposition failed."""


class EmptyRange(NumericalError):
    """Histogram range is degenerate or contains no samples."""


class MixingWarning(UserWarning):
    """MCMC acceptance rate outside the healthy window."""
