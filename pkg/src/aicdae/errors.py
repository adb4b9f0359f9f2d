"""Exception hierarchy shared by all modules."""


class AicError(Exception):
    """Base class for every error raised by :mod:`aicdae`."""


class ConfigurationError(AicError, ValueError):
    """Invalid parameters, shapes or window placement."""


class DegenerateInputError(AicError, ValueError):
    """Input that makes a construction meaningless (e.g. duplicate nodes)."""


class ContractViolation(AicError, ValueError):
    """Arguments that break a documented precondition between components."""


class RankDropError(AicError):
    """The numerical rank is not constant over a node window."""


class NonRegularError(AicError):
    """The reduction procedure does not terminate in a regular way."""


class SingularWindowError(AicError):
    """The least-squares design matrix of a window is rank deficient."""

    def __init__(self, message, sigma_min=None, window=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.window = window


class UnderdeterminedError(AicError):
    """Fewer equations than unknowns in a least-squares assembly."""


class InconsistencyError(AicError):
    """Index or degrees of freedom change between window boundaries."""


class DomainError(AicError, ValueError):
    """Evaluation point outside the domain of a piecewise object."""
