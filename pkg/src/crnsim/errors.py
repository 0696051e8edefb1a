"""Exception hierarchy shared across the package."""


class CrnError(Exception):
    """Base class for all package errors."""


class InvalidParams(CrnError, ValueError):
    pass


class ConnectivityFailure(CrnError):
    pass


class DomainError(CrnError, ValueError):
    pass


class WeightError(CrnError, ValueError):
    pass


class EmptyCandidateSet(CrnError, ValueError):
    pass


class TooManyCandidates(CrnError, ValueError):
    pass


class LengthMismatch(CrnError, ValueError):
    pass


class BatchMismatch(CrnError, ValueError):
    pass


class RankDeficient(CrnError):
    pass


class DimensionMismatch(CrnError, ValueError):
    pass


class GridTooLarge(CrnError, ValueError):
    pass


class ConfigError(CrnError, ValueError):
    pass
