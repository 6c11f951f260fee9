"""Exception hierarchy shared by all sdde modules."""


class SddeError(Exception):
    """Base class for library errors."""


class UnknownModel(SddeError, KeyError):
    pass


class DelayBoundViolation(SddeError, ValueError):
    pass


class GridMisaligned(SddeError, ValueError):
    pass


class DelayGridMisaligned(GridMisaligned):
    """n * tau is not an integer, so delayed arguments miss the grid."""


class OffGridDelay(SddeError, ValueError):
    pass


class OffGridQuery(SddeError, ValueError):
    pass


class NumericalBlowup(SddeError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class IncomparablePaths(SddeError, ValueError):
    pass


class OracleUnavailable(SddeError, ValueError):
    pass


class ConfigError(SddeError, ValueError):
    pass
