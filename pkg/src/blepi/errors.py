"""Exception types raised across the package."""


class BLEPIError(Exception):
    """Base class for every error raised by blepi."""


class DatumError(BLEPIError, ValueError):
    """Structurally malformed datum (shapes, lengths, non-finite entries)."""


class ParameterError(BLEPIError, ValueError):
    """A parameter is outside its admissible range."""


class NotPositiveDefinite(BLEPIError, ValueError):
    pass


class RankDeficient(BLEPIError, ValueError):
    pass


class NumericalDomain(BLEPIError, ArithmeticError):
    """A quantity left its numerical domain (non-finite, non-positive derivative...)."""


class DegenerateSample(BLEPIError, ValueError):
    """Repeated sample points make a nearest-neighbour distance vanish."""
