"""Exception hierarchy. Each family maps to one CLI exit code."""


class CoalclustError(Exception):
    exit_code = 1


class ConfigError(CoalclustError, ValueError):
    exit_code = 2


class DataError(CoalclustError, ValueError):
    exit_code = 3


class NumericalError(CoalclustError, ArithmeticError):
    exit_code = 4


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a special function."""


class NonPSDError(NumericalError):
    """Covariance matrix could not be factorized even after jitter escalation."""


class SamplerFailure(NumericalError):
    """Slice sampler interval collapsed without finding an acceptable point."""


class InvalidTreeError(DataError):
    pass
