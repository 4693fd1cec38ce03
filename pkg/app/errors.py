"""Domain errors. Each carries the exit code the CLI reports for it."""


class BsaError(Exception):
    exit_code = 1


class InvalidStateError(BsaError, ValueError):
    """Polarization state is not normalized."""
    exit_code = 2


class InvalidParameterError(BsaError, ValueError):
    exit_code = 2


class InvalidConfigError(BsaError, ValueError):
    exit_code = 2


class InvalidPairError(BsaError, ValueError):
    exit_code = 2


class ConfigurationMismatchError(BsaError, ValueError):
    """Records that must describe the same basis settings do not."""
    exit_code = 2


class UnsupportedBasisError(BsaError, ValueError):
    exit_code = 2


class InvalidCalibrationError(BsaError, ValueError):
    exit_code = 2


class RequiresSampledCountsError(BsaError, ValueError):
    exit_code = 2


class RecordParseError(BsaError, ValueError):
    exit_code = 2


class MissingInputError(BsaError):
    exit_code = 3


class DegenerateDeductionError(BsaError, ArithmeticError):
    """A singles rate needed as a divisor is zero."""
    exit_code = 4


class UndefinedQberError(BsaError, ArithmeticError):
    exit_code = 4


class InsufficientDataError(BsaError):
    exit_code = 4


class MissingObservableError(BsaError):
    exit_code = 4


class CorrelationTableError(BsaError):
    exit_code = 4


def http_status(exc: BsaError) -> int:
    """HTTP status a route reports for a domain error."""
    return {2: 400, 3: 404, 4: 422}.get(exc.exit_code, 500)
