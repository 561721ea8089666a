"""Exception hierarchy shared by all modules.

Each error carries a short ``code`` string so that the command-line layer can
map failures to exit statuses without inspecting messages.
"""

__all__ = [
    "RevspecError",
    "ValidationError",
    "NumericError",
    "InvalidParameter",
    "NotSimpleSymmetric",
    "OutsideCone",
    "UnsupportedSurface",
    "ClosureFailure",
    "NoCertificate",
    "NoStationaryPath",
    "TruncatedTable",
    "NumericFailure",
    "ResolutionFailure",
]


class RevspecError(Exception):
    code = "error"


class ValidationError(RevspecError, ValueError):
    """Bad input: parameters, surfaces or preconditions."""

    code = "validation"


class NumericError(RevspecError, ArithmeticError):
    """A computation ran but could not reach its accuracy target."""

    code = "numeric"


class InvalidParameter(ValidationError):
    code = "invalid-parameter"


class NotSimpleSymmetric(ValidationError):
    code = "not-simple-symmetric"


class OutsideCone(ValidationError):
    code = "outside-cone"


class UnsupportedSurface(ValidationError):
    code = "unsupported-surface"


class TruncatedTable(ValidationError):
    code = "truncated-table"


class NoCertificate(ValidationError):
    code = "no-certificate"


class ClosureFailure(NumericError):
    code = "closure-failure"


class NoStationaryPath(NumericError):
    code = "no-stationary-path"


class NumericFailure(NumericError):
    code = "numeric-failure"


class ResolutionFailure(NumericError):
    code = "resolution-failure"
