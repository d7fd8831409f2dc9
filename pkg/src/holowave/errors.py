"""Exception hierarchy with stable machine-readable codes.

Every error raised by the library derives from :class:`HolowaveError` and
carries a ``code`` string that the CLI copies into the run summary JSON.
"""


class HolowaveError(Exception):
    """Base class for all library errors."""

    code = "HW000"

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        out = {"code": self.code, "type": type(self).__name__, "message": str(self)}
        if self.details:
            out["details"] = {k: _jsonable(v) for k, v in sorted(self.details.items())}
        return out


def _jsonable(value):
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


# parameters and grids
class BelowThreshold(HolowaveError):
    code = "HW101"


class GridMismatch(HolowaveError):
    code = "HW102"


class NegativeOrder(HolowaveError):
    code = "HW103"


class InsufficientOrder(HolowaveError):
    code = "HW104"


class ParameterOrder(HolowaveError):
    code = "HW105"


class EmptyWindow(HolowaveError):
    code = "HW106"


class SignChange(HolowaveError):
    code = "HW107"


class IndexBudget(HolowaveError):
    code = "HW108"


# geometry
class DomainError(HolowaveError):
    code = "HW201"


class NotAAdS(HolowaveError):
    code = "HW202"


class SeriesOrderTooLow(HolowaveError):
    code = "HW203"


# peeling
class DerivativeBudget(HolowaveError):
    code = "HW301"


class ZeroResidual(HolowaveError):
    code = "HW302"


# elliptic
class SingularSystem(HolowaveError):
    code = "HW401"


class NotSmallEnough(HolowaveError):
    code = "HW402"


class ConvergenceFailure(HolowaveError):
    code = "HW403"


# evolution
class CFLViolation(HolowaveError):
    code = "HW501"


class NaNDetected(HolowaveError):
    code = "HW502"


class InsufficientHistory(HolowaveError):
    code = "HW503"


# holography
class DepthTooShallow(HolowaveError):
    code = "HW601"


class ExponentTooSmall(HolowaveError):
    code = "HW602"


class NoContraction(HolowaveError):
    code = "HW603"


class MaxIterExceeded(HolowaveError):
    code = "HW604"


# harness
class ConfigParse(HolowaveError):
    code = "HW701"


class ValidationFailed(HolowaveError):
    code = "HW702"


class MissingReport(HolowaveError):
    code = "HW703"
