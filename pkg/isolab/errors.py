"""
Error Types
===========

Exception hierarchy shared by every isolab module. Each error carries an
integer code in the spirit of JSON-RPC error codes so that the CLI and the
verification reports can surface a stable identifier.
"""

from typing import Any, Dict, Optional


class ErrorCode:
    """Integer codes attached to isolab errors"""
    SHAPE_MISMATCH = -33001
    INDEX_RANGE = -33002
    SINGULARITY = -33003
    POLE_EVALUATION = -33004
    DIVERGENCE = -33005
    MISSING_GENERATOR = -33006
    DEGREE_PRESERVATION = -33007
    ASSIGNMENT = -33008
    DOMAIN = -33009
    INTEGRATION = -33010
    SPEC_FORMAT = -33011
    CONFIGURATION = -33012


class ExitCode:
    """Process exit codes of the command line front end"""
    OK = 0
    VERIFICATION_FAILED = 1
    USAGE_ERROR = 2


class IsolabError(Exception):
    """Base class for all isolab errors"""

    code = -33000

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        payload = {"code": self.code, "error": type(self).__name__, "message": self.message}
        if self.details:
            payload["details"] = {key: str(value) for key, value in self.details.items()}
        return payload


class ShapeMismatchError(IsolabError):
    """Matrix dimensions, slot counts or degrees do not line up"""
    code = ErrorCode.SHAPE_MISMATCH


class IndexRangeError(IsolabError):
    """An index lies outside its admissible range"""
    code = ErrorCode.INDEX_RANGE


class SingularityError(IsolabError):
    """A required inverse does not exist (t_1 = 0, singular gauge, zero top eigenvalue)"""
    code = ErrorCode.SINGULARITY


class PoleEvaluationError(IsolabError):
    """A rational matrix function was evaluated at one of its poles"""
    code = ErrorCode.POLE_EVALUATION


class DivergenceError(IsolabError):
    """A negative power of the confluence parameter survives the limit"""
    code = ErrorCode.DIVERGENCE


class MissingGeneratorError(IsolabError):
    """No value was supplied for a generator that occurs in a polynomial"""
    code = ErrorCode.MISSING_GENERATOR


class DegreePreservationError(IsolabError):
    """A quantized operator does not preserve the homogeneous degree"""
    code = ErrorCode.DEGREE_PRESERVATION


class AssignmentError(IsolabError):
    """A quantization assignment is incomplete or contradictory"""
    code = ErrorCode.ASSIGNMENT


class DomainError(IsolabError):
    """Input outside the domain of a coordinate change or diagnostic"""
    code = ErrorCode.DOMAIN


class IntegrationError(IsolabError):
    """The ODE integrator failed; details carry the path parameter and times"""
    code = ErrorCode.INTEGRATION


class SpecFormatError(IsolabError):
    """A JSON or YAML input file is malformed"""
    code = ErrorCode.SPEC_FORMAT


class ConfigurationError(IsolabError):
    """Invalid configuration value"""
    code = ErrorCode.CONFIGURATION
