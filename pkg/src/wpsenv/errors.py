"""Exception hierarchy shared by every subsystem."""


class WpsEnvError(Exception):
    """Base class for all environment errors."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message


class ProtocolError(WpsEnvError):
    """Malformed or unsupported WPS document."""

    code = "protocol"


class ValidationError(WpsEnvError):
    """User-supplied value rejected before any side effect."""

    code = "validation"

    def __init__(self, message: str = "", widget: str | None = None):
        super().__init__(message)
        self.widget = widget


class PreconditionError(WpsEnvError):
    code = "precondition"


class NetworkError(WpsEnvError):
    """Remote endpoint unreachable or returned garbage transport-wise."""

    code = "network"


class NotFoundError(WpsEnvError):
    code = "not_found"


class GoneError(WpsEnvError):
    """Link exhausted or terminated; distinct from never-existed."""

    code = "gone"


class IllegalStateError(WpsEnvError):
    code = "illegal_state"


class QuotaExceededError(WpsEnvError):
    code = "quota"


class JobTimeoutError(WpsEnvError):
    code = "timeout"


class RemoteFault(WpsEnvError):
    """A WPS execution finished in the Failed state."""

    code = "remote_fault"


class ScriptError(WpsEnvError):
    """Lexical, syntactic or runtime error in a scenario program."""

    code = "script"

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.reason = message
        self.line = line
        self.col = col


class BudgetExceeded(WpsEnvError):
    """Scenario run hit its step, wall-clock or call-depth budget."""

    code = "budget"

    def __init__(self, kind: str):
        super().__init__(f"budget exceeded: {kind}")
        self.kind = kind
