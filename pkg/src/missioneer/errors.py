"""Exception hierarchy shared across the package.

Every error carries a stable ``code`` used by the wire protocol, so service
clients can dispatch on it without parsing messages.
"""


class MissioneerError(Exception):
    code = "Error"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def __str__(self):
        base = super().__str__()
        if self.details:
            extras = ", ".join(f"{k}={v!r}" for k, v in sorted(self.details.items()))
            return f"{base} ({extras})" if base else extras
        return base


class EmptyInput(MissioneerError):
    code = "EmptyInput"


class InvalidInput(MissioneerError):
    code = "InvalidInput"


class NotFound(MissioneerError):
    code = "NotFound"


class Conflict(MissioneerError):
    code = "Conflict"


class InvalidEdit(MissioneerError):
    code = "InvalidEdit"


class EmptyMap(MissioneerError):
    code = "EmptyMap"


class ParseError(MissioneerError):
    code = "ParseError"


class ValidationError(MissioneerError):
    code = "ValidationError"

    def __init__(self, message="", violations=None, **details):
        super().__init__(message, **details)
        self.violations = list(violations or [])

    def __str__(self):
        base = super().__str__()
        if self.violations:
            return base + ": " + "; ".join(self.violations)
        return base


class NoPath(MissioneerError):
    code = "NoPath"


class NavigationAborted(MissioneerError):
    code = "NavigationAborted"

    def __init__(self, message="", report=None, **details):
        super().__init__(message, **details)
        self.report = report


class EmptyCloud(MissioneerError):
    code = "EmptyCloud"


class NoOverlap(MissioneerError):
    code = "NoOverlap"


class GridMismatch(MissioneerError):
    code = "GridMismatch"


class StageError(MissioneerError):
    """A change-detection pipeline stage failed; names the stage."""

    code = "StageError"

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class InvalidRegistration(MissioneerError):
    code = "InvalidRegistration"


class UnknownAction(MissioneerError):
    code = "UnknownAction"


class InvalidParameters(MissioneerError):
    code = "InvalidParameters"


class ActionCancelled(MissioneerError):
    code = "ActionCancelled"


class ActionTimedOut(MissioneerError):
    code = "ActionTimedOut"


class UnreachableTask(MissioneerError):
    code = "UnreachableTask"

    def __init__(self, message="", offenders=None, **details):
        super().__init__(message, **details)
        self.offenders = list(offenders or [])


class ScheduledMissionInUse(MissioneerError):
    code = "ScheduledMissionInUse"


class MissionRejected(MissioneerError):
    code = "MissionRejected"


class Busy(MissioneerError):
    code = "Busy"


class ConfigError(MissioneerError):
    code = "ConfigError"


class DockFailed(MissioneerError):
    code = "DockFailed"


class ScanUnavailable(MissioneerError):
    code = "ScanUnavailable"


class AdapterPreconditionViolated(MissioneerError):
    code = "AdapterPreconditionViolated"


class StoreError(MissioneerError):
    code = "StoreError"


class ProtocolError(MissioneerError):
    code = "ProtocolError"
