"""Exception types shared across the package."""


class CallsumError(Exception):
    """Base class for all package errors."""


class MalformedInput(CallsumError):
    pass


class EmptyTranscript(CallsumError):
    pass


class UnknownSpeakerLabel(CallsumError):
    pass


class SeparatorCollision(CallsumError):
    pass


class InvalidBoundary(CallsumError):
    pass


class OversizedTurn(CallsumError):
    pass


class IndexOutOfRange(CallsumError):
    pass


class ModelUnavailable(CallsumError):
    pass


class EmptyGeneration(CallsumError):
    pass


class DivergenceDetected(CallsumError):
    pass


class TooShort(CallsumError):
    pass


class BackendUnavailable(CallsumError):
    pass


class ComponentOutOfRange(CallsumError):
    pass


class SessionFinalized(CallsumError):
    pass


class UnknownHighlight(CallsumError):
    pass


class VersionConflict(CallsumError):
    pass


class StageError(CallsumError):
    """Wraps a module error with the pipeline stage where it occurred."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
