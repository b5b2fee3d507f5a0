from typing import Sequence


class TransRPPGError(Exception):
    """Base exception for transrppg."""
    pass


class ConfigurationError(TransRPPGError):
    """Raised when a configuration key is unknown or its value is invalid."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"Invalid configuration '{key}': {reason}")


class TensorError(TransRPPGError):
    """Raised when a tensor is used in a way its shape or state does not allow."""
    pass


class DimensionError(TensorError):
    """Raised when operand shapes do not agree."""

    def __init__(self, op: str, *shapes: Sequence[int]):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        rendered = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"Shape mismatch in {op}: {rendered}")


class NumericError(TransRPPGError):
    """Raised when a non-finite value appears."""

    def __init__(self, where: str, detail: str = "non-finite values"):
        self.where = where
        self.detail = detail
        super().__init__(f"Numeric failure in {where}: {detail}")


class GradientCheckError(TransRPPGError):
    """Raised when a function cannot be gradient-checked."""
    pass


class TraceFormatError(TransRPPGError):
    """Raised when a trace file cannot be parsed."""

    def __init__(self, path: str, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class MapFormatError(TransRPPGError):
    """Raised when a binary MSTmap file is malformed."""
    pass


class CheckpointError(TransRPPGError):
    """Raised when a checkpoint cannot be written or read."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"Checkpoint '{path}': {reason}")


class MetricError(TransRPPGError):
    """Raised when a scored set cannot produce the requested metric."""
    pass


class ProtocolError(TransRPPGError):
    """Raised when an evaluation protocol receives invalid input."""
    pass


class CommandRegistrationError(TransRPPGError):
    """Raised when command registration fails."""

    def __init__(self, command_name: str, reason: str):
        self.command_name = command_name
        self.reason = reason
        super().__init__(f"Failed to register command '{command_name}': {reason}")


class InvalidCommandSignatureError(CommandRegistrationError):
    """Raised when a command handler signature is invalid."""
    pass


class InvalidTraceError(TransRPPGError):
    """Raised when a region trace set violates its schema."""
    pass


class MapBuildError(TransRPPGError):
    """Raised when an MSTmap cannot be built from the given input."""
    pass


class InvalidLabelError(TransRPPGError):
    """Raised when a label is not bonafide (1) or mask (0)."""
    pass
