"""Exception types shared across vlmlab modules."""


class VlmlabError(Exception):
    """Base class for all vlmlab errors."""


class ShapeError(VlmlabError):
    """Operand shapes are incompatible for the requested operation."""


class RankError(VlmlabError):
    """A scalar was required (e.g. backward on a non-scalar tensor)."""


class DegenerateMaskError(VlmlabError):
    """A softmax row had every entry masked out."""


class EmptyLossError(VlmlabError):
    """A masked loss was requested with no unmasked positions."""


class ConfigError(VlmlabError):
    """Invalid or inconsistent configuration values."""


class InputError(VlmlabError):
    """Degenerate or malformed input data (e.g. an empty image)."""


class DanglingImageError(VlmlabError):
    """A document references an image index with no registered image."""


class CapacityError(VlmlabError):
    """A sequence would exceed the model's maximum context length."""


class PolicyError(VlmlabError):
    """A freeze-policy or adapter pattern resolves no parameters."""


class TargetError(VlmlabError):
    """An adapter pattern matched a parameter it cannot adapt."""


class StateError(VlmlabError):
    """Operation attempted in an invalid state (e.g. merge with pending grads)."""


class ExhaustionError(VlmlabError):
    """A mixture source was selected but its corpus is empty."""


class DivergenceError(VlmlabError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


class IntegrityError(VlmlabError):
    """A checkpoint or tensor file is corrupt or inconsistent with its manifest."""
