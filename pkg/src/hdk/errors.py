"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: input/format problems exit
with 2, geometric failures with 3, optimization failures with 4.
"""


class HdkError(Exception):
    """Base class for all toolkit errors."""


class FormatError(HdkError):
    """A file or payload does not match its documented schema."""


class DomainError(HdkError):
    """An input value is outside the documented domain."""


class GeometryError(HdkError):
    """A geometric operation cannot be carried out on this input."""


class OpenLayoutError(GeometryError):
    """A ray found no wall candidate; the layout does not close."""


class StaleTraceError(HdkError):
    """A render trace was produced from different inputs than supplied."""


class FitFailureError(HdkError):
    """The descent loop could not make progress before step underflow.

    Carries the loss trajectory observed up to the failure so callers
    can report how far the descent got.
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = [] if trajectory is None else [float(v) for v in trajectory]


class SnapFailureError(HdkError):
    """Axis-aligned snapping could not recover a valid polygon."""
