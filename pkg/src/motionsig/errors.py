"""Exception hierarchy shared by all modules.

Every validation failure derives from :class:`ValidationError` (itself a
``ValueError``) so callers can catch broadly; the CLI maps the classes to
exit codes.
"""


class MotionSignalError(Exception):
    """Base class for all package errors."""


class ValidationError(MotionSignalError, ValueError):
    """Input violates a declared invariant or precondition."""


class FormatError(ValidationError):
    """File header (magic/version/fields) is not recognised."""


class CorruptFileError(ValidationError):
    """File header is valid but the payload disagrees with it."""


class InputError(ValidationError):
    """Arguments are mutually inconsistent (shapes, frame counts)."""


class FrameCountMismatch(InputError):
    def __init__(self, a: int, b: int, what: str = "inputs"):
        super().__init__(f"frame count mismatch between {what}: {a} != {b}")
        self.counts = (a, b)


class EmptySelectionError(ValidationError):
    """A selection (downsampling, region, subset) kept no points."""


class EmptyReferenceError(ValidationError):
    """No visible point in the normalization reference frame."""


class InverseDepthSingularityError(ValidationError):
    """A visible depth would make 1/(z + eps) non-finite or negative."""


class LiftError(ValidationError):
    """Depth map holds a non-positive or non-finite sample."""


class AssemblyError(ValidationError):
    """Attribute component has the wrong dimension."""
