"""Exception types raised by the mapping engine."""


class GaussianValidationError(ValueError):
    """A Gaussian violates a representation invariant."""


class DimensionMismatchError(ValueError):
    """Two rasters that must share a shape do not."""


class FormatError(ValueError):
    """A file does not follow its declared binary or text layout."""


class LabelBudgetExceededError(RuntimeError):
    """The run tried to allocate more labels than allowed."""


class RenderError(RuntimeError):
    """Projection or blending produced an unusable value."""


class PipelineError(RuntimeError):
    """A module failed while processing a frame."""

    def __init__(self, frame_index: int, phase: str, cause: BaseException):
        """Record where the run stopped."""
        super().__init__(f"Frame {frame_index} failed during {phase}: {cause}")
        self.frame_index = frame_index
        self.phase = phase
        self.cause = cause
