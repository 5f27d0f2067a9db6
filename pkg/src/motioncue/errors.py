"""Exception types raised across the package."""


class MotionCueError(Exception):
    """Base class for all package-specific errors."""


class EmptyMask(MotionCueError):
    """An instance mask contains no set pixels."""


class DegenerateArrow(MotionCueError):
    """Arrow with start == end and no depth delta encodes nothing."""


class DimensionMismatch(MotionCueError):
    """Inputs that must share dimensions do not."""


class EmptyActiveSet(MotionCueError):
    """A token mask has no active sites to sample from."""


class BankTooSmall(MotionCueError):
    """Positional-code bank has fewer rows than the image stream."""


class ShapeMismatch(MotionCueError):
    """Array shapes disagree with the operation's contract."""


class OddWidth(MotionCueError):
    """Channel width must be even for pairwise rotation."""


class IndivisibleSplit(MotionCueError):
    """Channel width is not divisible by the axis split."""


class LengthMismatch(MotionCueError):
    """Paired token streams must have equal length."""


class BadStep(MotionCueError):
    """Diffusion step index outside the schedule."""


class NonFiniteLoss(MotionCueError):
    """Training loss became NaN or infinite."""


class DegenerateConfig(MotionCueError):
    """Physically meaningless configuration (e.g. coincident centers)."""


class NoContact(MotionCueError):
    """No collision occurred within the simulated horizon."""


class TooFewFrames(MotionCueError):
    """Motion analysis needs at least two frames."""


class MalformedFile(MotionCueError):
    """A file does not parse as its declared format."""


class ConstraintViolation(MotionCueError):
    """An input parses but breaks a documented value constraint."""
