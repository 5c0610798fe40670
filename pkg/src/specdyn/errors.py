"""Exception hierarchy shared across the package."""


class SpecdynError(Exception):
    """Base class for all library errors."""


class ContractError(SpecdynError, ValueError):
    """Arguments violate an operation's preconditions (shapes, ranges)."""


class DivergenceError(SpecdynError, ArithmeticError):
    """A numerical step produced non-finite values.

    ``step`` is the index of the failing step, ``stage`` names the RK4 slope
    (``"k1"``..``"k4"``) when known, and ``partial`` holds whatever was
    computed before the failure (e.g. a partial trajectory).
    """

    def __init__(self, message, step=None, stage=None, partial=None):
        super().__init__(message)
        self.step = step
        self.stage = stage
        self.partial = partial


class FormatError(SpecdynError, ValueError):
    """A binary file is malformed; ``offset`` is the byte position at fault."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InsufficientHistoryError(ContractError):
    """Series too short to build augmented states or training pairs."""


class UnfillableDatesError(SpecdynError, ValueError):
    """Invalid dates with no valid observation inside the interpolation cutoff."""

    def __init__(self, dates):
        self.dates = list(dates)
        super().__init__("no valid date within cutoff for: " + ", ".join(self.dates))


class TrainingDiverged(DivergenceError):
    """Training loss became non-finite; ``checkpoint`` is the last finite model."""

    def __init__(self, message, epoch, checkpoint):
        super().__init__(message, step=epoch, partial=checkpoint)
        self.epoch = epoch
        self.checkpoint = checkpoint
