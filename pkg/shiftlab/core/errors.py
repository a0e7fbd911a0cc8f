"""
Root exception and warning categories shared across the toolkit.
"""


class ShiftLabError(Exception):
    """Base class for every error raised by shiftlab."""

    pass


class LowOverlapWarning(UserWarning):
    """Source and target distributions barely overlap; weights will be unstable."""

    pass


class DegeneratePriorWarning(UserWarning):
    """Only one class is present where class priors are being estimated."""

    pass
