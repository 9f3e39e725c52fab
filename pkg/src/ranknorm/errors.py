"""Exception types raised across the package."""


class RankNormError(Exception):
    """Base class for all package errors."""


class InputError(RankNormError, ValueError):
    """Malformed input: wrong shape, non-finite entries, bad parameters."""


class DimensionMismatch(InputError):
    """Feature counts of data and fitted statistics disagree."""


class TransformOverflow(RankNormError, ArithmeticError):
    """A monotone transform would leave the finite range."""


class SinkhornDivergence(RankNormError, ArithmeticError):
    """Sinkhorn scaling produced a non-finite value."""

    def __init__(self, iteration: int):
        super().__init__(f"Sinkhorn scaling became non-finite at iteration {iteration}")
        self.iteration = iteration


class TrainingDiverged(RankNormError, ArithmeticError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class CSVFormatError(InputError):
    """CSV input that cannot be parsed into a numeric feature matrix."""


class ControlDidNotFire(RankNormError):
    """A negative control failed to detect the violation it exists to detect."""
