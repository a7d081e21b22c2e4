"""Exception types shared across the package."""


class LidarclfError(Exception):
    """Base class for all package errors."""


class BadMagic(LidarclfError):
    """Input does not start with the LAS file signature."""


class UnsupportedFormat(LidarclfError):
    """LAS point data record format outside the supported set."""


class Truncated(LidarclfError):
    """File ends before the data the header declares."""


class SampleTooLarge(LidarclfError):
    """Requested subsample exceeds the number of available points."""


class EmptyCloud(LidarclfError):
    """Operation requires at least one point."""


class KTooLarge(LidarclfError):
    """Requested neighbor count k is not smaller than the point count."""


class PTooLarge(LidarclfError):
    """Requested number of components exceeds what the data supports."""


class DimMismatch(LidarclfError):
    """Input width does not match the fitted model."""


class EmptyMatrix(LidarclfError):
    """Confusion matrix holds no scored samples."""


class FoldError(LidarclfError):
    """A cross-validation fold failed; carries the fold index."""

    def __init__(self, fold: int, message: str):
        super().__init__(f"fold {fold}: {message}")
        self.fold = fold


class TrainingDiverged(LidarclfError):
    """Loss became non-finite during gradient descent."""


class SpecError(LidarclfError):
    """Experiment specification is invalid or inconsistent."""
