"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Input rejected because of a dimension, range or shape mismatch."""


class TrainingDiverged(RuntimeError):
    """A loss or gradient became non-finite during training."""


class FormatError(ValueError):
    """A binary file could not be parsed.

    ``offset`` is the byte position at which parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedVersionError(FormatError):
    pass
