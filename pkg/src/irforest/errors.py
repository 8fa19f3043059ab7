"""Exception types raised across the package.

Everything derives from IrforestError so callers (notably the CLI) can map
any library failure to a single runtime exit code. I/O failures use the
builtin OSError family as-is.
"""


class IrforestError(Exception):
    """Base class for all library-specific errors."""


class MissingColumnError(IrforestError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"column {column!r} not found in header")


class NonNumericCellError(IrforestError):
    """A cell that should hold a finite number does not.

    ``row`` is the 1-based data-row index (header excluded). NaN and
    infinities count as non-numeric: datasets must be finite.
    """

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: not a finite number: {value!r}")


class InvalidLabelError(IrforestError):
    def __init__(self, row: int, value: float):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: classification label must be 0 or 1, got {value!r}")


class EmptyFileError(IrforestError):
    pass


class EmptyFeatureSetError(IrforestError):
    pass


class EmptySetError(IrforestError):
    pass


class DegenerateSplitError(IrforestError):
    pass


class UndefinedRateError(IrforestError):
    pass


class EmptyLeftError(IrforestError):
    pass


class DimensionMismatchError(IrforestError):
    pass


class LengthMismatchError(IrforestError):
    pass


class EmptyValidationError(IrforestError):
    pass


class MalformedModelError(IrforestError):
    pass


class VersionMismatchError(IrforestError):
    def __init__(self, found, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(f"model format version {found!r} not supported (expected {supported})")
