"""Exception hierarchy shared by all nilmsrc modules.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
NumericError -> 3.
"""


class NilmError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(NilmError):
    """Bad command line, config file, or argument combination."""


class DataError(NilmError):
    """Input data violates a precondition (shape, ordering, content)."""


class NumericError(NilmError):
    """A numeric quantity required by the computation is unavailable."""


class DimensionMismatch(DataError):
    """Vector/matrix shapes do not agree."""


class ZeroColumn(DataError):
    """A dictionary column has (numerically) zero Euclidean norm."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"column {index} has zero norm")


class OracleTooLarge(UsageError):
    """Brute-force support enumeration would exceed the safety guard."""


class EmptyTrainingSet(DataError):
    """Classifier fit called with no training windows."""


class NoTrainedClasses(DataError):
    """Every class in the dictionary has zero training columns."""


class MissingColumn(DataError):
    """A required CSV column is absent from the header."""

    def __init__(self, name, message=None):
        self.name = name
        super().__init__(message or f"missing column {name!r}")


class NonMonotonicTimestamp(DataError):
    """Timestamps are out of order or duplicated."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"non-monotonic timestamp at data row {row}")


class NegativePower(DataError):
    """A power reading is negative; readings are rejected, not clamped."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"negative power at data row {row}")


class GridMismatch(DataError):
    """Traces of one household are not aligned to a common resampled grid."""


class TooFewWindows(DataError):
    """Not enough windows to produce a non-empty train/test split."""


class ZeroActualEnergy(NumericError):
    """Ground-truth energy sums to zero; the energy error is undefined."""
