"""Exception hierarchy shared across the package."""


class OconError(Exception):
    """Base class for all errors raised by this package."""


class DataError(OconError, ValueError):
    """Input data could not be interpreted."""


class UnknownGroupChar(DataError):
    pass


class NonNumericSpeakerId(DataError):
    pass


class UnknownArpabetCode(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, column):
        super().__init__(f"missing column: {column!r}")
        self.column = column


class MalformedRow(DataError):
    def __init__(self, row_index, reason=""):
        msg = f"malformed row {row_index}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.row_index = row_index


class EmptyInput(DataError):
    pass


class KTooLarge(DataError):
    pass


class NonPositiveInput(DataError):
    pass


class EmptyColumn(DataError):
    pass


class ContainerError(OconError):
    """OCFS1 container could not be read."""


class BadMagic(ContainerError):
    pass


class VersionMismatch(ContainerError):
    pass


class TruncatedFile(ContainerError):
    pass


class ChecksumMismatch(ContainerError):
    pass


class DimensionMismatch(OconError, ValueError):
    pass


class StaleCache(OconError):
    pass


class FalseClassTooSmall(OconError, ValueError):
    def __init__(self, class_id, needed, available):
        super().__init__(
            f"false class {class_id} has {available} rows, {needed} required"
        )
        self.class_id = class_id


class EmptyVector(OconError, ValueError):
    pass


class EmptySweep(OconError, ValueError):
    pass


class ConflictingHP(OconError, ValueError):
    pass


class LengthMismatch(OconError, ValueError):
    pass


class SingleClassInput(OconError, ValueError):
    pass


class TrainingFailure(OconError):
    pass
