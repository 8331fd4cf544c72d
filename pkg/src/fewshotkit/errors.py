"""Exception hierarchy shared by every subpackage."""


class FewShotError(Exception):
    """Base class for all errors raised by fewshotkit."""


class ShapeError(FewShotError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(FewShotError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ContractError(FewShotError, ValueError):
    """A documented precondition of an operation was violated."""


class NumericError(FewShotError, FloatingPointError):
    """A NaN or infinity was produced (strict mode) or a run diverged."""


class TrainingError(NumericError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class AdaptationError(NumericError):
    pass


class ConfigError(FewShotError, ValueError):
    pass


class GridError(ConfigError):
    """An evaluation grid entry cannot be realised on the available classes."""


class SamplingError(FewShotError, ValueError):
    pass


class DegenerateFitError(FewShotError, ValueError):
    pass


class FileFormatError(FewShotError, IOError):
    """Base class for binary file decoding failures."""


class BadMagicError(FileFormatError):
    pass


class VersionMismatchError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    pass


class ChecksumError(FileFormatError):
    pass
