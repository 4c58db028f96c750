"""Exception hierarchy shared across the toolkit."""


class SanlmError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SanlmError):
    """Tensor shapes are incompatible for the requested operation."""


class ParameterError(SanlmError):
    """An argument is outside its legal range."""


class VocabularyError(SanlmError):
    """A token id is outside the vocabulary, or the vocabulary is invalid."""


class SequenceTooLongError(SanlmError):
    """A token sequence exceeds the model's supported maximum length."""


class DataError(SanlmError):
    """Input data is missing, empty, or malformed."""


class CheckpointError(DataError):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """File is not a recognizable checkpoint (bad magic or truncated)."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is unsupported."""


class CheckpointChecksumError(CheckpointError):
    """Checkpoint payload does not match its stored checksum."""


class VocabularyMismatchError(CheckpointError):
    """Checkpoint was trained with a different vocabulary."""
