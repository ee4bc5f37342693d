"""Exception hierarchy shared across the package."""


class EvasionLabError(Exception):
    """Base class for all errors raised by evasionlab."""


class EmptyInputError(EvasionLabError, ValueError):
    """A byte sequence that must be non-empty was empty."""


class PayloadTooLargeError(EvasionLabError, ValueError):
    """An append payload exceeds the threat-model byte cap.

    The attack is aborted rather than silently truncated.
    """


class ContextOverflowError(EvasionLabError, ValueError):
    """A token sequence is longer than the model's context window."""


class SequenceTooShortError(EvasionLabError, ValueError):
    """A token sequence is too short for next-token training (need >= 2)."""


class EmptyCorpusError(EvasionLabError, ValueError):
    """A training corpus (or one required class of it) is empty."""


class EmptyPrefixError(EvasionLabError, ValueError):
    """Generation was asked to condition on an empty prefix."""


class EmptyPoolError(EvasionLabError, ValueError):
    """A benign-sample pool required by an attack strategy is empty."""


class BudgetExhaustedError(EvasionLabError, RuntimeError):
    """An oracle query was attempted with no queries remaining."""


class IncompatibleThreatModelError(EvasionLabError, ValueError):
    """A strategy's feedback/query requirements conflict with the threat model."""


class ZeroDenominatorError(EvasionLabError, ValueError):
    """Evasion rate requested over zero samples."""


class DegenerateInputError(EvasionLabError, ValueError):
    """Paired test input whose differences have zero variance."""


class MissingCheckpointError(EvasionLabError, FileNotFoundError):
    """A required model checkpoint file does not exist."""


class CheckpointFormatError(EvasionLabError, ValueError):
    """A checkpoint file exists but is not a valid tensor container."""


class EmptyManifestError(EvasionLabError, ValueError):
    """A corpus manifest has no usable entries."""


class IoFailureError(EvasionLabError, OSError):
    """Corpus or report files could not be written."""
