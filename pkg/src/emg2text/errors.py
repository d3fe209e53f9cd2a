"""Exception taxonomy shared by all pipeline stages.

Every error carries a short category string so the CLI can report a
categorized failure and map it to an exit code.
"""


class Emg2TextError(Exception):
    """Base class for all pipeline errors."""

    category = "error"


class ParameterError(Emg2TextError, ValueError):
    """A scalar/config argument violates its contract."""

    category = "parameter"


class EmptyInputError(Emg2TextError, ValueError):
    """Input too short or empty where at least one element is required."""

    category = "empty-input"


class ConfigError(Emg2TextError, ValueError):
    """Config validation failed; lists every violated invariant."""

    category = "config"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class AlignmentError(Emg2TextError, ValueError):
    """Frame-count mismatch beyond tolerance or unusable alignment."""

    category = "alignment"


class DegenerateMaskError(Emg2TextError, ValueError):
    """An attention row has every position masked out."""

    category = "degenerate-mask"


class UnknownSessionError(Emg2TextError, KeyError):
    """Session id absent from the embedding table."""

    category = "session-lookup"


class GraphStateError(Emg2TextError, RuntimeError):
    """Backward requested without a recorded forward graph."""

    category = "graph-state"


class TrainingDivergenceError(Emg2TextError, RuntimeError):
    """Loss or gradients became NaN/Inf during training."""

    category = "training-divergence"


class VocabularyError(Emg2TextError, KeyError):
    """Token or token id not present in the vocabulary."""

    category = "vocabulary"


class IngestionError(Emg2TextError, ValueError):
    """Manifest or data file missing/malformed; names the offending entry."""

    category = "ingestion"


class ProviderTimeoutError(Emg2TextError, TimeoutError):
    """Remote correction provider failed to answer within the deadline."""

    category = "provider-timeout"
