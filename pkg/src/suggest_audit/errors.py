"""Exception hierarchy shared by all suggest-audit modules."""


class SuggestAuditError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(SuggestAuditError):
    """Bad command line or API usage."""

    exit_code = 2


class ConfigError(SuggestAuditError):
    """Invalid configuration value (bad parameter range, unknown option)."""

    exit_code = 2


class ValidationError(SuggestAuditError):
    """Input data violates a documented invariant."""

    exit_code = 3


class InputError(SuggestAuditError):
    """A referenced input file or directory is missing or unreadable."""

    exit_code = 3


class TransportError(SuggestAuditError):
    """Network failure, non-2xx status, timeout, or missing replay fixture."""

    def __init__(self, message, engine=None, query=None):
        super().__init__(message)
        self.engine = engine
        self.query = query


class ParseError(ValidationError):
    """Response payload does not match the engine's documented shape."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class EmptyError(ParseError):
    """Payload is syntactically valid but the suggestion container is absent."""


class IoError(SuggestAuditError):
    """Read or write failure on a store file."""


class FormatError(ValidationError):
    """A stored file is corrupt; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class DegenerateError(ValidationError):
    """The data is too small or too uniform for the requested operation."""


class EmptyVocabularyError(ValidationError):
    """No lemma survived the preprocessing pipeline."""


class AllOovError(ValidationError):
    """No vocabulary lemma was found in the embedding table."""


class DimensionError(ValidationError):
    """Vector or matrix dimensions do not line up."""


class NonFiniteError(ValidationError):
    """NaN or infinity where finite values are required."""


class RankDeficiencyError(ValidationError):
    """Design matrix is not full column rank."""

    def __init__(self, message, columns=None):
        super().__init__(message)
        self.columns = columns or []


class UnknownLevelError(ValidationError):
    """A configured categorical level is not observed in the data."""


class DuplicateItemError(ValidationError):
    """A ranking contains the same item more than once."""


class TooShortError(ValidationError):
    """A time series has too few snapshots for the requested statistic."""


class SpecError(ConfigError):
    """A synthetic-corpus specification is impossible to satisfy."""
