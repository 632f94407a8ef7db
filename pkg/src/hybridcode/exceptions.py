"""Exception hierarchy shared across the pipeline."""


class HybridCodeError(Exception):
    """Base class for all package errors."""


class KBError(HybridCodeError):
    """Base class for knowledge-base / mapping load failures."""


class MissingFileError(KBError):
    pass


class MalformedDocumentError(KBError):
    pass


class InvalidCodeError(KBError):
    pass


class EmptyDescriptionError(KBError):
    pass


class MappingIntegrityError(KBError):
    """A keyword/abbreviation entry targets a code absent from the KB."""


class MissingEntryError(HybridCodeError):
    """Evidence check invoked for a code that is not a KB member."""


class ModelClientError(HybridCodeError):
    """Transport, timeout, or contract failure of a model client."""


class ConfigError(HybridCodeError):
    pass


class CorpusError(HybridCodeError):
    """Malformed corpus input; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InconsistentResultsError(HybridCodeError):
    """An internal metrics identity was violated; indicates a pipeline bug."""


class DomainError(HybridCodeError):
    """Arguments outside a statistical function's domain."""
