"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class SemplausError(Exception):
    exit_code = 1


class UsageError(SemplausError):
    exit_code = 2


class ConfigurationError(UsageError):
    """Bad column mapping, config file or option combination."""


class DataError(SemplausError):
    exit_code = 3

    def __init__(self, message: str, rows: list[int] | None = None):
        super().__init__(message)
        self.rows = rows or []


class DegenerateDataError(DataError):
    pass


class InsufficientPoolError(DataError):
    def __init__(self, message: str, deficit: int):
        super().__init__(message)
        self.deficit = deficit


class MalformedPromptError(DataError):
    pass


class ModelStateError(SemplausError):
    exit_code = 3


class ProviderError(SemplausError):
    """A typing/detection provider or the KB could not be reached."""

    exit_code = 4
    retryable = True


class ProviderContractError(ProviderError):
    """Provider output violates its contract (e.g. two types for one trigger)."""

    retryable = False


class DefinitionMiss(SemplausError):
    """The knowledge base has no definition for an identifier."""

    exit_code = 3


class EncoderUnavailableError(SemplausError):
    exit_code = 4
