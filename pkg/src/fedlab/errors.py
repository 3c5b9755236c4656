"""Exception hierarchy shared by every fedlab module."""

from __future__ import annotations


class FedLabError(Exception):
    """Base class for all fedlab errors."""


class DimensionError(FedLabError, ValueError):
    """Vector lengths are empty, too short, or do not match."""


class NumericError(FedLabError, ArithmeticError):
    """An operation produced a non-finite value."""


class UndefinedMetric(FedLabError, ValueError):
    """A metric is undefined for the given input (e.g. a zero vector)."""


class StateError(FedLabError, RuntimeError):
    """An object is missing state an operation requires."""


class DegenerateFitness(FedLabError, ArithmeticError):
    """Elite fitness values sum to zero, so they cannot be normalised."""


class PayloadError(FedLabError, TypeError):
    """Client updates carry the wrong (or mixed) payload kinds."""


class ConfigError(FedLabError, ValueError):
    """Invalid configuration value.

    ``line`` is the 1-based source line when the value came from a file.
    """

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.message = message
        self.line = line
        self.source = source
        super().__init__(self.__str__())

    def __str__(self) -> str:
        where = self.source or "<config>"
        if self.line is not None:
            return f"{where}:{self.line}: {self.message}"
        return f"{where}: {self.message}"


class IoError(FedLabError, OSError):
    """Reading or writing a model artifact failed."""


class CorruptCheckpoint(FedLabError, ValueError):
    """Checkpoint bytes are truncated, malformed, or fail their checksum."""


class VersionError(FedLabError, ValueError):
    """Artifact declares a format version this build cannot read."""


class ArchitectureMismatch(FedLabError, ValueError):
    """Checkpoints in one population disagree on element count."""


class EmptyPopulation(FedLabError, ValueError):
    """No phenotypes were found where at least one is required."""


class ArtifactError(FedLabError, ValueError):
    """A written CSV or summary file failed validation on re-read."""
