"""Exception types shared across the toolkit."""


class PTIsingError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameters(PTIsingError, ValueError):
    """Chain or cluster parameters violate a model invariant."""


class DenseLimitExceeded(PTIsingError):
    """A dense matrix was requested above the configured size limit."""


class ConvergenceError(PTIsingError):
    """An iterative or dense eigensolver failed to converge.

    ``diagnostics`` carries whatever the backend reported (iteration counts,
    number of converged pairs, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NoExceptionPoint(PTIsingError):
    """The PT-breaking indicator does not change across the bracket."""


class NoCrossing(PTIsingError):
    """No pair of scaling curves intersects."""


class ConfigError(PTIsingError):
    """Invalid run configuration (unknown key, bad type, failed constraint)."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where += f" [key {key}]"
        if line is not None:
            where += f" [line {line}]"
        super().__init__(message + where)
        self.key = key
        self.line = line


class StorageError(PTIsingError):
    """Reading or writing output/checkpoint files failed."""


class NonPositiveStructureFactor(PTIsingError, ValueError):
    """S(q1) <= 0, so the second-moment correlation length is undefined."""
