"""Exception types shared across the package."""


class CorgiError(Exception):
    """Base class for all errors raised by this package."""


# --- working memory / schemas ---

class DuplicateTypeError(CorgiError):
    pass


class DuplicateAttributeError(CorgiError):
    pass


class EmptyAttributeListError(CorgiError):
    pass


class UnknownTypeError(CorgiError):
    pass


class SchemaViolationError(CorgiError):
    pass


class UnknownFactIdError(CorgiError):
    pass


class FactParseError(CorgiError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# --- patterns ---

class DuplicateVarNameError(CorgiError):
    pass


class UndeclaredVarError(CorgiError):
    pass


class UnknownAttributeError(CorgiError):
    pass


class TypeMismatchError(CorgiError):
    pass


class PatternParseError(CorgiError):
    def __init__(self, message, pos=None):
        if pos is not None:
            message = f"at position {pos}: {message}"
        super().__init__(message)
        self.pos = pos


# --- relation graph / iteration ---

class StaleGraphError(CorgiError):
    pass


class UnknownVarError(CorgiError):
    pass


class UnknownBindingError(CorgiError):
    pass


class PendingChangesError(CorgiError):
    pass


class InvalidatedIteratorError(CorgiError):
    pass


# --- oracle / baseline ---

class OracleLimitError(CorgiError):
    pass


class BaselineMemoryOverflow(CorgiError):
    """Raised when the naive matcher's partial-match accounting exceeds its cap."""

    def __init__(self, level, tuples_so_far, bytes_accounted):
        super().__init__(
            f"partial-match memory overflow at level {level} "
            f"({tuples_so_far} tuples stored, {bytes_accounted} bytes accounted)"
        )
        self.level = level
        self.tuples_so_far = tuples_so_far
        self.bytes_accounted = bytes_accounted


class BaselineTimeout(CorgiError):
    pass


# --- benchmarking ---

class DegenerateFitError(CorgiError):
    pass
