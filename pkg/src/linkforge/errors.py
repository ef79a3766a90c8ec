"""Exception hierarchy shared across the pipeline."""


class LinkforgeError(Exception):
    """Base class for all errors raised by this package."""


class InvariantError(LinkforgeError):
    """A record violates one of its declared invariants; the message names it."""


class ParseError(LinkforgeError):
    """Malformed input (record line or article markup)."""

    def __init__(self, message, *, offset=None, line=None, column=None):
        location = []
        if offset is not None:
            location.append(f"byte {offset}")
        if line is not None:
            location.append(f"line {line}" + (f", col {column}" if column is not None else ""))
        if location:
            message = f"{message} ({'; '.join(location)})"
        super().__init__(message)
        self.offset = offset
        self.line = line
        self.column = column


class DataError(LinkforgeError):
    """Inputs are structurally valid but the requested operation cannot proceed."""


class InsufficientNegativesError(DataError):
    """Negative pool exhausted before reaching the requested count."""

    def __init__(self, requested, available):
        super().__init__(
            f"insufficient negatives: requested {requested}, only {available} available "
            f"(shortfall {requested - available})"
        )
        self.requested = requested
        self.available = available


class ScorerProtocolError(LinkforgeError):
    """External scorer broke the linkforge-scorer/1 protocol."""


class UsageError(LinkforgeError):
    """Bad command line or config; maps to exit code 1."""
