"""Exception types shared across the toolkit.

Exit-code mapping used by the CLI: usage errors exit 1, DataError and
subclasses exit 2, ExternalServiceError exits 3.
"""


class DpacheckError(Exception):
    """Base class for all toolkit errors."""


class DataError(DpacheckError):
    """Invalid input data or configuration (CLI exit 2)."""


class ParseError(DataError):
    """Malformed record in an input file; carries the offending line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: " if line is None else f"{path}:{line}: "
        super().__init__(f"{where}{message}")


class ValidationError(DataError):
    """Input parsed but violates an invariant (unknown ids, bad shapes, ...)."""


class CapabilityError(DataError):
    """A resource lacks an optional section required by the requested operation."""


class EmbeddingNotFoundError(DataError):
    """A sentence has no vector in the store. Never silently substituted."""

    def __init__(self, content_hash: int, text: str | None = None):
        self.content_hash = content_hash
        self.text = text
        detail = f" for text {text!r}" if text else ""
        super().__init__(f"embedding not found: hash {content_hash:#018x}{detail}")


class DivergenceError(DpacheckError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class ExternalServiceError(DpacheckError):
    """Remote provider/translation failure after retries (CLI exit 3)."""
