"""Exception types shared across the package."""


class GraphSegError(Exception):
    """Base class for all package errors."""


class ShapeError(GraphSegError, ValueError):
    """Operands have incompatible shapes."""


class ConfigError(GraphSegError, ValueError):
    """A configuration value is outside its legal range."""


class NonFiniteError(GraphSegError, FloatingPointError):
    """A NaN or Inf appeared where only finite values are allowed."""


class DegenerateInputError(GraphSegError, ValueError):
    """Input data is structurally unusable (e.g. a zero-norm feature row)."""


class DegenerateGraphError(GraphSegError, ValueError):
    """The similarity graph has no edges, so modularity is undefined."""


class TapeStateError(GraphSegError, RuntimeError):
    """The autodiff tape was used out of order (e.g. backward twice)."""


class DivergenceError(GraphSegError, RuntimeError):
    """Training produced a non-finite loss.

    Carries the epoch index at which optimization blew up.
    """

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class JobError(GraphSegError, RuntimeError):
    """A segmentation job could not be completed."""


class FormatError(GraphSegError, ValueError):
    """A file did not conform to its binary or text format contract."""
