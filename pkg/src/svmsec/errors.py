"""Exception hierarchy shared by all svmsec modules."""


class SvmSecError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(SvmSecError, ValueError):
    """Bad shapes, out-of-range parameters or inconsistent inputs."""


class UnsupportedInputError(SvmSecError, ValueError):
    """Input is well formed but cannot be handled (e.g. single-class data)."""


class ConvergenceError(SvmSecError, RuntimeError):
    """The dual solver hit its iteration cap.

    ``residual`` holds the final maximal KKT violation.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class DegenerateStructureError(SvmSecError, RuntimeError):
    """The margin support set is empty, so the poisoning gradient is undefined.

    Restart the attack from a different initial point. ``trace`` carries the
    partial attack trace when raised from inside an attack loop.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class PreconditionError(SvmSecError, ValueError):
    """A data precondition (such as a feature norm bound) does not hold."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class FormatError(SvmSecError, ValueError):
    """Malformed on-disk data; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
