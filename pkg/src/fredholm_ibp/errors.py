"""Exception types raised across the package."""


class FredholmError(ValueError):
    """Base class for all library errors."""


class InvalidArgumentError(FredholmError):
    pass


class UnsupportedKernelError(FredholmError):
    """Raised when an operation needs kernel metadata the kernel lacks."""


class NotPositiveSemidefiniteError(FredholmError):
    pass
