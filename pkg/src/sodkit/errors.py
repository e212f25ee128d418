"""Exception types shared across the package."""


class KernelError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidParameterError(KernelError, ValueError):
    """A parameter value lies outside its documented domain."""


class ShapeError(KernelError, ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class InvalidInputError(KernelError, ValueError):
    """Input data violates a precondition (finiteness, range, binarity)."""


class FormatError(KernelError, ValueError):
    """A serialized payload does not follow its documented byte layout."""


class NumericalError(KernelError, ArithmeticError):
    """A numerical consistency check failed."""


class ResourceError(KernelError, RuntimeError):
    """An operation would exceed its configured resource budget."""


class ConfigError(KernelError, ValueError):
    """A configuration object is internally inconsistent."""
