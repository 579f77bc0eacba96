"""Exception types raised across the package."""


class NqsvddError(Exception):
    """Base class for all package errors."""


class StructuralError(NqsvddError, ValueError):
    """Arity, index, shape or support mismatch."""


class BindingError(NqsvddError, ValueError):
    """A symbolic angle slot could not be bound to a value."""


class ChannelError(NqsvddError, ValueError):
    """A Kraus set is not trace preserving, or channel parameters are unphysical."""


class UnsupportedGeneratorError(NqsvddError, ValueError):
    """A differentiated angle enters through a gate without a registered shift rule."""


class BoundError(NqsvddError, ValueError):
    """A count or dimension argument is outside its admissible range."""


class FormatError(NqsvddError, ValueError):
    """A data file does not match its expected layout."""


class StateError(NqsvddError, RuntimeError):
    """An operation was called before the state it depends on exists."""


class DivergenceError(NqsvddError, RuntimeError):
    """Training produced a non-finite loss."""
