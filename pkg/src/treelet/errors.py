"""Exception types. InputError maps to CLI exit 1, InvariantError to exit 2."""


class TreeletError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TreeletError):
    """The caller supplied data or parameters that violate a documented contract."""


class InvariantError(TreeletError):
    """An internal invariant failed; indicates a bug, not a usage problem."""
