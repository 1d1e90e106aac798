"""Exception hierarchy shared by every module."""


class RdropError(Exception):
    """Base class for all errors raised by rdrop."""


class DomainError(RdropError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConvergenceError(RdropError, ArithmeticError):
    """A numerical procedure did not reach its tolerance."""


class OverlapError(DomainError):
    """Two balls of a configuration interpenetrate."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class BracketError(ConvergenceError):
    """A root or crossing could not be bracketed inside the search range."""
