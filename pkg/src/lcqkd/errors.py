"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError/RuntimeError so that
callers (and the CLI, which maps categories to exit codes) can tell a contract
violation from a numerical failure.
"""


class LcqkdError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LcqkdError, ValueError):
    """An input violates a documented domain or consistency contract."""


class QuadratureError(LcqkdError, RuntimeError):
    """Adaptive integration could not reach the requested tolerance."""


class InfeasibleError(LcqkdError, RuntimeError):
    """An optimization produced no feasible configuration with positive rate."""


class TruncationError(LcqkdError, RuntimeError):
    """A series or Fock-space truncation cannot meet its tail-mass bound."""
