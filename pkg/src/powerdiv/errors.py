"""Exception hierarchy shared by every module."""

from __future__ import annotations


class PowerDivError(Exception):
    """Base class for all errors raised by :mod:`powerdiv`."""


class InputError(PowerDivError, ValueError):
    """Invalid user-supplied input."""


class NonPositiveProbability(InputError):
    pass


class ProbabilitySumError(InputError):
    pass


class TooFewCells(InputError):
    pass


class CountSumMismatch(InputError):
    pass


class InvalidCounts(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class NegativeArgument(InputError):
    pass


class OrderOutOfRange(InputError):
    pass


class VariantDomainError(InputError):
    pass


class HypothesisViolated(InputError):
    pass


class ParseError(InputError):
    pass


class ConfigError(InputError):
    pass


class SupportTooLarge(PowerDivError):
    pass


class InfiniteAtomWithoutLimit(PowerDivError):
    pass


class PreconditionFailed(PowerDivError):
    pass


class NumericalError(PowerDivError, ArithmeticError):
    """A numerical procedure did not reach its accuracy target."""


class QuadratureFailure(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass
