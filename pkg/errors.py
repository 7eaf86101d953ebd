"""
Exception types for the approximate-dual toolkit

Every error class is named after the invariant it reports, so the command line
can print a one-line diagnostic. ValidationError subclasses map to exit
code 2, NumericalError subclasses to exit code 3.
"""


class ApproxDualError(Exception):
    """Base class of all errors raised by this package"""

    exit_code = 1

    def diagnostic(self):
        """One-line text naming the violated invariant"""
        return f"{type(self).__name__}: {self}"


class ValidationError(ApproxDualError, ValueError):
    exit_code = 2


class NumericalError(ApproxDualError, ArithmeticError):
    exit_code = 3


# Knot vectors and coarse selections
class UnsortedKnots(ValidationError):
    pass


class EndpointMultiplicity(ValidationError):
    pass


class InteriorMultiplicity(ValidationError):
    pass


class TooFewKnots(ValidationError):
    pass


class InvalidMultiplicity(ValidationError):
    pass


class NotAnInteriorKnot(ValidationError):
    pass


class MultiplicityExceeded(ValidationError):
    pass


# B-spline evaluation
class OutOfDomain(ValidationError):
    pass


class OrderOutOfRange(ValidationError):
    pass


class BadIndex(ValidationError):
    pass


class MultiplicityViolation(ValidationError):
    pass


class SingularSystem(NumericalError):
    pass


class ResidualTooLarge(NumericalError):
    pass


# Linear algebra
class NotPositiveDefinite(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class Singular(NumericalError):
    pass


# Approximate duals
class TooFewArguments(ValidationError):
    pass


class SingularReproductionSystem(NumericalError):
    pass


class NotAScalarMismatch(NumericalError):
    pass


# Enhanced duals and closed forms
class ZeroPatternViolation(NumericalError):
    pass


class SingularA0(NumericalError):
    pass


class WrongOrder(ValidationError):
    pass


class MultipleKnot(ValidationError):
    pass


# Command line
class UsageError(ValidationError):
    pass
