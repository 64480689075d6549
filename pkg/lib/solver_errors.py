#!/usr/bin/env python

r"""
Define the exceptions raised by the solver and verification modules.

All of them derive from TdksError so that programs can catch solver failures in one place.  Messages are
built by the raisers with gen_print.sprint_var so that the offending values appear in the standard
column-aligned format.
"""


class TdksError(Exception):
    r"""
    Base class of all solver errors.
    """


class StructuralError(TdksError, ValueError):
    r"""
    Mismatched grids, shapes, orbital counts or time knots, or an empty trajectory.
    """


class ConfigurationError(TdksError, ValueError):
    r"""
    A component is disabled or unknown, or a configuration value is invalid.

    When the error was found in a configuration file, file_path and line_number locate it and are included
    in the message.
    """

    def __init__(self, message, file_path=None, line_number=None):
        self.file_path = file_path
        self.line_number = line_number
        if file_path is not None:
            location = str(file_path)
            if line_number is not None:
                location += ":" + str(line_number)
            message = location + ": " + message
        super(ConfigurationError, self).__init__(message)


class RangeError(TdksError, ValueError):
    r"""
    A time lies outside the density path or window.
    """


class ModelViolationError(TdksError):
    r"""
    A hypothesis of the model is broken (e.g. negative energy, negative potential).
    """


class LinearSolveError(TdksError, RuntimeError):
    r"""
    A Crank-Nicolson linear solve did not converge.  residual holds the final relative residual.
    """

    def __init__(self, message, residual=None):
        self.residual = residual
        super(LinearSolveError, self).__init__(message)


class NonConvergenceError(TdksError, RuntimeError):
    r"""
    An outer iteration (Picard, Newton, linearized solve) exhausted its iteration budget.  trace holds the
    IterationTrace gathered so far.
    """

    def __init__(self, message, trace=None):
        self.trace = trace
        super(NonConvergenceError, self).__init__(message)


class ConsistencyError(TdksError):
    r"""
    The Newton consistency precondition ||S u0|| <= 1/sigma (or the ball condition) does not hold.  The caller
    should run more Picard steps.
    """


class WindowTooLongError(TdksError):
    r"""
    The derivative bound of K is not below one for the window, so the linearized fixed-point iteration and
    the Neumann series are not available.  The window must be shortened.
    """


class DiagnosticError(TdksError, ValueError):
    r"""
    A diagnostic could not be evaluated (e.g. too few points for a convergence-order fit).
    """
