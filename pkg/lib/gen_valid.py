#!/usr/bin/env python

r"""
This module provides validation functions like valid_value(), valid_range(), valid_finite_array(), etc.

Each function returns True when the value is valid.  When it is not, the exception class named by the
caller (default ValueError) is raised with an error message which shows the offending value.
"""

import os
import numpy as np

import gen_print as gp


def get_var_name(var_name):
    r"""
    If var_name is not None, simply return it.  Otherwise, return the source text of the first argument that
    was passed to the calling validation function.

    Description of argument(s):
    var_name                        The name of the variable.
    """

    return var_name or gp.get_arg_name(1, func_regex=r"\w*valid_\w+")


def process_error_message(error_message, error_class=ValueError):
    r"""
    Process the error_message built by a validation function.

    A blank error_message means that there is no error, in which case True is returned.

    Description of argument(s):
    error_message                   An error message.
    error_class                     The exception class to raise.
    """

    if error_message == "":
        return True

    raise error_class(error_message)


def valid_value(var_value, valid_values=[], invalid_values=[None], var_name=None, error_class=ValueError):
    r"""
    The variable value is valid if it is in valid_values (when given) and not in invalid_values.

    Description of argument(s):
    var_value                       The value being validated.
    valid_values                    A list of valid values.
    invalid_values                  A list of invalid values.  Ignored when valid_values is given.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    """

    error_message = ""
    if len(valid_values) > 0:
        if var_value not in valid_values:
            error_message += "The following variable has an invalid value:\n"
            error_message += gp.sprint_varx(get_var_name(var_name), var_value)
            error_message += "\nIt must be one of the following values:\n"
            error_message += gp.sprint_varx("valid_values", list(valid_values))
    elif var_value in invalid_values:
        error_message += "The following variable has an invalid value:\n"
        error_message += gp.sprint_varx(get_var_name(var_name), var_value)
        error_message += "\nIt must NOT be any of the following values:\n"
        error_message += gp.sprint_varx("invalid_values", list(invalid_values))

    return process_error_message(error_message, error_class)


def valid_range(var_value, lower=None, upper=None, var_name=None, error_class=ValueError,
                lower_open=False, upper_open=False):
    r"""
    The variable value is valid if it is within the specified range.

    Description of argument(s):
    var_value                       The value being validated.
    lower                           The lower end of the range.  None means no lower bound.
    upper                           The upper end of the range.  None means no upper bound.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    lower_open                      The lower end itself is excluded.
    upper_open                      The upper end itself is excluded.
    """

    error_message = ""
    below = lower is not None and (var_value <= lower if lower_open else var_value < lower)
    above = upper is not None and (var_value >= upper if upper_open else var_value > upper)
    if below or above:
        range_string = ("(" if lower_open else "[") + str(lower) + ", " + str(upper) \
            + (")" if upper_open else "]")
        error_message += "The following variable is not within the expected range:\n"
        error_message += gp.sprint_varx(get_var_name(var_name), var_value)
        error_message += gp.sprint_varx("valid_range", range_string)

    return process_error_message(error_message, error_class)


def valid_integer(var_value, lower=None, upper=None, var_name=None, error_class=ValueError):
    r"""
    The variable value is valid if it is an integer (bool excluded) within the optional range.

    Description of argument(s):
    var_value                       The value being validated.
    lower                           The lower end of the range.
    upper                           The upper end of the range.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    """

    var_name = get_var_name(var_name)
    if isinstance(var_value, bool) or not isinstance(var_value, (int, np.integer)):
        error_message = "Invalid integer value:\n" + gp.sprint_varx(var_name, var_value)
        return process_error_message(error_message, error_class)

    return valid_range(var_value, lower, upper, var_name=var_name, error_class=error_class)


def valid_float(var_value, lower=None, upper=None, var_name=None, error_class=ValueError,
                lower_open=False, upper_open=False):
    r"""
    The variable value is valid if it is a finite real number within the optional range.

    Description of argument(s):
    var_value                       The value being validated.
    lower                           The lower end of the range.
    upper                           The upper end of the range.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    lower_open                      The lower end itself is excluded.
    upper_open                      The upper end itself is excluded.
    """

    var_name = get_var_name(var_name)
    if isinstance(var_value, bool) or not isinstance(var_value, (int, float, np.integer, np.floating)) \
            or not np.isfinite(var_value):
        error_message = "Invalid float value:\n" + gp.sprint_varx(var_name, var_value)
        return process_error_message(error_message, error_class)

    return valid_range(var_value, lower, upper, var_name=var_name, error_class=error_class,
                       lower_open=lower_open, upper_open=upper_open)


def valid_bool(var_value, var_name=None, error_class=ValueError):
    r"""
    The variable value is valid if it is True or False.

    Description of argument(s):
    var_value                       The value being validated.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    """

    error_message = ""
    if not isinstance(var_value, (bool, np.bool_)):
        error_message += "Invalid boolean value:\n" + gp.sprint_varx(get_var_name(var_name), var_value)

    return process_error_message(error_message, error_class)


def valid_file_path(var_value, var_name=None, error_class=ValueError):
    r"""
    The variable value is valid if it contains the path of an existing file.

    Description of argument(s):
    var_value                       The value being validated.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    """

    error_message = ""
    if not os.path.isfile(str(var_value)):
        error_message += "The following file does not exist:\n"
        error_message += gp.sprint_varx(get_var_name(var_name), var_value)

    return process_error_message(error_message, error_class)


def valid_finite_array(var_value, var_name=None, error_class=ValueError):
    r"""
    The variable value is valid if every entry of the array is finite.

    Description of argument(s):
    var_value                       The array being validated.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    """

    error_message = ""
    bad_count = int(np.size(var_value) - np.count_nonzero(np.isfinite(var_value)))
    if bad_count:
        error_message += "The following array has non-finite entries:\n"
        error_message += gp.sprint_varx(get_var_name(var_name) + "_shape", str(np.shape(var_value)))
        error_message += gp.sprint_varx("non_finite_count", bad_count)

    return process_error_message(error_message, error_class)


def valid_nonnegative_array(var_value, tolerance=0.0, var_name=None, error_class=ValueError):
    r"""
    The variable value is valid if no entry of the real array is below -tolerance.

    Description of argument(s):
    var_value                       The array being validated.
    tolerance                       The amount of negative roundoff that is accepted.
    var_name                        The name of the variable.
    error_class                     The exception class raised on error.
    """

    error_message = ""
    minimum = float(np.min(var_value)) if np.size(var_value) else 0.0
    if minimum < -tolerance:
        error_message += "The following array has negative entries:\n"
        error_message += gp.sprint_varx(get_var_name(var_name) + "_min", minimum)
        error_message += gp.sprint_varx("tolerance", tolerance)

    return process_error_message(error_message, error_class)
