#!/usr/bin/env python

r"""
This module provides the print functions used by the solver programs and libraries: sprint_var,
sprint_time, sprint_error, sprint_error_report, sprint_pgm_header, etc.

Each sprint_<x> function returns a string.  For each of them, print_<x>, qprint_<x>, dprint_<x> and
lprint_<x> variants are generated at the bottom of this module:

print_<x>                           Always print to stdout (stderr for error functions).
qprint_<x>                          Print unless "quiet" is set.
dprint_<x>                          Print only when "debug" is set.
lprint_<x>                          Send the text to the log (python logging or robot's log).
"""

import sys
import os
import time
import inspect
import re
import logging
import collections
import platform
try:
    import __builtin__
except ImportError:
    import builtins as __builtin__

try:
    robot_env = 1
    from robot.utils import DotDict
    from robot.libraries.BuiltIn import BuiltIn
    # Having the robot libraries installed does not mean we are running under robot.
    try:
        var_value = BuiltIn().get_variable_value("${SUITE_NAME}", "")
    except BaseException:
        robot_env = 0
except ImportError:
    robot_env = 0

import numpy as np

pgm_file_path = sys.argv[0]
pgm_name = os.path.basename(pgm_file_path)
pgm_name_var_name = pgm_name.replace(".", "_")

logger = logging.getLogger("tdks")

dft_indent = 0
dft_col1_width = 29

NANOSECONDS = os.environ.get('NANOSECONDS', '1')
if NANOSECONDS == "1":
    dft_col1_width = dft_col1_width + 7

SHOW_ELAPSED_TIME = os.environ.get('SHOW_ELAPSED_TIME', '1')
if SHOW_ELAPSED_TIME == "1":
    if NANOSECONDS == "1":
        dft_col1_width = dft_col1_width + 14
    else:
        dft_col1_width = dft_col1_width + 7

start_time = time.time()
# The lprint functions keep their own elapsed-time clock (index 1) so that logging does not disturb the
# elapsed times shown on the console (index 0).
sprint_time_last_seconds = [start_time, start_time]
last_seconds_ix = 0


def set_last_seconds_ix(ix):
    r"""
    Set the index used to pick the "last seconds" value for elapsed time calculations.

    Description of argument(s):
    ix                              0 for standard printing, 1 for log printing.
    """

    global last_seconds_ix
    last_seconds_ix = ix


def split_call_args(arg_text):
    r"""
    Split the text found between the parentheses of a function call into its top-level arguments.

    Description of argument(s):
    arg_text                        The argument text (e.g. "x, f(a, b), key=[1, 2]").
    """

    args = []
    depth = 0
    current = ""
    quote = None
    for char in arg_text:
        if quote:
            current += char
            if char == quote:
                quote = None
            continue
        if char in "\"'":
            quote = char
        elif char in "([{":
            depth += 1
        elif char in ")]}":
            depth -= 1
            if depth < 0:
                break
        elif char == "," and depth == 0:
            args.append(current.strip())
            current = ""
            continue
        current += char
    if current.strip():
        args.append(current.strip())
    return args


def get_arg_name(arg_num=1, func_regex=r"\w*print_var"):
    r"""
    Return the source text of the argument that a caller outside this module passed to a print_var style
    function.

    Example: the call print_var(grid.spacing) yields "grid.spacing".

    When the source cannot be located (interactive use, calls that span lines), "var_value" is returned.

    Description of argument(s):
    arg_num                         The 1-based position of the argument whose name is sought.
    func_regex                      A regex matching the name of the called function.
    """

    this_file = os.path.realpath(__file__)
    for frame_info in inspect.stack()[1:]:
        if os.path.realpath(frame_info.filename) == this_file:
            continue
        if not frame_info.code_context:
            break
        line = frame_info.code_context[0]
        match = re.search(r"\b(?:gp\.)?" + func_regex + r"\((.*)", line)
        if not match:
            break
        args = split_call_args(match.group(1))
        if len(args) >= arg_num:
            return args[arg_num - 1]
        break

    return "var_value"


def sprint_time(buffer=""):
    r"""
    Return the time stamp prefix with the buffer appended.

    Example output:

    #(CDT) 2016/08/03 17:18:47.317339 -    0.000046 - Hi.

    The NANOSECONDS and SHOW_ELAPSED_TIME environment variables control whether the microseconds and the
    elapsed time since the previous call are included.

    Description of argument(s):
    buffer                          This will be appended to the formatted time string.
    """

    seconds = time.time()
    time_string = time.strftime("#(%Z) %Y/%m/%d %H:%M:%S", time.localtime(seconds))
    if NANOSECONDS == "1":
        fraction = "%0.6f" % seconds
        time_string += fraction[fraction.find("."):]

    if SHOW_ELAPSED_TIME == "1":
        elapsed_seconds = seconds - sprint_time_last_seconds[last_seconds_ix]
        if NANOSECONDS == "1":
            elapsed_string = "%11.6f" % elapsed_seconds
        else:
            elapsed_string = "%4i" % elapsed_seconds
        sprint_time_last_seconds[last_seconds_ix] = seconds
        time_string += " - " + elapsed_string

    return time_string + " - " + buffer


def sprint_timen(buffer=""):
    r"""
    Append a line feed to the buffer, pass it to sprint_time and return the result.
    """

    return sprint_time(buffer + "\n")


def sprint_error(buffer=""):
    r"""
    Return a standardized error string: time stamp, "**ERROR**" and the caller's buffer.

    Description of argument(s):
    buffer                          This will be appended to the formatted error string.
    """

    return sprint_time() + "**ERROR** " + buffer


def format_value(var_value):
    r"""
    Return a one-line string representation of a scalar or small array value.

    Floats use repr so that printed values survive a round trip.  Large arrays are summarized.

    Description of argument(s):
    var_value                       The value to be formatted.
    """

    if isinstance(var_value, (bool, np.bool_)):
        return str(bool(var_value))
    if isinstance(var_value, (float, np.floating)):
        return repr(float(var_value))
    if isinstance(var_value, (int, np.integer)):
        return str(int(var_value))
    if isinstance(var_value, np.ndarray):
        if var_value.size <= 8:
            return repr(var_value.tolist())
        return "ndarray(shape=" + str(var_value.shape) + ", dtype=" + str(var_value.dtype) + ")"
    return str(var_value)


def sprint_varx(var_name,
                var_value,
                indent=dft_indent,
                col1_width=dft_col1_width,
                trailing_char="\n"):
    r"""
    Return the var name/value as a column-aligned line.  If the caller lets col1_width default, the value
    column lines up with the text printed by the print_time functions.

    Dictionaries, lists and tuples are printed one entry per line, indented beneath the variable name:

    constants:
      [E1]:                                           0.7213
      [U_bound]:                                      1.0402

    Description of argument(s):
    var_name                        The name of the variable to be printed.
    var_value                       The value of the variable to be printed.
    indent                          The number of spaces to indent the output.
    col1_width                      The width of the name column.
    trailing_char                   The character to be appended to the output.
    """

    if isinstance(var_value, (dict, collections.OrderedDict)) \
            or (robot_env and isinstance(var_value, DotDict)):
        buffer = " " * indent + var_name + ":" + "\n"
        if len(var_value) == 0:
            return " " * indent + var_name + ":" + " " * max(1, col1_width - len(var_name) - 1) \
                + "{}" + trailing_char
        for key, value in var_value.items():
            buffer += sprint_varx("[" + str(key) + "]", value, indent + 2, col1_width)
        return buffer
    if isinstance(var_value, (list, tuple)) and len(var_value) > 0 \
            and not all(isinstance(x, (int, float, np.number)) for x in var_value):
        buffer = " " * indent + var_name + ":" + "\n"
        for ix, value in enumerate(var_value):
            buffer += sprint_varx("[" + str(ix) + "]", value, indent + 2, col1_width)
        return buffer

    if isinstance(var_value, (list, tuple)):
        value_string = "[" + ", ".join(format_value(x) for x in var_value) + "]"
    else:
        value_string = format_value(var_value)
    name_string = " " * indent + var_name + ":"
    pad = max(1, col1_width - len(name_string))
    return name_string + " " * pad + value_string + trailing_char


def sprint_var(var_value, *args, **kwargs):
    r"""
    Figure out the name of the variable passed by the caller and return the sprint_varx output for it.

    Example:

    sprint_var(grid_spacing) returns "grid_spacing:      0.0775...\n".

    Description of argument(s):
    var_value                       The value to be printed.
    args, kwargs                    Passed through to sprint_varx (indent, col1_width, trailing_char).
    """

    return sprint_varx(get_arg_name(1), var_value, *args, **kwargs)


def sprint_vars(**kwargs):
    r"""
    Return the sprint_varx output for each keyword argument, in the order given.
    """

    buffer = ""
    for var_name, var_value in kwargs.items():
        buffer += sprint_varx(var_name, var_value)
    return buffer


def sprint_dashes(indent=dft_indent,
                  width=80,
                  line_feed=1,
                  char="-"):
    r"""
    Return a string of dashes.

    Description of argument(s):
    indent                          The number of spaces to indent the output.
    width                           The width of the string of dashes.
    line_feed                       Indicates whether the output should end with a line feed.
    char                            The character to be repeated.
    """

    buffer = " " * int(indent) + char * int(width)
    if line_feed:
        buffer += "\n"
    return buffer


def sindent(text="",
            indent=0):
    r"""
    Return the text with each line indented by the given number of spaces.
    """

    prefix = " " * indent
    return "".join(prefix + line for line in text.splitlines(True))


def sprint_call_stack(indent=0,
                      stack_frame_ix=0):
    r"""
    Return a report of the call stack: line number, function name and source line, innermost first.

    Description of argument(s):
    indent                          The number of spaces to indent each line of output.
    stack_frame_ix                  The index of the first stack frame to show.
    """

    buffer = sprint_dashes(indent)
    buffer += " " * indent + "Python function call stack\n\n"
    buffer += " " * indent + "Line # Function name and source\n"
    buffer += sprint_dashes(indent, 6, 0) + " " + sprint_dashes(0, 73)
    for frame_info in inspect.stack()[stack_frame_ix + 1:]:
        source = frame_info.code_context[0].strip() if frame_info.code_context else ""
        buffer += " " * indent + "%6d %s: %s\n" % (frame_info.lineno, frame_info.function, source)
    buffer += sprint_dashes(indent)
    return buffer


def sprint_executing(stack_frame_ix=1):
    r"""
    Return a line indicating which function is running, e.g. "Executing: picard_solve".

    Description of argument(s):
    stack_frame_ix                  1 names the caller of this function.
    """

    func_name = inspect.stack()[stack_frame_ix + 1][3]
    if func_name.startswith(("qprint_", "dprint_", "lprint_", "print_")):
        func_name = inspect.stack()[stack_frame_ix + 2][3]
    return sprint_time() + "Executing: " + func_name + "\n"


def library_versions():
    r"""
    Return an ordered dictionary of the versions of the python interpreter and numeric libraries in use.
    """

    import scipy
    versions = collections.OrderedDict()
    versions['python_version'] = platform.python_version()
    versions['numpy_version'] = np.__version__
    versions['scipy_version'] = scipy.__version__
    return versions


def sprint_pgm_header(indent=0,
                      linefeed=1):
    r"""
    Return the standard header that programs print at the start of a run: command line, pid, library
    versions and the program parameters parsed by gen_arg.gen_get_options.

    Description of argument(s):
    indent                          The number of characters to indent each line of output.
    linefeed                        Indicates whether a line feed is included at the start and end.
    """

    col1_width = dft_col1_width + indent
    buffer = "\n" if linefeed else ""

    if robot_env:
        suite_name = BuiltIn().get_variable_value("${suite_name}")
        buffer += sindent(sprint_time("Running test suite \"" + str(suite_name) + "\".\n"), indent)

    buffer += sindent(sprint_time() + "Running " + pgm_name + ".\n", indent)
    buffer += sindent(sprint_time() + "Program parameter values, etc.:\n\n", indent)
    buffer += sprint_varx("command_line", ' '.join(sys.argv), indent, col1_width)
    buffer += sprint_varx(pgm_name_var_name + "_pid", os.getpid(), indent, col1_width)
    for key, value in library_versions().items():
        buffer += sprint_varx(key, value, indent, col1_width)
    buffer += sprint_varx("TDKS_NUM_THREADS", os.environ.get("TDKS_NUM_THREADS", ""), indent,
                          col1_width)

    # __builtin__.arg_obj is created by gen_arg.gen_get_options.
    try:
        for key, value in vars(__builtin__.arg_obj).items():
            buffer += sprint_varx(key, value, indent, col1_width)
    except AttributeError:
        pass

    if linefeed:
        buffer += "\n"
    return buffer


def sprint_pgm_footer():
    r"""
    Return the standard footer that programs print at the end of a run.
    """

    buffer = "\n" + sprint_time() + "Finished running " + pgm_name + ".\n\n"
    buffer += sprint_varx(pgm_name_var_name + "_runtime", "%0.6f" % (time.time() - start_time))
    buffer += "\n"
    return buffer


def sprint_error_report(error_text="\n",
                        indent=2,
                        format=None,
                        stack_frame_ix=1):
    r"""
    Return a standardized error report: the caller's error text, the call stack and the program header.

    Description of argument(s):
    error_text                      The error text to be included in the report.
    indent                          The number of characters to indent each line of output.
    format                          "long" includes the banner, call stack and program header; "short" is
                                    just the error line.  Under robot the default is short.
    stack_frame_ix                  The index of the first stack frame shown in the call stack.
    """

    if format is None:
        format = 'short' if robot_env else 'long'
    error_text = error_text.rstrip('\n') + '\n'
    if format == 'short':
        return sprint_error(error_text)

    buffer = sprint_dashes(width=120, char="=")
    buffer += sprint_error(error_text)
    buffer += "\n"
    buffer += sprint_call_stack(indent, stack_frame_ix + 1)
    buffer += sprint_pgm_header(indent)
    buffer += sprint_dashes(width=120, char="=")
    return buffer


def sprint(buffer=""):
    r"""
    Return the buffer as a string.  Used to build qprint, dprint, etc.
    """

    return str(buffer)


def sprintn(buffer=""):
    r"""
    Return the buffer as a string with a line feed appended.
    """

    return str(buffer) + "\n"


def gp_print(buffer,
             stream='stdout'):
    r"""
    Write the buffer to stdout or stderr, or to robot's console when running under robot.

    Description of argument(s):
    buffer                          The string to be printed.
    stream                          Either "stdout" or "stderr".
    """

    if robot_env:
        BuiltIn().log_to_console(buffer, stream=stream, no_newline=True)
        return
    out_stream = sys.stdout if stream == "stdout" else sys.stderr
    out_stream.write(buffer)
    out_stream.flush()


def gp_log(buffer):
    r"""
    Log the buffer using python logging or BuiltIn().log depending on whether we are running under robot.

    Description of argument(s):
    buffer                          The string to be logged.
    """

    if robot_env:
        BuiltIn().log(buffer)
    else:
        logger.info(buffer.rstrip("\n"))


def get_stack_var(var_name,
                  default=""):
    r"""
    Return the value of var_name as found in the nearest calling function that defines it locally, else the
    builtin value of that name set by gen_get_options, else default.

    This lets a function accept a "quiet" parameter that governs the qprint calls made inside it.

    Description of argument(s):
    var_name                        The name of the variable (e.g. "quiet").
    default                         The value returned when the variable is found nowhere.
    """

    frame = sys._getframe(2)
    while frame is not None:
        if var_name in frame.f_locals:
            return frame.f_locals[var_name]
        frame = frame.f_back
    return getattr(__builtin__, var_name, default)


def stack_flag(var_name):
    r"""
    Return the get_stack_var value of var_name (e.g. "quiet", "debug") as a bool.  Values that do not
    convert to an integer count as not set.
    """

    try:
        return bool(int(get_stack_var(var_name, 0)))
    except (TypeError, ValueError):
        return False


def create_print_wrapper_funcs(func_names,
                               stderr_func_names):
    r"""
    Create the print_, qprint_, dprint_ and lprint_ variants of each sprint function named in func_names and
    install them in this module's namespace.

    Description of argument(s):
    func_names                      The print function names (e.g. "print_var"); each must have a
                                    corresponding "s" function (e.g. "sprint_var").
    stderr_func_names               The functions whose output goes to stderr.
    """

    module_globals = globals()
    for func_name in func_names:
        s_func = module_globals["s" + func_name]
        stream = "stderr" if func_name in stderr_func_names else "stdout"

        def print_func(*args, __s_func=s_func, __stream=stream, **kwargs):
            gp_print(__s_func(*args, **kwargs), stream=__stream)

        def qprint_func(*args, __s_func=s_func, __stream=stream, **kwargs):
            if stack_flag("quiet"):
                return
            gp_print(__s_func(*args, **kwargs), stream=__stream)

        def dprint_func(*args, __s_func=s_func, __stream=stream, **kwargs):
            if not stack_flag("debug"):
                return
            gp_print(__s_func(*args, **kwargs), stream=__stream)

        def lprint_func(*args, __s_func=s_func, **kwargs):
            set_last_seconds_ix(1)
            gp_log(__s_func(*args, **kwargs))
            set_last_seconds_ix(0)

        for prefix, func in (("", print_func), ("q", qprint_func), ("d", dprint_func),
                             ("l", lprint_func)):
            func.__name__ = prefix + func_name
            func.__doc__ = s_func.__doc__
            if prefix + func_name != "print":
                module_globals[prefix + func_name] = func


func_names = ['print_time', 'print_timen', 'print_error', 'print_varx', 'print_var', 'print_vars',
              'print_dashes', 'print_call_stack', 'print_executing', 'print_pgm_header',
              'print_pgm_footer', 'print_error_report', 'print', 'printn']

stderr_func_names = ['print_error', 'print_error_report']

create_print_wrapper_funcs(func_names, stderr_func_names)
