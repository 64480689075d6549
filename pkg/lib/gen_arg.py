#!/usr/bin/env python

r"""
This module provides valuable argument processing functions like gen_get_options and gen_post_validation.
"""

import sys
try:
    import __builtin__
except ImportError:
    import builtins as __builtin__
import atexit
import signal
import argparse
import textwrap as textwrap

import gen_print as gp
import gen_valid as gv
import gen_misc as gm


class MultilineFormatter(argparse.HelpFormatter):
    def _fill_text(self, text, width, indent):
        r"""
        Split text into formatted lines for every "%%n" encountered in the text and return the result.
        """
        lines = self._whitespace_matcher.sub(' ', text).strip().split('%n')
        formatted_lines = \
            [textwrap.fill(x, width, initial_indent=indent, subsequent_indent=indent) + '\n' for x in lines]
        return ''.join(formatted_lines)


class ArgumentDefaultsHelpMultilineFormatter(MultilineFormatter, argparse.ArgumentDefaultsHelpFormatter):
    pass


default_string = '  The default value is "%(default)s".'
module = sys.modules["__main__"]


def gen_get_options(parser,
                    stock_list=[],
                    args=None):
    r"""
    Parse the command line arguments using the parser object passed and return True/False (i.e. pass/fail).
    Also set the following built in values:

    __builtin__.quiet      This value is used by the qprint functions.
    __builtin__.test_mode  This value is used by the program to skip file output.
    __builtin__.debug      This value is used by the dprint functions.
    __builtin__.arg_obj    This value is used by print_pgm_header, etc.
    __builtin__.parser     This value is used by print_pgm_header, etc.

    Description of argument(s):
    parser                          A parser object.  See argparse module documentation for details.
    stock_list                      The caller can use this parameter to request certain stock parameters
                                    offered by this function.  The stock_list is a list of tuples each of
                                    which consists of an arg_name and a default value.  Example:
                                    stock_list = [("test_mode", 0), ("quiet", 1), ("debug", 0)]
    args                            The argument list to parse.  Defaults to sys.argv[1:].
    """

    master_stock_list = ["quiet", "test_mode", "debug"]
    stock_help = {
        "quiet": 'If this parameter is set to "1", %(prog)s will print only essential information, i.e.'
                 + ' it will not echo parameters, print the total run time, etc.',
        "test_mode": 'This means that %(prog)s should go through all the motions but not actually solve'
                     + ' anything.  This is mainly to be used by the developer of %(prog)s.',
        "debug": 'If this parameter is set to "1", %(prog)s will print additional debug information'
                 + ' such as per-iteration solver detail.',
    }

    stock_values = {}
    for ix, stock_entry in enumerate(stock_list):
        if isinstance(stock_entry, tuple):
            if len(stock_entry) < 1:
                error_message = "Programmer error - stock_list[" + str(ix) + "] is supposed to be a tuple" \
                    + " containing at least one element which is the name of the desired stock parameter:\n" \
                    + gp.sprint_var(stock_list)
                return gv.process_error_message(error_message)
            arg_name = stock_entry[0]
            default = stock_entry[1] if len(stock_entry) > 1 else None
        else:
            arg_name = stock_entry
            default = None

        if arg_name not in master_stock_list:
            error_message = "Programmer error - arg_name \"" + arg_name \
                + "\" not found in stock list:\n" \
                + gp.sprint_var(master_stock_list)
            return gv.process_error_message(error_message)

        parser.add_argument(
            '--' + arg_name,
            default=gm.dft(default, 0),
            type=int,
            choices=[1, 0],
            help=stock_help[arg_name] + default_string)
        stock_values[arg_name] = True

    arg_obj = parser.parse_args(args)

    __builtin__.quiet = 0
    __builtin__.test_mode = 0
    __builtin__.debug = 0
    for arg_name in stock_values:
        setattr(__builtin__, arg_name, getattr(arg_obj, arg_name))

    __builtin__.arg_obj = arg_obj
    __builtin__.parser = parser

    # For each command line parameter, create a corresponding global variable in the main module.
    main_module = sys.modules['__main__']
    for key in arg_obj.__dict__:
        setattr(main_module, key, getattr(__builtin__.arg_obj, key))

    return True


def gen_exit_function():
    r"""
    Execute whenever the program ends normally or with the signals that we catch (i.e. TERM, INT).
    """

    # Call the main module's exit_function if it is defined.
    exit_function = getattr(module, "exit_function", None)
    if exit_function:
        exit_function()

    gp.qprint_pgm_footer()


def gen_signal_handler(signal_number,
                       frame):
    r"""
    Handle signals.  Without a function to catch a SIGTERM or SIGINT, the program would terminate immediately
    with return code 143 and without calling the exit_function.
    """

    gp.qprint_executing()

    # Calling exit prevents control from returning to the code that was running when the signal was received.
    exit(0)


def gen_post_validation(exit_function=None,
                        signal_handler=None):
    r"""
    Do generic post-validation processing.  If the calling program passes exit_function and signal_handler
    parms, this function will register them: signal_handler gets called for SIGINT and SIGTERM and
    exit_function runs prior to the termination of the program.

    Description of argument(s):
    exit_function                   A function object pointing to the caller's exit function.  This defaults
                                    to this module's gen_exit_function.
    signal_handler                  A function object pointing to the caller's signal_handler function.  This
                                    defaults to this module's gen_signal_handler.
    """

    exit_function = exit_function or gen_exit_function
    signal_handler = signal_handler or gen_signal_handler

    atexit.register(exit_function)
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)
