#!/usr/bin/env python

r"""
Run the TDKS solver stack on a JSON run configuration.

Verbs:
run                                 Compute the constants ledger (both modes), run the selected solvers with
                                    the Picard to Newton handoff, and write report.txt, trace_<solver>.csv
                                    and the optional plots.
verify                              Run every solver and the full check suite.  Exit 0 only when every
                                    asserted check passes.
constants                           Print the constants ledger of both modes.

Exit status: 0 on success, 1 on solver or check failure (the partial report is still written), 2 on an
invalid configuration.
"""

import sys
import os

# The BLAS thread variables only take effect before numpy is loaded.
if os.environ.get("TDKS_NUM_THREADS", ""):
    for var_name in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var_name, os.environ["TDKS_NUM_THREADS"])

save_path_0 = sys.path[0]
del sys.path[0]
sys.path.append(os.path.join(os.path.dirname(__file__), "../lib"))

from gen_arg import *  # NOQA
from gen_print import *  # NOQA
from gen_valid import *  # NOQA
import contraction as ct  # NOQA
import run_config as rc  # NOQA
import run_pipeline as rp  # NOQA
import run_report as rr  # NOQA
from solver_errors import ConfigurationError, TdksError  # NOQA

# Restore sys.path[0].
sys.path.insert(0, save_path_0)

verbs = ["run", "verify", "constants"]

parser = argparse.ArgumentParser(
    usage='%(prog)s [OPTIONS] {run,verify,constants} CONFIG_FILE',
    description="%(prog)s runs the Picard, exact Newton and approximate Newton solvers and the verification"
                + " checks described by a JSON run configuration.",
    formatter_class=ArgumentDefaultsHelpMultilineFormatter,
    prefix_chars='-+')

parser.add_argument(
    'verb',
    choices=verbs,
    help='The action to perform.')

parser.add_argument(
    'config_file',
    help='The path of the JSON run configuration (see docs/config_schema.md).')

parser.add_argument(
    '--output_dir',
    '--output-dir',
    dest='output_dir',
    default=None,
    help='The directory which receives report.txt, the trace CSV files and the plots.  Overrides'
         + ' output.directory.')

parser.add_argument(
    '--seed',
    type=int,
    default=None,
    help='The random seed.  Overrides the configured seed.')

parser.add_argument(
    '--mode',
    choices=ct.constants_modes,
    default=None,
    help='The constants mode used by the solvers.  Overrides solver.constants_mode.')

parser.add_argument(
    '--solver',
    choices=rc.solver_selections,
    default=None,
    help='The solvers to run.  Overrides solver.selection.')

# Populate stock_list with options we want.
stock_list = [("test_mode", 0), ("quiet", 0), ("debug", 0)]

config = None


def exit_function(signal_number=0,
                  frame=None):
    r"""
    Execute whenever the program ends normally or with the signals that we catch (i.e. TERM, INT).
    """

    dprint_executing()
    dprint_var(signal_number)
    qprint_pgm_footer()


def signal_handler(signal_number,
                   frame):
    r"""
    Handle signals.  Without a function to catch a SIGTERM or SIGINT, the program would terminate immediately
    with return code 143 and without calling the exit_function.
    """

    # Our convention is to set up exit_function with atexit.register() so there is no need to explicitly
    # call exit_function from here.

    dprint_executing()

    # Calling exit prevents us from returning to the code that was running when the signal was received.
    exit(0)


def validate_parms():
    r"""
    Validate program parameters and load the run configuration.  An invalid configuration exits with status 2.
    """

    global config

    gen_post_validation(exit_function, signal_handler)

    try:
        valid_file_path(config_file, var_name="config_file", error_class=ConfigurationError)
        config = rc.load_run_config(config_file, output_dir=output_dir, seed=seed, mode=mode, solver=solver)
    except ConfigurationError as error:
        print_error(rc.one_line(error) + "\n")
        exit(2)

    return True


def write_artifacts(result):
    if test_mode:
        qprint_timen("Skipping the report files (test_mode).")
        return []
    paths = rr.write_report(result, config_file=config_file)
    qprint_var(paths)
    return paths


def print_ledger(result):
    for mode, bundle in result.bundles.items():
        sys.stdout.write(rr.sprint_section("constants." + mode, rr.constants_items(bundle)))


def print_failures(checks):
    failures = [check for check in checks if check.failed]
    if not failures:
        return
    buffer = "The following checks failed:\n"
    for check in failures:
        buffer += "  " + check.name + " (" + check.mode + "): lhs=" + repr(check.lhs) + " rhs=" \
            + repr(check.rhs) + " margin=" + repr(check.margin) \
            + (" note=" + check.note if check.note else "") + "\n"
    print_error(buffer)


def run_verb(result):
    r"""
    Perform the verb on result and return True when it succeeded.
    """

    rp.compute_constants(result)
    if verb == "constants":
        print_ledger(result)
        return True
    if verb == "run":
        rp.run_solvers(result)
        write_artifacts(result)
        for name, error in result.errors.items():
            print_error(name + ": " + error + "\n")
        return not result.failed()
    rp.run_solvers(result, rp.solver_names)
    checks = rp.run_check_suite(config, result)
    write_artifacts(result)
    tally = rr.check_summary(checks)
    tally.print_report()
    print_failures(checks)
    return not tally.failures()


def main():

    if not gen_get_options(parser, stock_list):
        return False

    if not validate_parms():
        return False

    qprint_pgm_header()

    result = None
    try:
        result = rp.RunResult(config)
        return run_verb(result)
    except ConfigurationError as error:
        print_error(rc.one_line(error) + "\n")
        exit(2)
    except TdksError as error:
        print_error_report(rc.one_line(error) + "\n")
        if result is not None:
            result.errors.setdefault(verb, rc.one_line(error))
            write_artifacts(result)
        return False


# Main

if not main():
    exit(1)
