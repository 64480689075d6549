#!/usr/bin/env python

r"""
This module writes the artifacts of a run: the structured text report (report.txt), one CSV trace per
solver (trace_<solver>.csv) and, optionally, the residual and energy plots.

The report is a list of "[section]" blocks of "key: value" lines in a fixed order.  Floats are written with
repr.  Constant and check lines carry their mode tag in parentheses.
"""

import os
import csv
import collections

import numpy as np

import gen_print as gp
import gen_misc as gm
import newton_exact as ne
import check_tally as ck

report_file_name = "report.txt"
plot_file_names = ["residuals.png", "energy.png"]


def sprint_value(value):
    if value is None:
        return "None"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(sprint_value(x) for x in value) + "]"
    if isinstance(value, dict):
        return gm.canonical_json(value)
    return gp.format_value(value)


def sprint_section(name, items):
    r"""
    Return a report section: a "[name]" line followed by one "key: value" line per item.

    Description of argument(s):
    name                            The section name.
    items                           An ordered sequence of (key, value) pairs or an OrderedDict.
    """

    if isinstance(items, dict):
        items = items.items()
    buffer = "[" + name + "]\n"
    for key, value in items:
        buffer += str(key) + ": " + sprint_value(value) + "\n"
    return buffer + "\n"


def provenance(result, config_file=None):
    config = result.config
    items = collections.OrderedDict()
    items["config_file"] = config_file or config.file_path
    items["config_hash"] = config.config_hash()
    items["seed"] = config.seed
    items["constants_mode"] = config.mode
    items["solver_selection"] = config.selection
    items.update(gp.library_versions())
    return items


def config_items(config):
    r"""
    Return the effective configuration flattened to dotted keys.
    """

    items = collections.OrderedDict()

    def flatten(prefix, value):
        if isinstance(value, dict) and value:
            for key, sub_value in value.items():
                flatten(prefix + "." + key if prefix else key, sub_value)
        else:
            items[prefix] = value

    flatten("", config.as_dict())
    return items


def constants_items(bundle):
    tag = " (" + bundle.mode + ")"
    return [(key + tag, value) for key, value in bundle.as_dict().items() if key != "mode"]


def solver_items(name, trace, handoff=None, error=None):
    items = collections.OrderedDict()
    items["status"] = "failed" if error else ("converged" if trace.converged else "stopped")
    if error:
        items["error"] = error
    for key, value in trace.summary().items():
        items[key] = value
    if handoff:
        for key, value in handoff.items():
            items["handoff_" + key] = value
    items["residuals"] = trace.residual_norms
    if name.startswith("approx_newton"):
        items["neumann_orders"] = trace.neumann_orders[1:]
    return items


def check_items(checks):
    return [(check.name + " (" + check.mode + ")",
             "lhs=" + repr(check.lhs) + " rhs=" + repr(check.rhs) + " margin=" + repr(check.margin)
             + " pass=" + str(check.passed) + ("" if check.asserted else " report_only")
             + (" note=" + check.note if check.note else ""))
            for check in checks]


def sprint_report(result, config_file=None):
    r"""
    Return the report text of a RunResult.
    """

    buffer = sprint_section("provenance", provenance(result, config_file))
    buffer += sprint_section("config", config_items(result.config))
    for mode, bundle in result.bundles.items():
        buffer += sprint_section("constants." + mode, constants_items(bundle))
    for name, trace in result.traces.items():
        buffer += sprint_section("solver." + name, solver_items(name, trace, result.handoff.get(name),
                                                                result.errors.get(name)))
    for name, error in result.errors.items():
        if name not in result.traces:
            buffer += sprint_section("solver." + name, [("status", "failed"), ("error", error)])
    if result.checks:
        failures = [check.name for check in result.checks if check.failed]
        buffer += sprint_section("checks", check_items(result.checks)
                                 + [("failures", failures)])
    return buffer


def write_trace_csv(trace, file_path):
    r"""
    Write a trace as CSV (header ne.trace_columns, one row per recorded iterate).

    Description of argument(s):
    trace                           A newton_exact.IterationTrace.
    file_path                       The CSV file path.
    """

    with open(file_path, "w") as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(ne.trace_columns)
        writer.writerows(trace.rows())


def write_plots(result, output_dir):
    r"""
    Write residuals.png (residual against iteration, one line per trace) and energy.png (the energy
    functional of the solution against time) with the Agg backend.  Return the written paths.
    """

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    fig, ax = plt.subplots()
    for name, trace in result.traces.items():
        residuals = [max(r, 1e-300) for r in trace.residual_norms]
        ax.semilogy(range(len(residuals)), residuals, marker="o", linewidth=1, markersize=4, label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual (sup norm)")
    ax.grid(linewidth=0.25)
    if result.traces:
        ax.legend(loc="upper right")
    fig.tight_layout()
    paths.append(os.path.join(output_dir, plot_file_names[0]))
    fig.savefig(paths[-1])
    plt.close(fig)

    solution = result.solution()
    if solution is not None and result.energies is not None:
        fig, ax = plt.subplots()
        ax.plot(solution.time_knots, np.asarray(result.energies), linewidth=1)
        ax.set_xlabel("t")
        ax.set_ylabel("energy functional")
        ax.grid(linewidth=0.25)
        fig.tight_layout()
        paths.append(os.path.join(output_dir, plot_file_names[1]))
        fig.savefig(paths[-1])
        plt.close(fig)
    return paths


def write_report(result, output_dir=None, config_file=None):
    r"""
    Write report.txt, the trace CSV files and (when output.plots is set) the plots into output_dir and
    return the list of written paths.

    Description of argument(s):
    result                          A run_pipeline.RunResult.
    output_dir                      The output directory (default: the configured one).
    config_file                     The configuration file path recorded in the provenance.
    """

    output_dir = output_dir or result.config.output_dir
    gm.makedirs(output_dir, quiet=1)
    paths = [os.path.join(output_dir, report_file_name)]
    with open(paths[0], "w") as report_file:
        report_file.write(sprint_report(result, config_file))
    for name, trace in result.traces.items():
        paths.append(os.path.join(output_dir, "trace_" + name + ".csv"))
        write_trace_csv(trace, paths[-1])
    if result.config.plots:
        paths += write_plots(result, output_dir)
    gp.lprint_var(paths)
    return paths


def check_summary(checks):
    r"""
    Return a check_tally filled with the checks and calculated.
    """

    tally = ck.check_tally()
    for check in checks:
        tally.add_result(check)
    tally.calc()
    return tally
