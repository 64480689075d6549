#!/usr/bin/env python

r"""
Define the check_tally class.
"""

import sys
import collections


class check_tally:

    r"""
    This class is a tally of check results.  The tally can be viewed as rows and columns.  Each row is one
    check and is keyed by the check name.

    Example code:

    tally = check_tally()
    for result in results:
        tally.add_result(result)
    tally.calc()
    tally.print_report()

    Example result:

    Check                                    Mode      Lhs                    Rhs                    Pass
    ---------------------------------------- --------- ---------------------- ---------------------- -----
    unitarity                                -         1.3322676295501878e-15 1e-10                  True
    energy_static                            -         2.220446049250313e-16  1e-08                  True
    ===============================================================================================
    Totals: 2 checks, 2 passed, 0 failed, 0 report only.
    """

    def __init__(self, row_key_field_name='Check'):
        r"""
        Create a check tally object.

        Description of arguments:
        row_key_field_name          The title of the row key column.
        """

        self.__row_key_field_name = row_key_field_name
        self.__table = collections.OrderedDict()
        self.__totals_line = collections.OrderedDict([('total', 0), ('pass', 0), ('fail', 0),
                                                      ('report_only', 0)])

    def add_result(self, result):
        r"""
        Add a row for a diagnostics.CheckResult.

        Description of arguments:
        result                      The CheckResult.  Its name must be new to the tally.
        """

        if result.name in self.__table:
            message = "An entry for \"" + result.name + "\" already exists in"
            message += " check tally."
            raise ValueError(message)
        self.__table[result.name] = collections.OrderedDict([('mode', result.mode), ('lhs', result.lhs),
                                                             ('rhs', result.rhs), ('pass', result.passed),
                                                             ('asserted', result.asserted)])

    def calc(self):
        r"""
        Calculate the totals and return the totals line dictionary.
        """

        totals = collections.OrderedDict([('total', 0), ('pass', 0), ('fail', 0), ('report_only', 0)])
        for row_key, value in self.__table.items():
            totals['total'] += 1
            if not value['asserted']:
                totals['report_only'] += 1
            elif value['pass']:
                totals['pass'] += 1
            else:
                totals['fail'] += 1
        self.__totals_line = totals
        return self.__totals_line

    def failures(self):
        r"""
        Return the names of the asserted checks which failed.
        """

        return [row_key for row_key, value in self.__table.items() if value['asserted'] and not value['pass']]

    def sprint_report(self):
        r"""
        sprint the check tally in a formatted way.
        """

        key_width = 40
        widths = [9, 22, 22, 5]
        format_string = '{0:<' + str(key_width) + '}'
        dash_format_string = '{0:-<' + str(key_width) + '}'
        for field_num, width in enumerate(widths, start=1):
            format_string += ' {' + str(field_num) + ':<' + str(width) + '}'
            dash_format_string += ' {' + str(field_num) + ':->' + str(width) + '}'
        report_width = key_width + sum(width + 1 for width in widths)

        buffer = ""
        buffer += format_string.format(self.__row_key_field_name, 'Mode', 'Lhs', 'Rhs', 'Pass') + "\n"
        buffer += dash_format_string.format(*([''] * (len(widths) + 1))) + "\n"
        for row_key, value in self.__table.items():
            outcome = str(value['pass']) if value['asserted'] else 'info'
            buffer += format_string.format(row_key, value['mode'], repr(value['lhs']), repr(value['rhs']),
                                           outcome) + "\n"
        buffer += ('{0:=<' + str(report_width) + '}').format('') + "\n"
        totals = self.__totals_line
        buffer += "Totals: " + str(totals['total']) + " checks, " + str(totals['pass']) + " passed, " \
            + str(totals['fail']) + " failed, " + str(totals['report_only']) + " report only.\n"
        return buffer

    def print_report(self):
        r"""
        print the check tally in a formatted way.
        """

        sys.stdout.write(self.sprint_report())
