#!/usr/bin/env python

r"""
This module provides miscellaneous file, path and JSON helper functions such as json_load_file and dft.
"""

import os
import re
import json
import hashlib
import collections

import gen_print as gp
from solver_errors import ConfigurationError

robot_env = gp.robot_env


def makedirs(path, mode=0o777, quiet=None):
    r"""
    Call os.makedirs with the caller's arguments.

    This function does not fail if the directory already exists, and it prints an "Issuing:" line unless
    quiet is set.

    Description of argument(s):
    path                            The directory path to create.
    mode                            The mode of the new directories.
    quiet                           Indicates whether this function should run the print_issuing() function.
    """

    if not quiet:
        gp.qprint_timen("Issuing: os.makedirs('" + path + "', mode=" + oct(mode) + ")")
    os.makedirs(path, mode, exist_ok=True)


def dft(value, default):
    r"""
    Return default if value is None.  Otherwise, return value.

    Description of argument(s):
    value                           The value to be returned.
    default                         The default value to return if value is None.
    """

    return default if value is None else value


def file_to_list(file_path,
                 newlines=0,
                 comments=1,
                 trim=0):
    r"""
    Return the contents of a file as a list.  Each element of the resulting list is one line from the file.

    Description of argument(s):
    file_path                       The path to the file (relative or absolute).
    newlines                        Include newlines from the file in the results.
    comments                        Include comment lines and blank lines in the results.  Comment lines are
                                    any that begin with 0 or more spaces followed by the pound sign ("#").
    trim                            Trim white space from the beginning and end of each line.
    """

    lines = []
    with open(file_path) as file:
        for line in file:
            if not comments:
                if re.match(r"[ ]*#|^$", line):
                    continue
            if not newlines:
                line = line.rstrip("\n")
            if trim:
                line = line.strip()
            lines.append(line)

    return lines


def find_key_line(file_path, key_path):
    r"""
    Return the 1-based line number in a JSON file at which the last key of key_path appears, or None.

    The keys of key_path are searched for in order, each one after the line where its parent was found, so
    that a key name used in several sections resolves to the occurrence inside the right section.

    Description of argument(s):
    file_path                       The path to a JSON file.
    key_path                        A list of keys (e.g. ["time", "dt"]).  Integer entries (list indices)
                                    are skipped.
    """

    try:
        lines = file_to_list(file_path)
    except (IOError, OSError):
        return None
    line_ix = 0
    found_ix = None
    for key in key_path:
        if not isinstance(key, str):
            continue
        regex = r'\s*"' + re.escape(key) + r'"\s*:'
        for ix in range(line_ix, len(lines)):
            if re.match(regex, lines[ix]) or re.search(r'[{,]' + regex, lines[ix]):
                found_ix = ix
                line_ix = ix + 1
                break
        else:
            return None if found_ix is None else found_ix + 1
    return None if found_ix is None else found_ix + 1


def json_load_file(file_path):
    r"""
    Load a JSON file and return its contents with every object converted to an OrderedDict.

    A syntax error is reported as a ConfigurationError which names the file and the line of the error.

    Description of argument(s):
    file_path                       The path to the JSON file.
    """

    try:
        with open(file_path) as file:
            buffer = file.read()
    except (IOError, OSError) as error:
        raise ConfigurationError("unable to read file: " + str(error), file_path=file_path)
    try:
        return json.loads(buffer, object_pairs_hook=collections.OrderedDict)
    except ValueError as error:
        raise ConfigurationError("invalid JSON: " + getattr(error, "msg", str(error)),
                                 file_path=file_path, line_number=getattr(error, "lineno", None))


def canonical_json(data):
    r"""
    Return the canonical JSON text of data: sorted keys, no insignificant white space.

    Description of argument(s):
    data                            A JSON-serializable object.
    """

    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def sha256_text(buffer):
    r"""
    Return the hex SHA-256 digest of the buffer.
    """

    return hashlib.sha256(buffer.encode("utf-8")).hexdigest()
