#!/usr/bin/env python

r"""
This module loads and validates run configurations (JSON documents described in docs/config_schema.md) and
builds the grid, model, initial state and solver parameters they describe.

Validation errors are ConfigurationErrors which name the file and the line of the offending key.
"""

import copy
import collections

import numpy as np

import gen_print as gp
import gen_valid as gv
import gen_misc as gm
import discrete_space as ds
import potentials as pt
import evolution as ev
import newton_exact as ne
import diagnostics as dg
from solver_errors import ConfigurationError, StructuralError

solver_selections = ["picard", "newton", "approx_newton", "all"]
orbital_kinds = ["gaussian", "sine"]

default_config = collections.OrderedDict([
    ("name", "unnamed"),
    ("grid", collections.OrderedDict([("dim", 1), ("points_per_axis", 128), ("axis_length", 10.0)])),
    ("physics", collections.OrderedDict([("hbar", 1.0), ("mass", 1.0)])),
    ("external", collections.OrderedDict([("family", "zero"), ("params", collections.OrderedDict())])),
    ("hartree", collections.OrderedDict([("enabled", False), ("coupling", 1.0),
                                         ("mollification_radius", None)])),
    ("xc", None),
    ("initial_state", collections.OrderedDict([("orbitals", [])])),
    ("time", collections.OrderedDict([("T", 1.0), ("dt", 0.02)])),
    ("solver", collections.OrderedDict([
        ("selection", "all"),
        ("constants_mode", "empirical"),
        ("gamma_cap", 0.5),
        ("picard_max_iters", 100),
        ("newton", collections.OrderedDict([("h", 0.5), ("alpha", 0.5), ("tau", 0.5),
                                            ("max_newton_iters", 30), ("linearized_tol", 1e-13),
                                            ("linearized_max_iters", 400)])),
        ("neumann", collections.OrderedDict([("n_max", 64), ("mode", "adaptive"), ("fixed_n", 1),
                                             ("declared_K0", None)])),
        ("propagator", collections.OrderedDict([("linear_solve_tol", 1e-12), ("max_linear_iters", 1000)])),
    ])),
    ("diagnostics", collections.OrderedDict([
        ("audit_trials", 100),
        ("embedding_trials", 2000),
        ("embedding_audit_states", 1000),
        ("contraction_pairs", 20),
        ("uniform_pairs", 6),
        ("lipschitz_pairs", 8),
        ("inverse_samples", 20),
        ("kprime_samples", 4),
        ("fd_ladder", "coarse"),
        ("fd_epsilons", None),
        ("fd_spot_epsilon", 1e-5),
        ("fd_spot_tolerance", 1e-4),
        ("fd_slope_tolerance", 0.3),
        ("refinement", True),
        ("refinement_band", [3.0, 5.0]),
        ("dense_check", True),
        ("dense_points", 16),
        ("dense_knots", 6),
        ("unitarity_tolerance", 1e-10),
        ("energy_tolerance", 1e-8),
        ("identity_tolerance", 1e-3),
        ("order_min", 1.9),
    ])),
    ("seed", 0x5EED),
    ("output", collections.OrderedDict([("directory", "tdks_output"), ("plots", False)])),
])


xc_keys = ["model", "c_xc", "width", "declared_deriv_bound", "declared_lipschitz"]
orbital_keys = ["kind", "center", "width", "momentum", "modes", "norm"]


def merge_defaults(defaults, data):
    r"""
    Return a deep copy of defaults updated with data, recursing into dictionaries.  A None or dictionary
    value in data replaces a None default.
    """

    result = copy.deepcopy(defaults)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = merge_defaults(result[key], value)
        else:
            result[key] = copy.deepcopy(value)
    return result


def find_unknown_key(defaults, data, key_path=()):
    r"""
    Return the key path of the first key in data which has no counterpart in defaults, or None.  Free-form
    sections (external.params, xc, the orbitals) are checked against their own key lists.
    """

    for key, value in data.items():
        path = list(key_path) + [key]
        if key not in defaults:
            return path
        if path == ["external", "params"]:
            continue
        if path == ["xc"] and isinstance(value, dict):
            unknown = [k for k in value if k not in xc_keys]
            if unknown:
                return path + unknown[:1]
        elif path == ["initial_state", "orbitals"] and isinstance(value, list):
            for ix, orbital in enumerate(value):
                unknown = [k for k in orbital if k not in orbital_keys] if isinstance(orbital, dict) else []
                if unknown:
                    return path + [ix] + unknown[:1]
        elif isinstance(value, dict) and isinstance(defaults[key], dict):
            found = find_unknown_key(defaults[key], value, path)
            if found:
                return found
    return None


def one_line(message):
    return " ".join(line.strip() for line in str(message).split("\n") if line.strip())


class RunConfig(object):
    r"""
    A validated run configuration.

    Description of argument(s):
    data                            The configuration dictionary (defaults are filled in).
    file_path                       The file the data came from (used to locate errors).
    """

    def __init__(self, data, file_path=None):
        self.file_path = file_path
        self.source = data
        self.data = merge_defaults(default_config, data)
        self.validate()

    def error(self, message, key_path):
        line_number = gm.find_key_line(self.file_path, key_path) if self.file_path else None
        return ConfigurationError(".".join(str(k) for k in key_path) + ": " + message,
                                  file_path=self.file_path, line_number=line_number)

    def lookup(self, key_path):
        value = self.data
        for key in key_path:
            try:
                value = value[key]
            except (KeyError, IndexError, TypeError):
                return None
        return value

    def check(self, key_path, validator, *args, **kwargs):
        r"""
        Run a gen_valid validator on the value at key_path, re-raising failures as ConfigurationErrors which
        locate the key in the file.
        """

        try:
            validator(self.lookup(key_path), *args, var_name=str(key_path[-1]),
                      error_class=ConfigurationError, **kwargs)
        except ConfigurationError as error:
            raise self.error(one_line(error), key_path)

    def validate(self):
        unknown = find_unknown_key(default_config, self.source)
        if unknown:
            raise self.error("unknown key \"" + str(unknown[-1]) + "\"", unknown)
        self.check(["grid", "dim"], gv.valid_value, valid_values=[1, 3])
        self.check(["grid", "points_per_axis"], gv.valid_integer, lower=3)
        self.check(["grid", "axis_length"], gv.valid_float, lower=0.0, lower_open=True)
        self.check(["physics", "hbar"], gv.valid_float, lower=0.0, lower_open=True)
        self.check(["physics", "mass"], gv.valid_float, lower=0.0, lower_open=True)
        self.check(["external", "family"], gv.valid_value, valid_values=list(pt.external_families))
        self.check(["hartree", "enabled"], gv.valid_bool)
        self.check(["hartree", "coupling"], gv.valid_float, lower=0.0)
        self.check(["time", "T"], gv.valid_float, lower=0.0, lower_open=True)
        self.check(["time", "dt"], gv.valid_float, lower=0.0, upper=self.data["time"]["T"], lower_open=True,
                   upper_open=True)
        try:
            ev.window_steps((0.0, self.data["time"]["T"]), self.data["time"]["dt"])
        except ConfigurationError as error:
            raise self.error(str(error), ["time", "dt"])
        solver = self.data["solver"]
        self.check(["solver", "selection"], gv.valid_value, valid_values=solver_selections)
        self.check(["solver", "constants_mode"], gv.valid_value, valid_values=["analytic", "empirical"])
        self.check(["solver", "gamma_cap"], gv.valid_float, lower=0.0, upper=1.0, lower_open=True,
                   upper_open=True)
        self.check(["solver", "picard_max_iters"], gv.valid_integer, lower=1)
        self.check(["solver", "neumann", "n_max"], gv.valid_integer, lower=1)
        self.check(["solver", "neumann", "mode"], gv.valid_value, valid_values=["adaptive", "fixed"])
        if solver["neumann"]["declared_K0"] is not None:
            self.check(["solver", "neumann", "declared_K0"], gv.valid_float, lower=0.0)
        for key in ("linear_solve_tol", "max_linear_iters"):
            self.check(["solver", "propagator", key], gv.valid_float, lower=0.0, lower_open=True)
        self.check(["seed"], gv.valid_integer, lower=0)
        self.check(["output", "plots"], gv.valid_bool)
        self.check(["diagnostics", "refinement"], gv.valid_bool)
        self.check(["diagnostics", "dense_check"], gv.valid_bool)
        self.check(["diagnostics", "fd_ladder"], gv.valid_value, valid_values=list(dg.fd_ladders))
        epsilons = self.data["diagnostics"]["fd_epsilons"]
        if epsilons is not None:
            if not isinstance(epsilons, list) or not epsilons:
                raise self.error("fd_epsilons must be a nonempty list", ["diagnostics", "fd_epsilons"])
            for ix, eps in enumerate(epsilons):
                self.check(["diagnostics", "fd_epsilons", ix], gv.valid_float, lower=0.0, lower_open=True,
                           upper=epsilons[ix - 1] if ix else None, upper_open=True)
        orbitals = self.data["initial_state"]["orbitals"]
        if not isinstance(orbitals, list) or not orbitals:
            raise self.error("at least one orbital is required", ["initial_state", "orbitals"])
        for ix, orbital in enumerate(orbitals):
            key_path = ["initial_state", "orbitals", ix, "kind"]
            self.check(key_path, gv.valid_value, valid_values=orbital_kinds)
        # Building the components runs the remaining (component-level) validation.
        for builder, key_path in ((self.grid, ["grid"]), (self.model, ["external"]),
                                  (self.initial_state, ["initial_state"]),
                                  (self.newton_params, ["solver", "newton"])):
            try:
                builder()
            except (ConfigurationError, StructuralError) as error:
                if getattr(error, "file_path", None) is not None:
                    raise
                raise self.error(one_line(error), key_path)

    def apply_overrides(self, output_dir=None, seed=None, mode=None, solver=None):
        r"""
        Apply command-line overrides and re-validate.
        """

        if output_dir:
            self.data["output"]["directory"] = output_dir
        if seed is not None:
            self.data["seed"] = int(seed)
        if mode:
            self.data["solver"]["constants_mode"] = mode
        if solver:
            self.data["solver"]["selection"] = solver
        self.validate()

    @property
    def name(self):
        return self.data["name"]

    @property
    def seed(self):
        return int(self.data["seed"])

    @property
    def mode(self):
        return self.data["solver"]["constants_mode"]

    @property
    def selection(self):
        return self.data["solver"]["selection"]

    @property
    def t_end(self):
        return float(self.data["time"]["T"])

    @property
    def window(self):
        return (0.0, self.t_end)

    @property
    def output_dir(self):
        return self.data["output"]["directory"]

    @property
    def plots(self):
        return bool(self.data["output"]["plots"])

    @property
    def diagnostics(self):
        return self.data["diagnostics"]

    @property
    def fd_epsilons(self):
        r"""
        Return the finite-difference ladder: fd_epsilons when given, otherwise the named fd_ladder.
        """

        diagnostics = self.data["diagnostics"]
        if diagnostics["fd_epsilons"] is not None:
            return tuple(float(eps) for eps in diagnostics["fd_epsilons"])
        return dg.fd_ladders[diagnostics["fd_ladder"]]

    def rng(self, stream=0):
        r"""
        Return a numpy Generator seeded by (seed, stream), so that independent consumers draw independent,
        reproducible streams.
        """
        return np.random.default_rng([self.seed, stream])

    def grid(self):
        grid = self.data["grid"]
        return ds.Grid(grid["dim"], grid["points_per_axis"], grid["axis_length"])

    def model(self, grid=None):
        grid = grid or self.grid()
        external = pt.ExternalPotential(grid, self.data["external"]["family"],
                                        self.data["external"]["params"])
        hartree = self.data["hartree"]
        kernel = pt.HartreeKernel(grid, hartree["coupling"], hartree["mollification_radius"]) \
            if hartree["enabled"] else None
        xc = None
        if self.data["xc"] is not None:
            xc_data = self.data["xc"]
            if xc_data.get("model", "gaussian_history") != "gaussian_history":
                raise self.error("unknown XC model", ["xc", "model"])
            xc = pt.GaussianHistoryXC(grid, xc_data.get("c_xc", 0.1), xc_data.get("width", 1.0),
                                      xc_data.get("declared_deriv_bound"), xc_data.get("declared_lipschitz"))
        physics = self.data["physics"]
        return pt.PotentialModel(grid, external, kernel, xc, physics["hbar"], physics["mass"])

    def initial_state(self, grid=None):
        r"""
        Return the initial OrbitalSet.  Each orbital is scaled to its "norm" entry (L2, default 1).
        """

        grid = grid or self.grid()
        values = []
        for ix, orbital in enumerate(self.data["initial_state"]["orbitals"]):
            if orbital["kind"] == "gaussian":
                center = orbital.get("center", [grid.axis_length / 2.0] * grid.dim)
                field = ds.gaussian_packet(grid, center, orbital.get("width", 1.0),
                                           orbital.get("momentum", 0.0))
            else:
                field = ds.sine_mode(grid, orbital.get("modes", 1)).astype(complex)
            size = ds.l2_norm_values(grid, field)
            if size == 0.0:
                raise self.error("the orbital vanishes on the grid",
                                 ["initial_state", "orbitals", ix, "kind"])
            values.append(field * (orbital.get("norm", 1.0) / size))
        return ds.OrbitalSet(grid, np.array(values))

    def propagator_config(self, dt=None):
        propagator = self.data["solver"]["propagator"]
        return ev.PropagatorConfig(dt or self.data["time"]["dt"], "crank_nicolson",
                                   propagator["linear_solve_tol"], int(propagator["max_linear_iters"]))

    def newton_params(self):
        newton = self.data["solver"]["newton"]
        return ne.NewtonParams(newton["h"], newton["alpha"], newton["tau"], None, None,
                               newton["max_newton_iters"], newton["linearized_tol"],
                               newton["linearized_max_iters"])

    def neumann_settings(self):
        return self.data["solver"]["neumann"]

    def constants_settings(self):
        r"""
        Return the sampling settings passed to contraction.build_constants.
        """

        diagnostics = self.data["diagnostics"]
        settings = collections.OrderedDict()
        for key in ("embedding_trials", "uniform_pairs", "lipschitz_pairs", "inverse_samples",
                    "kprime_samples"):
            settings[key] = diagnostics[key]
        settings["declared_K0"] = self.data["solver"]["neumann"]["declared_K0"]
        return settings

    def as_dict(self):
        return self.data

    def config_hash(self):
        return gm.sha256_text(gm.canonical_json(self.data))


def load_run_config(file_path, **overrides):
    r"""
    Load, validate and return the RunConfig in file_path, with optional command-line overrides
    (output_dir, seed, mode, solver).

    Description of argument(s):
    file_path                       The path to the JSON configuration file.
    overrides                       Keyword overrides passed to RunConfig.apply_overrides.
    """

    data = gm.json_load_file(file_path)
    if not isinstance(data, dict):
        raise ConfigurationError("the configuration must be a JSON object", file_path=file_path,
                                 line_number=1)
    config = RunConfig(data, file_path)
    if any(value is not None for value in overrides.values()):
        config.apply_overrides(**overrides)
    gp.dprint_var(config.data)
    return config
