#!/usr/bin/env python

r"""
This module contains the keyword functions used by the robot suites under tests/.  Keywords build the
objects of the solver stack (grids, states, models, traces), run configurations and return plain numbers or
lists that the suites assert on.
"""

try:
    from robot.libraries.BuiltIn import BuiltIn
except ImportError:
    pass
try:
    import __builtin__
except ImportError:
    import builtins as __builtin__
import os
import json
import collections

import numpy as np

import gen_print as gp
import gen_misc as gm
import discrete_space as ds
import potentials as pt
import evolution as ev
import contraction as ct
import newton_exact as ne
import newton_neumann as nn
import diagnostics as dg
import check_tally as ck
import run_config as rc
import run_pipeline as rp
import run_report as rr

base_dir_path = os.path.normpath(os.path.join(os.path.dirname(__file__), ".."))
default_seed = dg.default_seed

# Solved runs keyed by (config path, seed).
_results = {}


def fail(message):
    BuiltIn().fail(gp.sprint_error(message))


# Setup.

def suite_setup():
    r"""
    Do test suite setup tasks.  The robot variables QUIET and DEBUG (default 0) govern the qprint and
    dprint output of the library.
    """

    for var_name in ("quiet", "debug"):
        value = BuiltIn().get_variable_value("${" + var_name.upper() + "}", default=0)
        setattr(__builtin__, var_name, int(value or 0))
    gp.qprintn()
    gp.qprint_pgm_header()


def test_setup():
    r"""
    Do test case setup tasks.
    """

    gp.qprintn()
    gp.qprint_executing()


def suite_teardown():
    gp.qprint_pgm_footer()


# Configurations and runs.

def config_path(name):
    r"""
    Return the path of the bundled configuration data/configs/<name>.json.
    """

    return os.path.join(base_dir_path, "data", "configs", name + ".json")


def load_config(name, **overrides):
    return rc.load_run_config(config_path(name), **overrides)


def config_error_message(file_path):
    r"""
    Load file_path and return the message of the ConfigurationError it raises.  Fail when the file loads.

    Description of argument(s):
    file_path                       A configuration file path, or the name of a bundled configuration.
    """

    if not os.path.exists(file_path):
        file_path = config_path(file_path)
    try:
        rc.load_run_config(file_path)
    except rc.ConfigurationError as error:
        gp.qprint_var(error)
        return str(error)
    fail("The configuration " + file_path + " loaded without error.")


def write_config_variant(name, output_path, key_path, value_json):
    r"""
    Write a copy of a bundled configuration with the value at key_path replaced and return its path.

    Description of argument(s):
    name                            The bundled configuration name.
    output_path                     The file to write.
    key_path                        The dotted key path (e.g. "time.dt").
    value_json                      The new value as JSON text (e.g. "0.3", "\"square_well\"").
    """

    data = gm.json_load_file(config_path(name))
    keys = key_path.split(".")
    section = data
    for key in keys[:-1]:
        section = section.setdefault(key, collections.OrderedDict())
    section[keys[-1]] = json.loads(value_json)
    gm.makedirs(os.path.dirname(os.path.abspath(output_path)), quiet=1)
    with open(output_path, "w") as file:
        json.dump(data, file, indent=4)
        file.write("\n")
    return output_path


def solve_config(name, seed=None):
    r"""
    Compute the constants of both modes and run every solver on a bundled configuration.  Return the
    RunResult.  Results are cached for the life of the robot process.

    Description of argument(s):
    name                            The bundled configuration name.
    seed                            An optional seed override.
    """

    seed = None if seed is None else int(seed)
    key = (name, seed)
    if key not in _results:
        config = load_config(name, seed=seed)
        result = rp.RunResult(config)
        rp.compute_constants(result)
        rp.run_solvers(result, rp.solver_names)
        _results[key] = result
    return _results[key]


def check_config(name):
    r"""
    Run the full check suite on a bundled configuration and return the list of CheckResults.
    """

    result = solve_config(name)
    if not result.checks:
        rp.run_check_suite(result.config, result)
        tally = rr.check_summary(result.checks)
        gp.qprint(tally.sprint_report())
    return result.checks


def get_check(checks, name):
    for check in checks:
        if check.name == name:
            return check
    fail("No check named \"" + name + "\" was run.  Checks: " + ", ".join(c.name for c in checks))


def check_should_pass(checks, *names):
    r"""
    Fail unless every named check passed.
    """

    failures = [get_check(checks, name) for name in names]
    failures = [check for check in failures if not check.passed]
    if failures:
        fail("The following checks failed:\n" + "".join("  " + repr(check) + " margin=" + repr(check.margin)
                                                         + " " + check.note + "\n" for check in failures))


def check_should_fail(checks, name):
    check = get_check(checks, name)
    if check.passed:
        fail("The check " + repr(check) + " passed but was expected to fail.")


def asserted_failures(checks):
    return [check.name for check in checks if check.failed]


def solver_summary(result, solver):
    r"""
    Return the summary dictionary of the named solver trace.
    """

    if solver not in result.traces:
        fail("The " + solver + " solver has no trace.  Errors: " + str(dict(result.errors)))
    return result.traces[solver].summary()


def solver_residuals(result, solver):
    return list(result.traces[solver].residual_norms)


def bundle_value(result, mode, field):
    return getattr(result.bundles[mode], field)


def trajectory_distance(result, first, second):
    return ds.sup_norm(result.trajectories[first] - result.trajectories[second])


def write_run_report(result, output_dir):
    return rr.write_report(result, output_dir)


def read_report_section(file_path, section):
    r"""
    Return the "key: value" lines of a report section as a dictionary of strings.
    """

    items = collections.OrderedDict()
    current = None
    for line in gm.file_to_list(file_path):
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            continue
        if current == section and ": " in line:
            key, value = line.split(": ", 1)
            items[key] = value
    if not items:
        fail("The report " + file_path + " has no section [" + section + "].")
    return items


def files_should_be_identical(first, second):
    with open(first, "rb") as file:
        first_bytes = file.read()
    with open(second, "rb") as file:
        second_bytes = file.read()
    if first_bytes != second_bytes:
        fail("The files " + first + " and " + second + " differ.")


def csv_header(file_path):
    return gm.file_to_list(file_path)[0].split(",")


# Discrete space.

def make_grid(dim=1, points_per_axis=64, axis_length=10.0):
    return ds.Grid(int(dim), int(points_per_axis), float(axis_length))


def sample_state(grid, n_orbitals=1, h10_norm=None, seed=default_seed):
    r"""
    Return a random smooth OrbitalSet, optionally scaled to the given H10 norm.
    """

    rng = np.random.default_rng(int(seed))
    return ds.random_state(grid, int(n_orbitals), rng, None if h10_norm is None else float(h10_norm))


def state_norm(state, which="H10"):
    return float(ds.norm(state, which))


def laplacian_eigen_residual(grid, modes=1):
    r"""
    Return the relative sup-norm residual of laplacian(s) - lambda s for the sine mode s.
    """

    mode = ds.sine_mode(grid, int(modes))
    eigenvalue = ds.laplacian_eigenvalue(grid, int(modes))
    residual = ds.laplacian_values(grid, mode[np.newaxis])[0] - eigenvalue * mode
    return float(np.max(np.abs(residual)) / np.max(np.abs(eigenvalue * mode)))


def h10_norm_of_sine_mode(grid, modes=1):
    r"""
    Return (measured, expected): the H10 norm of the L2-normalized sine mode and sqrt(1 - lambda).
    """

    mode = ds.sine_mode(grid, int(modes))
    mode = mode / ds.l2_norm_values(grid, mode)
    expected = np.sqrt(1.0 - ds.laplacian_eigenvalue(grid, int(modes)))
    return float(ds.h10_norm_values(grid, mode)), float(expected)


def subtract_trajectories_on_different_grids():
    r"""
    Subtract two trajectories sampled on different grids.  Raises a StructuralError.
    """

    knots = ds.uniform_knots(1.0, 4)
    first = ds.Trajectory.constant(sample_state(make_grid(1, 16)), knots)
    second = ds.Trajectory.constant(sample_state(make_grid(1, 32)), knots)
    return first - second


def sample_density_path_at(t):
    r"""
    Return the total charge of a breathing density path on [0, 1] at time t.  Times outside the path raise a
    RangeError.
    """

    grid = make_grid(1, 32)
    path = dg.breathing_density_path(grid, ds.uniform_knots(1.0, 10), grid.axis_length / 2.0, 1.0)
    return float(grid.cell_volume * np.sum(path.at(float(t))))


def sup_norm_of_empty_trajectory():
    return ds.sup_norm(None)


def laplacian_form_defects(grid, seed=default_seed):
    r"""
    Return (adjoint_defect, form) for random complex fields f and g: the relative symmetry defect
    |<lap f, g> - <f, lap g>| / (||f|| ||g||) and Re <lap f, f>.
    """

    rng = np.random.default_rng(int(seed))
    f = ds.random_smooth_field(grid, rng)
    g = ds.random_smooth_field(grid, rng)
    lap_f = ds.laplacian_values(grid, f)
    lap_g = ds.laplacian_values(grid, g)
    scale = ds.l2_norm_values(grid, f) * ds.l2_norm_values(grid, g)
    defect = abs(ds.inner(grid, lap_f, g) - ds.inner(grid, f, lap_g)) / scale
    return float(defect), float(np.real(ds.inner(grid, lap_f, f)))


def norm_axiom_defects(grid, which="H10", scalar=-2.5, seed=default_seed):
    r"""
    Return (homogeneity_defect, triangle_excess) of the named norm on random two-orbital states f and g:
    | ||a f|| - |a| ||f|| | / (|a| ||f||) and (||f + g|| - ||f|| - ||g||) / (||f|| + ||g||), with a complex
    scalar a of modulus |scalar|.
    """

    rng = np.random.default_rng(int(seed))
    f = ds.random_state(grid, 2, rng)
    g = ds.random_state(grid, 2, rng)
    a = float(scalar) * np.exp(0.3j)
    norm_f = ds.norm(f, which)
    norm_g = ds.norm(g, which)
    homogeneity = abs(ds.norm(ds.OrbitalSet(grid, a * f.values), which) - abs(a) * norm_f) / (abs(a) * norm_f)
    excess = (ds.norm(ds.OrbitalSet(grid, f.values + g.values), which) - norm_f - norm_g) / (norm_f + norm_g)
    return float(homogeneity), float(excess)


def sine_l2_norm(grid):
    r"""
    Return (measured, expected): the L2 norm of the sampled sin(pi x / L) and sqrt(L / 2).
    """

    measured = ds.l2_norm_values(grid, ds.sine_mode(grid, 1))
    return float(measured), float(np.sqrt(grid.axis_length / 2.0))


def h10_laplacian_identity_defect(grid, seed=default_seed):
    r"""
    Return |H10**2 - (||u||**2 + Re <u, -lap u>)| / H10**2 for a random two-orbital state u.
    """

    state = sample_state(grid, 2, seed=seed)
    h10_squared = ds.norm(state, "H10") ** 2
    form = np.real(ds.inner(grid, state.values, -ds.laplacian_values(grid, state.values)))
    return float(abs(h10_squared - ds.norm(state, "L2") ** 2 - form) / h10_squared)


def sup_norm_examples(grid):
    r"""
    Return (constant_sup, state_h10, two_knot_sup): the sup norm of a constant trajectory, the H10 norm of
    its state, and the sup norm of a two-knot trajectory whose knot norms are 1 and 3.
    """

    state = sample_state(grid, h10_norm=2.0)
    constant = ds.Trajectory.constant(state, ds.uniform_knots(1.0, 4))
    values = np.array([0.5 * state.values, 1.5 * state.values])
    two_knot = ds.Trajectory(grid, ds.uniform_knots(1.0, 1), values)
    return float(ds.sup_norm(constant)), float(ds.norm(state)), float(ds.sup_norm(two_knot))


# Potentials.

def hartree_model(grid, coupling=1.0):
    return pt.PotentialModel(grid, None, pt.HartreeKernel(grid, float(coupling)))


def hartree_symmetry_defect(grid, seed=default_seed):
    r"""
    Return |<W * f, g> - <f, W * g>| / (|<W * f, g>| + tiny) for random real fields f and g.
    """

    rng = np.random.default_rng(int(seed))
    model = hartree_model(grid)
    f = ds.random_smooth_field(grid, rng, complex_valued=False)
    g = ds.random_smooth_field(grid, rng, complex_valued=False)
    first = float(np.sum(model.hartree(f) * g))
    second = float(np.sum(f * model.hartree(g)))
    return abs(first - second) / (abs(first) + 1e-300)


def hartree_coupling_ratio(grid, coupling):
    r"""
    Return max|W_lambda * rho| / max|W_1 * rho| for a Gaussian density.
    """

    rho = np.abs(ds.gaussian_packet(grid, [grid.axis_length / 2.0] * grid.dim, 1.0)) ** 2
    scaled = hartree_model(grid, coupling).hartree(rho)
    unit = hartree_model(grid, 1.0).hartree(rho)
    return float(np.max(np.abs(scaled)) / np.max(np.abs(unit)))


def external_potential(grid, family, **params):
    params = dict((key, float(value)) for key, value in params.items())
    return pt.ExternalPotential(grid, family, params)


def external_rate_error(grid, family, t=0.3, eps=1e-5, **params):
    r"""
    Return the sup difference between the analytic time derivative of the external potential and a central
    difference quotient of its values.
    """

    external = external_potential(grid, family, **params)
    t = float(t)
    eps = float(eps)
    quotient = (external.values(t + eps) - external.values(t - eps)) / (2.0 * eps)
    return float(np.max(np.abs(quotient - external.time_derivative(t))))


def xc_history_minimum(grid, c_xc=0.1):
    r"""
    Return the smallest value of Phi over the knots of a breathing density path.  The history model keeps Phi
    nonnegative for nonnegative densities.
    """

    xc = pt.GaussianHistoryXC(grid, float(c_xc), 1.0)
    model = pt.PotentialModel(grid, None, None, xc)
    knots = ds.uniform_knots(1.0, 10)
    path = dg.breathing_density_path(grid, knots, grid.axis_length / 2.0, 1.0)
    return float(min(np.min(model.xc_phi(path, t)) for t in knots))


def hartree_delta_mass_error(grid, mass=2.0):
    r"""
    Put a single grid-point mass at one site and return the relative sup difference between the Hartree
    field and the direct sum mass h**dim W(x - x0).
    """

    model = hartree_model(grid)
    site = (grid.points_per_axis // 3,) * grid.dim
    rho = np.zeros(grid.shape)
    rho[site] = float(mass)
    field = model.hartree(rho)
    expected = np.empty(grid.shape)
    for index in np.ndindex(*grid.shape):
        offset = np.subtract(index, site)
        expected[index] = float(mass) * grid.cell_volume * model.hartree_kernel.value_at_offset(offset)
    return float(np.max(np.abs(field - expected)) / np.max(np.abs(expected)))


def hartree_scaling_defect(grid, factor=2.0, seed=default_seed):
    r"""
    Return max|W * (c rho) - c W * rho| / max|c W * rho| for a random density rho.
    """

    rng = np.random.default_rng(int(seed))
    model = hartree_model(grid)
    rho = np.abs(ds.random_smooth_field(grid, rng)) ** 2
    scaled = float(factor) * model.hartree(rho)
    return float(np.max(np.abs(model.hartree(float(factor) * rho) - scaled)) / np.max(np.abs(scaled)))


def xc_model(grid, c_xc=0.1):
    return pt.PotentialModel(grid, None, None, pt.GaussianHistoryXC(grid, float(c_xc), 1.0))


def xc_linear_density_error(grid, t=0.35, c_xc=0.1):
    r"""
    For the density rho(t) = (1 + t) rho0 return the relative sup difference between Phi(t) and
    c_xc g * rho0 (1 + t + t**2 / 2).  The trapezoid rule is exact for this path.
    """

    model = xc_model(grid, c_xc)
    rho0 = np.abs(ds.gaussian_packet(grid, grid.axis_length / 2.0, 1.0)) ** 2
    knots = ds.uniform_knots(1.0, 10)
    path = ds.DensityPath(grid, knots, np.array([(1.0 + s) * rho0 for s in knots]))
    t = float(t)
    expected = model.xc.rate(rho0) * (1.0 + t + 0.5 * t ** 2)
    return float(np.max(np.abs(model.xc_phi(path, t) - expected)) / np.max(np.abs(expected)))


def xc_derivative_additivity_defect(grid, seed=default_seed):
    r"""
    Return the relative sup defect of dPhi/drho[a + b] - dPhi/drho[a] - dPhi/drho[b] on the knots for random
    signed increment paths a and b.
    """

    rng = np.random.default_rng(int(seed))
    model = xc_model(grid)
    knots = ds.uniform_knots(1.0, 6)
    base = ds.DensityPath.zeros(grid, knots)
    a = rng.standard_normal((knots.size,) + grid.shape)
    b = rng.standard_normal((knots.size,) + grid.shape)
    combined = model.xc_derivative_apply(base, a + b)
    parts = model.xc_derivative_apply(base, a) + model.xc_derivative_apply(base, b)
    return float(np.max(np.abs(combined - parts)) / np.max(np.abs(combined)))


def xc_history_split_defects(grid, split_knot=5):
    r"""
    Compute Phi along a breathing density path on [0, 1] and again on its tail from split_knot on.  Return
    (continued, restarted): the sup differences on the tail when the tail starts from the Phi of the whole
    path at the split and when it restarts from its own initial density.
    """

    model = xc_model(grid)
    knots = ds.uniform_knots(1.0, 10)
    path = dg.breathing_density_path(grid, knots, grid.axis_length / 2.0, 1.0)
    split_knot = int(split_knot)
    whole = pt.PotentialPath(model, path)
    tail = ds.DensityPath(grid, knots[split_knot:], path.values[split_knot:])
    continued = pt.PotentialPath(model.with_xc_start(whole.xc_knots[split_knot]), tail)
    restarted = pt.PotentialPath(model, tail)
    reference = whole.xc_knots[split_knot:]
    return (float(np.max(np.abs(continued.xc_knots - reference))),
            float(np.max(np.abs(restarted.xc_knots - reference))))


# Evolution.

def window_step_count(t_end, dt):
    return ev.window_steps((0.0, float(t_end)), float(dt))


def eigenmode_propagation_error(grid, modes=1, t_end=1.0, dt=0.05):
    r"""
    Propagate an L2-normalized sine mode in the free decoupled model and return the sup over knots of the L2
    distance to the exact discrete solution cayley_factor(E, dt)**n times the mode.
    """

    model = pt.PotentialModel(grid)
    mode = ds.sine_mode(grid, int(modes)).astype(complex)
    psi0 = ds.OrbitalSet(grid, mode / ds.l2_norm_values(grid, mode))
    cfg = ev.PropagatorConfig(float(dt))
    trajectory = ev.propagate(psi0, None, (0.0, float(t_end)), cfg, model)
    energy = -0.5 * model.hbar ** 2 / model.mass * ds.laplacian_eigenvalue(grid, int(modes))
    factor = ev.cayley_factor(energy, cfg.dt, model.hbar)
    errors = [ds.l2_norm_values(grid, trajectory.values[n] - factor ** n * psi0.values)
              for n in range(trajectory.n_knots)]
    return float(max(errors))


def zero_charge_drift(name):
    r"""
    Return the L2 drift of the zero-charge propagation of a bundled configuration.
    """

    config = load_config(name)
    result = rp.RunResult(config)
    trajectory = ev.propagate(result.psi0, None, config.window, result.cfg, result.model)
    return float(ev.l2_drift(trajectory))


def zero_step_defect(grid):
    r"""
    Return the largest change made by a Crank-Nicolson step of length zero.
    """

    state = sample_state(grid, 2)
    stepped = ev.step(state, np.zeros(grid.shape), 0.0)
    return float(np.max(np.abs(stepped.values - state.values)))


def composition_defects(grid, dt=0.25):
    r"""
    In the free decoupled model return (two_step, split): the largest difference between propagating over
    [0, 2 dt] and two single steps, and between propagating over [0, 4 dt] and over [0, 2 dt] then
    [2 dt, 4 dt].
    """

    dt = float(dt)
    model = pt.PotentialModel(grid)
    cfg = ev.PropagatorConfig(dt)
    psi0 = sample_state(grid, 2)
    zero = np.zeros(grid.shape)
    first = ev.propagate(psi0, None, (0.0, 2.0 * dt), cfg, model)
    stepped = ev.step(ev.step(psi0, zero, dt), zero, dt)
    whole = ev.propagate(psi0, None, (0.0, 4.0 * dt), cfg, model)
    second = ev.propagate(first.final_state(), None, (2.0 * dt, 4.0 * dt), cfg, model)
    return (float(np.max(np.abs(first.values[-1] - stepped.values))),
            float(np.max(np.abs(whole.values[-1] - second.values[-1]))))


def constant_source_error(grid, t_end=1.0, dt=0.1):
    r"""
    With the Hamiltonian switched off (a huge effective mass and no potential) the response to a constant
    source f is eta(t) = -(i t / hbar) f.  Return the relative sup difference over the knots.
    """

    model = pt.PotentialModel(grid, mass=1e12)
    window = (0.0, float(t_end))
    cfg = ev.PropagatorConfig(float(dt))
    knots = ev.window_knots(window, cfg.dt)
    f = sample_state(grid, 2).values
    eta = ev.propagate_inhomogeneous(np.array([f] * knots.size), None, window, cfg, model)
    expected = np.array([-1j * t / model.hbar * f for t in knots])
    return float(np.max(np.abs(eta.values - expected)) / np.max(np.abs(expected)))


def nested_quadrature_error(grid, t_end=0.1, n_steps=2, seed=default_seed):
    r"""
    Compare propagate_inhomogeneous with the nested quadrature -(i / hbar) sum_j w_j U(t, s_j) f(s_j) over
    the knots s_j (trapezoid weights) in the free decoupled model, for f(s) = cos(s) f0 + s f1.  Return the
    relative sup difference at t_end.
    """

    rng = np.random.default_rng(int(seed))
    model = pt.PotentialModel(grid)
    window = (0.0, float(t_end))
    cfg = ev.PropagatorConfig(float(t_end) / int(n_steps))
    knots = ev.window_knots(window, cfg.dt)
    f0 = ds.random_state(grid, 1, rng).values
    f1 = ds.random_state(grid, 1, rng).values

    def source(s):
        return np.cos(s) * f0 + s * f1

    eta = ev.propagate_inhomogeneous(np.array([source(s) for s in knots]), None, window, cfg, model)
    nested = 0.5 * cfg.dt * source(knots[-1])
    for j, s in enumerate(knots[:-1]):
        weight = 0.5 * cfg.dt if j == 0 else cfg.dt
        moved = ev.propagate(ds.OrbitalSet(grid, source(s)), None, (s, knots[-1]), cfg, model)
        nested = nested + weight * moved.values[-1]
    nested = -1j / model.hbar * nested
    return float(np.max(np.abs(eta.values[-1] - nested)) / np.max(np.abs(nested)))


# Contraction.

def continuation_window_count(gamma_total, cap, n_steps):
    return ct.continuation_windows(float(gamma_total), float(cap), int(n_steps))


def picard_tolerance(sigma, q):
    return ct.picard_tolerance(float(sigma), float(q))


def predicted_picard_iterations(q, first_step, eps):
    return ct.predicted_picard_iterations(float(q), float(first_step), float(eps))


def picard_on_long_window():
    r"""
    Run picard_solve with a contraction constant above 1.  Raises a WindowTooLongError.
    """

    grid = make_grid(1, 16)
    model = hartree_model(grid)
    psi0 = sample_state(grid)
    return ct.picard_solve(psi0, model, (0.0, 1.0), 1e-10, 10, ev.PropagatorConfig(0.25), gamma=1.5)


def xc_continuation_distance(grid, t_end=0.4, dt=0.05, target_residual=1e-12):
    r"""
    In a weak Hartree plus history XC model, solve on [0, t_end] with Picard in one window and again by
    continuation over two windows.  Return (distance, tolerance): the sup distance of the two solutions and
    ten times the combined residual targets.
    """

    xc = pt.GaussianHistoryXC(grid, 0.05, 1.0)
    model = pt.PotentialModel(grid, None, pt.HartreeKernel(grid, 0.05), xc)
    psi0 = ds.OrbitalSet(grid, ds.gaussian_packet(grid, grid.axis_length / 2.0, 1.0)[np.newaxis])
    psi0 = ds.OrbitalSet(grid, psi0.values / ds.norm(psi0, "L2"))
    cfg = ev.PropagatorConfig(float(dt))
    target_residual = float(target_residual)
    single, trace = ct.picard_solve(psi0, model, (0.0, float(t_end)), target_residual, 200, cfg)

    def window_solver(state, model, window, cfg, gamma):
        return ct.picard_solve(state, model, window, target_residual, 200, cfg)

    # gamma_total = 1.5 cap forces two windows.
    continued, traces = ct.continue_in_time(psi0, model, float(t_end), 0.5, cfg, 0.75, target_residual, 200,
                                            solver=window_solver)
    distance = ds.sup_norm(continued - single)
    gp.qprint_vars(distance, len(traces))
    return float(distance), 10.0 * (len(traces) + 1) * target_residual


# Newton.

def choose_truncation(residual_norm, kprime_norm_est, n_max=64):
    return list(nn.choose_truncation(float(residual_norm), float(kprime_norm_est), int(n_max)))


def neumann_policy(K0, M=None, n_max=64):
    K0 = float(K0)
    M = 1.0 / (1.0 - K0) if M is None and K0 < 1.0 else float(M or 1.0)
    return nn.NeumannPolicy(K0, M, int(n_max))


def kantorovich_tstar(h, sigma):
    return float(ne.kantorovich_tstar(float(h), float(sigma)))


def r_quadratic_bounds(kappa, h, sigma, n_bounds=5):
    kappa, h, sigma = float(kappa), float(h), float(sigma)
    return [float(ne.r_quadratic_bound(kappa, h, sigma, k)) for k in range(int(n_bounds))]


def approx_newton_constants(K0, c_lip, h, alpha, delta):
    return list(nn.approx_newton_constants(float(K0), float(c_lip), float(h), float(alpha), float(delta)))


def neumann_series_error(name, n):
    r"""
    On a bundled configuration, apply (I - K') to the truncated Neumann series of a random direction f and
    return (error, bound): the sup norm of (I - K')(I + ... + K'**n) f - f = -K'**(n+1) f and the product of
    ||f|| with the measured ||K'|| estimate raised to n + 1.
    """

    result = solve_config(name)
    rng = np.random.default_rng(default_seed)
    linearization = ne.Linearization(result.solution(), result.psi0, result.model, result.cfg)
    f = ne.random_direction(result.solution(), rng)
    series = nn.neumann_apply(linearization, f, int(n))
    error = ds.sup_norm(series - linearization.apply(series) - f)
    estimate = nn.kprime_norm_estimate(linearization, rng)
    return float(error), float(estimate ** (int(n) + 1))


def newton_constants(c_lip, tau, alpha, h, inverse_norm):
    return list(ne.newton_constants(float(c_lip), float(tau), float(alpha), float(h), float(inverse_norm)))


def weak_hartree_linearization(grid, coupling=0.2, t_end=0.5, dt=0.1):
    r"""
    Return the Linearization of K at the constant trajectory of a random state in a weak Hartree model.
    """

    model = hartree_model(grid, coupling)
    psi0 = sample_state(grid, h10_norm=1.0)
    cfg = ev.PropagatorConfig(float(dt))
    base = ds.Trajectory.constant(psi0, ev.window_knots((0.0, float(t_end)), cfg.dt))
    return ne.Linearization(base, psi0, model, cfg)


def kprime_linearity_defect(grid, scalar=2.5, seed=default_seed):
    r"""
    Return sup_norm(K'(a w1 + w2) - a K' w1 - K' w2) / sup_norm(K'(a w1 + w2)) for random directions and a
    real scalar a.
    """

    rng = np.random.default_rng(int(seed))
    linearization = weak_hartree_linearization(grid)
    w1 = ne.random_direction(linearization.base, rng)
    w2 = ne.random_direction(linearization.base, rng)
    a = float(scalar)
    combined = linearization.apply(w1 * a + w2)
    parts = linearization.apply(w1) * a + linearization.apply(w2)
    return float(ds.sup_norm(combined - parts) / ds.sup_norm(combined))


def linearized_recovery_error(grid, tol=1e-13, seed=default_seed):
    r"""
    Build f = (I - K') g for a random g, solve (I - K') psi = f and return sup_norm(psi - g) / sup_norm(g).
    """

    rng = np.random.default_rng(int(seed))
    linearization = weak_hartree_linearization(grid)
    g = ne.random_direction(linearization.base, rng)
    psi, count = ne.solve_linearized(linearization, g - linearization.apply(g), float(tol))
    gp.qprint_var(count)
    return float(ds.sup_norm(psi - g) / ds.sup_norm(g))


def decoupled_injectivity_witness(grid):
    r"""
    Return the sampled injectivity witness min |(I - K') g| / |g| in the decoupled model, where K' = 0.
    """

    model = pt.PotentialModel(grid)
    psi0 = sample_state(grid)
    cfg = ev.PropagatorConfig(0.1)
    base = ds.Trajectory.constant(psi0, ev.window_knots((0.0, 0.5), cfg.dt))
    linearization = ne.Linearization(base, psi0, model, cfg)
    return float(ne.injectivity_witness(linearization, np.random.default_rng(default_seed)))


def neumann_orders(name):
    r"""
    Return the truncation orders n(k) of the approximate Newton run on a bundled configuration.
    """

    result = solve_config(name)
    if "approx_newton" not in result.traces:
        fail("Approximate Newton did not run: " + str(dict(result.errors)))
    return list(result.traces["approx_newton"].neumann_orders[1:])


def kprime_application_counts(name):
    r"""
    Return (approx_newton, newton): the number of K' applications each Newton solver made on a bundled
    configuration.
    """

    result = solve_config(name)
    return (solver_summary(result, "approx_newton")["kprime_applications"],
            solver_summary(result, "newton")["kprime_applications"])


# Diagnostics.

def convergence_order(*residuals):
    return dg.convergence_order([float(r) for r in residuals])[0]


def refinement_ratio(coarse, fine):
    return float(dg.refinement_ratio(float(coarse), float(fine)))


def check_result(name, lhs, rhs, asserted=True):
    return dg.CheckResult(name, float(lhs), float(rhs), asserted=asserted)


def tally_totals(*checks):
    r"""
    Return the totals dictionary of a check_tally built from the checks.
    """

    tally = ck.check_tally()
    for check in checks:
        tally.add_result(check)
    totals = tally.calc()
    gp.qprint(tally.sprint_report())
    return dict(totals)


def embedding_audit_pass_rate(grid, n_states=200):
    r"""
    Compute the empirical embedding constants and audit them on fresh random states.  Return the number of
    exponents whose audit passed.
    """

    rng = np.random.default_rng(default_seed)
    constants = ct.embedding_constants(grid, rng)
    audit = dg.embedding_audit(grid, constants, rng, int(n_states))
    gp.qprint_var(audit)
    return sum(1 for ratio, constant, passed in audit.values() if passed)


def potential_lipschitz_scale(name, seed=default_seed):
    r"""
    On a bundled configuration, run the potential Lipschitz audit on one ball pair and return (lhs, rhs,
    ratio) with ratio = rhs / (C sup_norm(Psi1 - Psi2) ||psi||), C the empirical bundle's constant.
    """

    result = solve_config(name)
    bundle = result.bundles["empirical"]
    rng = np.random.default_rng(int(seed))
    reference = ds.Trajectory.constant(result.psi0, ev.window_knots(result.config.window, result.cfg.dt))
    psi1, psi2 = ct.ball_pair(reference, bundle.r, rng, near=True)
    psi = ds.random_state(result.grid, result.psi0.n_orbitals, rng, h10_norm=1.0)
    lhs, rhs, passed, pair_rhs = dg.potential_lipschitz_check(psi1, psi2, psi, result.model, bundle)
    gp.qprint_vars(lhs, rhs, pair_rhs)
    return float(lhs), float(rhs), float(rhs / (bundle.C * ds.sup_norm(psi1 - psi2) * ds.norm(psi)))


def agreement_tolerance_ratio(name, first, second):
    r"""
    Return the agreement check tolerance of two solvers divided by the sum of their residual floors.
    """

    checks = check_config(name)
    result = solve_config(name)
    check = get_check(checks, "agreement." + first + "_" + second)
    return float(check.rhs / (rp.solver_floor(result, first) + rp.solver_floor(result, second)))


def continuation_tolerance_ratio(name):
    r"""
    Return the continuation check tolerance divided by (windows + 1) times the residual floor.
    """

    checks = check_config(name)
    result = solve_config(name)
    check = get_check(checks, "continuation")
    windows = int(check.note.split()[0])
    return float(check.rhs / ((windows + 1) * result.floor))


def config_fd_epsilons(file_path):
    r"""
    Return the finite-difference ladder of a configuration file or bundled configuration name.
    """

    if not os.path.exists(file_path):
        file_path = config_path(file_path)
    return list(rc.load_run_config(file_path).fd_epsilons)


def fine_ladder_kept_steps(*errors):
    r"""
    Return the number of fine-ladder steps kept by the roundoff cut for the given relative errors.
    """

    return len(dg.roundoff_cut(list(dg.fd_ladders["fine"]), [float(error) for error in errors]))
