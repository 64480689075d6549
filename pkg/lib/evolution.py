#!/usr/bin/env python

r"""
This module provides the discrete time-ordered propagator U^rho(t, s) (Crank-Nicolson), the fixed-point map
K and the inhomogeneous (Duhamel) propagation used for derivatives and identity checks.

One step with the midpoint potential v is

    (I + i tau H) psi+ = (I - i tau H) psi,   tau = dt / (2 hbar),   H = -hbar**2/(2 mass) laplacian + v

solved directly (banded) in 1D and by BiCGSTAB in 3D.
"""

import collections

import numpy as np
from scipy import linalg
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

import gen_print as gp
import gen_valid as gv
import discrete_space as ds
import potentials as pt
from solver_errors import ConfigurationError, LinearSolveError


class PropagatorConfig(object):
    r"""
    Description of argument(s):
    dt                              The time step.
    scheme                          The one-step scheme.  Only "crank_nicolson" is provided.
    linear_solve_tol                The relative residual tolerance of the 3D iterative solve.
    max_linear_iters                The iteration cap of the 3D iterative solve.
    """

    def __init__(self, dt, scheme="crank_nicolson", linear_solve_tol=1e-12, max_linear_iters=1000):
        gv.valid_float(dt, lower=0.0, lower_open=True, var_name="dt", error_class=ConfigurationError)
        gv.valid_value(scheme, valid_values=["crank_nicolson"], var_name="scheme",
                       error_class=ConfigurationError)
        gv.valid_float(linear_solve_tol, lower=0.0, lower_open=True, var_name="linear_solve_tol",
                       error_class=ConfigurationError)
        gv.valid_integer(max_linear_iters, lower=1, var_name="max_linear_iters",
                         error_class=ConfigurationError)
        self.dt = float(dt)
        self.scheme = scheme
        self.linear_solve_tol = float(linear_solve_tol)
        self.max_linear_iters = int(max_linear_iters)

    def with_dt(self, dt):
        return PropagatorConfig(dt, self.scheme, self.linear_solve_tol, self.max_linear_iters)

    def as_dict(self):
        return collections.OrderedDict([("dt", self.dt), ("scheme", self.scheme),
                                        ("linear_solve_tol", self.linear_solve_tol),
                                        ("max_linear_iters", self.max_linear_iters)])


def window_steps(window, dt):
    r"""
    Return the number of steps of size dt covering the window.  dt must divide the window length to
    relative 1e-12.

    Description of argument(s):
    window                          A (t_start, t_end) pair.
    dt                              The time step.
    """

    length = float(window[1]) - float(window[0])
    if length < 0:
        raise ConfigurationError("The window " + repr(tuple(window)) + " is reversed.")
    if length == 0.0:
        return 0
    n_steps = int(round(length / dt))
    if n_steps < 1 or abs(n_steps * dt - length) > ds.knot_tolerance * length:
        raise ConfigurationError("The time step " + repr(dt) + " does not divide the window length "
                                 + repr(length) + ".")
    return n_steps


def window_knots(window, dt):
    return ds.uniform_knots(window[1], window_steps(window, dt), window[0])


def cayley_factor(energy, dt, hbar=1.0):
    r"""
    Return the one-step Crank-Nicolson multiplier (1 - i tau E)/(1 + i tau E) of an eigenstate with energy E.
    """

    tau = dt / (2.0 * hbar)
    return (1.0 - 1j * tau * energy) / (1.0 + 1j * tau * energy)


def apply_hamiltonian(grid, values, v, hbar, mass):
    r"""
    Return H values with H = -hbar**2/(2 mass) laplacian + v, for values shaped (...,) + grid.shape.
    """

    return -(hbar ** 2 / (2.0 * mass)) * ds.laplacian_values(grid, values) + v * values


def _solve_banded(grid, rhs, v, tau, hbar, mass):
    kinetic = hbar ** 2 / (mass * grid.spacing ** 2)
    n = grid.points_per_axis
    bands = np.zeros((3, n), dtype=complex)
    bands[0, 1:] = 1j * tau * (-0.5 * kinetic)
    bands[1, :] = 1.0 + 1j * tau * (kinetic + v)
    bands[2, :-1] = 1j * tau * (-0.5 * kinetic)
    return linalg.solve_banded((1, 1), bands, rhs.T, check_finite=False).T


def _solve_iterative(grid, rhs, guess, v, tau, hbar, mass, cfg):
    hamiltonian = -(hbar ** 2 / (2.0 * mass)) * ds.laplacian_matrix(grid) + sparse.diags(v.ravel())
    matrix = (sparse.identity(grid.size, format="csr") + 1j * tau * hamiltonian).tocsr()
    result = np.empty_like(rhs)
    for ix in range(rhs.shape[0]):
        b = rhs[ix].ravel()
        x, info = sparse_linalg.bicgstab(matrix, b, x0=guess[ix].ravel(), rtol=cfg.linear_solve_tol, atol=0.0,
                                         maxiter=cfg.max_linear_iters)
        if info != 0:
            residual = float(np.linalg.norm(matrix @ x - b) / max(np.linalg.norm(b), 1e-300))
            raise LinearSolveError("The Crank-Nicolson linear solve did not converge (info=" + str(info)
                                   + ").", residual=residual)
        result[ix] = x.reshape(grid.shape)
    return result


def cn_step_values(grid, values, v_half, dt, hbar, mass, cfg=None, source=None):
    r"""
    Return the Crank-Nicolson step of orbital values (shape (N,) + grid.shape).

    With a source f the step solves (I + i tau H) psi+ = (I - i tau H) psi - (i dt / hbar) f, the
    discretization of i hbar d(psi)/dt = H psi + f.

    Description of argument(s):
    grid                            The Grid.
    values                          The orbital values.
    v_half                          The real potential at the step midpoint (shape grid.shape).
    dt                              The time step.
    hbar                            The reduced Planck constant.
    mass                            The effective mass.
    cfg                             A PropagatorConfig (needed in 3D).
    source                          Optional step source with the shape of values.
    """

    if dt == 0.0:
        return values.copy()
    tau = dt / (2.0 * hbar)
    rhs = values - 1j * tau * apply_hamiltonian(grid, values, v_half, hbar, mass)
    if source is not None:
        rhs = rhs - (1j * dt / hbar) * source
    if grid.dim == 1:
        return _solve_banded(grid, rhs, v_half, tau, hbar, mass)
    return _solve_iterative(grid, rhs, values, v_half, tau, hbar, mass, cfg or PropagatorConfig(dt))


def step(state, v_half, dt, hbar=1.0, mass=1.0, cfg=None):
    r"""
    Return the OrbitalSet after one Crank-Nicolson step under the midpoint potential v_half.
    """

    ds.check_values_shape(state.grid, np.asarray(v_half), 0, var_name="v_half")
    return ds.OrbitalSet(state.grid, cn_step_values(state.grid, state.values, np.asarray(v_half, dtype=float),
                                                    dt, hbar, mass, cfg))


def propagate_on_knots(psi0, potential_path, time_knots, cfg):
    r"""
    Propagate psi0 across the given uniform knots, sampling the potential path at every step midpoint.

    Description of argument(s):
    psi0                            The OrbitalSet at time_knots[0].
    potential_path                  A potentials.PotentialPath covering the knots.
    time_knots                      The output knots.
    cfg                             A PropagatorConfig.
    """

    model = potential_path.model
    values = np.empty((len(time_knots),) + psi0.values.shape, dtype=complex)
    values[0] = psi0.values
    for k in range(len(time_knots) - 1):
        t_mid = 0.5 * (time_knots[k] + time_knots[k + 1])
        values[k + 1] = cn_step_values(psi0.grid, values[k], potential_path.at(t_mid),
                                       time_knots[k + 1] - time_knots[k], model.hbar, model.mass, cfg)
    return ds.Trajectory(psi0.grid, time_knots, values)


def propagate(psi0, rho_path, window, cfg, model):
    r"""
    Return the trajectory U^rho(t, window[0]) psi0 on every knot of the window.

    Description of argument(s):
    psi0                            The OrbitalSet at window[0].
    rho_path                        The frozen DensityPath covering the window, or None for the zero-charge
                                    reference (rho = 0).
    window                          A (t_start, t_end) pair.
    cfg                             A PropagatorConfig.
    model                           A potentials.PotentialModel.
    """

    ds.same_grid(psi0.grid, model.grid)
    time_knots = window_knots(window, cfg.dt)
    potential_path = zero_charge_path(model, time_knots) if rho_path is None \
        else pt.PotentialPath(model, rho_path)
    gp.dprint_var(time_knots.size)
    return propagate_on_knots(psi0, potential_path, time_knots, cfg)


def zero_charge_path(model, time_knots):
    r"""
    Return the PotentialPath of the zero density (rho = 0) on the knots.
    """

    return pt.PotentialPath(model, ds.DensityPath.zeros(model.grid, time_knots))


def fixed_point_map(k_input, psi0, cfg, model):
    r"""
    Return K(k_input): psi0 propagated under the density |k_input|**2 on the knots of k_input.
    """

    potential_path = pt.PotentialPath(model, k_input.density_path())
    return propagate_on_knots(psi0, potential_path, k_input.time_knots, cfg)


def step_source_from_knots(source):
    r"""
    Return the per-step source values (f_k + f_{k+1})/2 from knot values.
    """

    return 0.5 * (source[1:] + source[:-1])


def propagate_inhomogeneous(source, rho_path, window, cfg, model, kind="knots", time_knots=None,
                            potential_path=None):
    r"""
    Return eta solving i hbar d(eta)/dt = H(rho) eta + f, eta(window[0]) = 0, i.e. the Duhamel integral
    eta(t) = -(i/hbar) int U^rho(t, s) f(s) ds.

    Description of argument(s):
    source                          The source values.  kind "knots": shape (n_knots, N) + grid.shape,
                                    inserted with trapezoidal weights.  kind "steps": shape
                                    (n_steps, N) + grid.shape, one value per step inserted at its midpoint.
    rho_path                        The frozen DensityPath (None selects rho = 0).
    window                          A (t_start, t_end) pair.
    cfg                             A PropagatorConfig.
    model                           A potentials.PotentialModel.
    kind                            "knots" or "steps".
    time_knots                      Optional explicit knots (overrides window).
    potential_path                  Optional precomputed PotentialPath for rho_path.
    """

    gv.valid_value(kind, valid_values=["knots", "steps"], var_name="kind")
    grid = model.grid
    if time_knots is None:
        time_knots = window_knots(window, cfg.dt)
    n_steps = len(time_knots) - 1
    source = np.asarray(source, dtype=complex)
    expected_rows = n_steps + 1 if kind == "knots" else n_steps
    if source.shape[0] != expected_rows:
        raise ConfigurationError("The source has " + str(source.shape[0]) + " rows; " + str(expected_rows)
                                 + " are needed for kind \"" + kind + "\".")
    ds.check_values_shape(grid, source, 2, var_name="source")
    step_source = step_source_from_knots(source) if kind == "knots" else source
    if potential_path is None:
        if rho_path is None:
            rho_path = ds.DensityPath.zeros(grid, time_knots)
        potential_path = pt.PotentialPath(model, rho_path)
    values = np.zeros((n_steps + 1,) + source.shape[1:], dtype=complex)
    for k in range(n_steps):
        t_mid = 0.5 * (time_knots[k] + time_knots[k + 1])
        values[k + 1] = cn_step_values(grid, values[k], potential_path.at(t_mid),
                                       time_knots[k + 1] - time_knots[k], model.hbar, model.mass, cfg,
                                       source=step_source[k])
    return ds.Trajectory(grid, time_knots, values)


def l2_drift(trajectory):
    r"""
    Return the maximum relative change of each orbital's L2 norm over the knots.
    """

    grid = trajectory.grid
    norms = np.sqrt(grid.cell_volume * np.sum(np.abs(trajectory.values) ** 2, axis=grid.spatial_axes))
    initial = np.where(norms[0] > 0, norms[0], 1.0)
    return float(np.max(np.abs(norms - norms[0]) / initial))


def _step_range(values, potential_path, time_knots, first, last, cfg, adjoint=False):
    model = potential_path.model
    grid = model.grid
    indices = range(first, last) if not adjoint else reversed(range(first, last))
    for k in indices:
        t_mid = 0.5 * (time_knots[k] + time_knots[k + 1])
        dt = time_knots[k + 1] - time_knots[k]
        values = cn_step_values(grid, values, potential_path.at(t_mid), -dt if adjoint else dt, model.hbar,
                                model.mass, cfg)
    return values


def propagator_h10_norm(potential_path, time_knots, first, last, cfg, rng, n_iterations=20):
    r"""
    Estimate the H10 operator norm of the discrete propagator from time_knots[first] to time_knots[last] by
    power iteration on U^* G U with G = I - laplacian (the H10 Gram operator), and return the estimate.

    The adjoint of a Crank-Nicolson step is the same step with -dt, so U^* is the reversed sweep.

    Description of argument(s):
    potential_path                  A potentials.PotentialPath covering the knots.
    time_knots                      The knots.
    first                           The index of the start knot.
    last                            The index of the end knot (> first).
    cfg                             A PropagatorConfig.
    rng                             A numpy Generator for the starting field.
    n_iterations                    The number of power iterations.
    """

    grid = potential_path.model.grid
    solve = ds.helmholtz_factor(grid)

    def gram_inverse(values):
        flat = values.reshape(grid.size)
        return (solve(flat.real) + 1j * solve(flat.imag)).reshape(values.shape)

    x = ds.random_smooth_field(grid, rng)[np.newaxis]
    x = x / ds.h10_norm_values(grid, x)
    estimate = 0.0
    for ix in range(n_iterations):
        ux = _step_range(x, potential_path, time_knots, first, last, cfg)
        estimate = ds.h10_norm_values(grid, ux)
        gux = ux - ds.laplacian_values(grid, ux)
        y = _step_range(gux, potential_path, time_knots, first, last, cfg, adjoint=True)
        x = gram_inverse(y[0])[np.newaxis]
        x = x / ds.h10_norm_values(grid, x)
    return estimate
