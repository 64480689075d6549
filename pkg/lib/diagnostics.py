#!/usr/bin/env python

r"""
This module provides the checks of the identities and inequalities behind the solvers: the energy functional
and its balance law, the Duhamel difference identity, the Hartree product and Lipschitz inequalities, the
finite-difference derivative checks and convergence-order fits.

Checks which compare two sides return them both so that a failure can be attributed quantitatively.
"""

import collections

import numpy as np

import gen_print as gp
import discrete_space as ds
import potentials as pt
import evolution as ev
import newton_exact as ne
from solver_errors import DiagnosticError

default_seed = 0x5EED

# Step-size ladders for the finite-difference derivative check, largest step first.
fd_ladders = collections.OrderedDict([("fine", (1e-4, 1e-5, 1e-6)), ("coarse", (1e-1, 1e-2, 1e-3))])


class CheckResult(object):
    r"""
    One line of the check report.

    Description of argument(s):
    name                            The check name.
    lhs                             The measured side.
    rhs                             The bound (or tolerance) it is compared against.
    passed                          The outcome.  Defaults to lhs <= rhs.
    mode                            The constants mode the check used ("analytic", "empirical" or "-").
    asserted                        False for report-only diagnostics, which never fail a run.
    note                            Free text.
    """

    def __init__(self, name, lhs, rhs, passed=None, mode="-", asserted=True, note=""):
        self.name = name
        self.lhs = float(lhs)
        self.rhs = float(rhs)
        self.passed = bool(self.lhs <= self.rhs) if passed is None else bool(passed)
        self.mode = mode
        self.asserted = asserted
        self.note = note

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def failed(self):
        return self.asserted and not self.passed

    def as_dict(self):
        return collections.OrderedDict([("name", self.name), ("mode", self.mode), ("lhs", self.lhs),
                                        ("rhs", self.rhs), ("margin", self.margin), ("pass", self.passed),
                                        ("asserted", self.asserted), ("note", self.note)])

    def __repr__(self):
        return "CheckResult(" + self.name + ", lhs=" + repr(self.lhs) + ", rhs=" + repr(self.rhs) \
            + ", pass=" + str(self.passed) + ")"


# Energy.

def _energy_terms(grid, values, hartree_field, v, phi, hbar, mass):
    rho = ds.density_values(values)
    kinetic = hbar ** 2 / (4.0 * mass) * ds.gradient_norm_squared(grid, values)
    script = kinetic + grid.cell_volume * np.sum((0.25 * hartree_field + 0.5 * (v + phi)) * rho)
    physical = 2.0 * script + 0.5 * grid.cell_volume * np.sum(hartree_field * rho)
    return float(script), float(physical)


def energy(state, t, rho_path, model):
    r"""
    Return (script_E, physical_E) of a state at time t:

    script_E = int hbar**2/(4m) |grad Psi|**2 + (1/4 (W*rho) + 1/2 (V + Phi)) rho
    physical_E = 2 script_E + 1/2 <(W*rho) rho>

    Description of argument(s):
    state                           The OrbitalSet at time t.
    t                               The time.
    rho_path                        The density path supplying the Phi history (ignored without XC).
    model                           A potentials.PotentialModel.
    """

    grid = model.grid
    rho = ds.density_values(state.values)
    hartree_field = model.hartree(rho) if model.hartree_enabled else np.zeros(grid.shape)
    phi = model.xc_phi(rho_path, t) if model.xc is not None else np.zeros(grid.shape)
    return _energy_terms(grid, state.values, hartree_field, model.external.values(t), phi, model.hbar,
                         model.mass)


def energy_path(trajectory, model):
    r"""
    Return the array of script_E on every knot of the trajectory, using its own density path.
    """

    grid = model.grid
    rho_path = trajectory.density_path()
    path = pt.PotentialPath(model, rho_path, include_external=False)
    result = np.empty(trajectory.n_knots)
    for k, t in enumerate(trajectory.time_knots):
        hartree_field = path.hartree_knots[k] if path.hartree_knots is not None else np.zeros(grid.shape)
        phi = path.xc_knots[k] if path.xc_knots is not None else np.zeros(grid.shape)
        result[k] = _energy_terms(grid, trajectory.values[k], hartree_field, model.external.values(t), phi,
                                  model.hbar, model.mass)[0]
    return result


def energy_identity_residual(trajectory, model):
    r"""
    Return, per knot, script_E(t) - script_E(0) - 1/2 int_0^t int (dV/ds + phi) rho, the time integral taken
    with the trapezoid rule on the knots.  dV/ds comes from the external family's analytic derivative.
    """

    grid = model.grid
    rho_path = trajectory.density_path()
    energies = energy_path(trajectory, model)
    rates = np.empty(trajectory.n_knots)
    path = pt.PotentialPath(model, rho_path, include_external=False, include_hartree=False)
    for k, t in enumerate(trajectory.time_knots):
        integrand = model.external.time_derivative(t)
        if path.rate_knots is not None:
            integrand = integrand + path.rate_knots[k]
        rates[k] = grid.cell_volume * np.sum(integrand * rho_path.values[k])
    work = np.concatenate([[0.0], np.cumsum(0.5 * trajectory.dt * (rates[1:] + rates[:-1]))])
    return energies - energies[0] - 0.5 * work


# Identities.

def duhamel_identity_residual(psi0, rho1_path, rho2_path, t, cfg, model):
    r"""
    Return the sup_norm of lhs - rhs for the difference identity on [0, t]:

    lhs = U^rho1 Psi0 - U^rho2 Psi0
    rhs = the solution of i hbar eta' = H(rho1) eta + [V_e(rho1) - V_e(rho2)] U^rho2 Psi0, eta(0) = 0

    The source is sampled on the knots and inserted with trapezoidal weights, so the residual is O(dt**2).

    Description of argument(s):
    psi0                            The initial OrbitalSet.
    rho1_path                       The first DensityPath.
    rho2_path                       The second DensityPath (same knots).
    t                               The end of the window.
    cfg                             An evolution.PropagatorConfig.
    model                           A potentials.PotentialModel.
    """

    window = (0.0, t)
    knots = ev.window_knots(window, cfg.dt)
    path1 = pt.PotentialPath(model, rho1_path)
    path2 = pt.PotentialPath(model, rho2_path)
    psi1 = ev.propagate_on_knots(psi0, path1, knots, cfg)
    psi2 = ev.propagate_on_knots(psi0, path2, knots, cfg)
    source = np.array([(path1.at(s) - path2.at(s)) * psi2.values[k] for k, s in enumerate(knots)])
    eta = ev.propagate_inhomogeneous(source, rho1_path, window, cfg, model, time_knots=knots,
                                     potential_path=path1)
    return ds.sup_norm((psi1 - psi2) - eta)


def breathing_density_path(grid, time_knots, center, width, amplitude=0.2, frequency=2.0, total_charge=1.0):
    r"""
    Return a smooth density path: a Gaussian of the given total charge whose width oscillates as
    width (1 + amplitude sin(frequency t)).
    """

    def density(t):
        current = width * (1.0 + amplitude * np.sin(frequency * t))
        field = np.exp(-grid.squared_distance(center) / (2.0 * current ** 2))
        return total_charge * field / (grid.cell_volume * np.sum(field))

    return ds.DensityPath.from_function(grid, time_knots, density)


def refinement_ratio(coarse, fine):
    r"""
    Return coarse / fine, the error reduction of one refinement.
    """

    if fine == 0.0:
        return np.inf if coarse > 0.0 else 1.0
    return coarse / fine


def refinement_study(residual_function, dt, levels=3):
    r"""
    Evaluate residual_function(dt / 2**j) for j = 0..levels-1 and return (residuals, ratios).
    """

    residuals = [float(residual_function(dt / 2.0 ** j)) for j in range(levels)]
    ratios = [refinement_ratio(residuals[j], residuals[j + 1]) for j in range(levels - 1)]
    gp.dprint_var(residuals)
    return residuals, ratios


# Inequality audits.

def product_constant(model, bundle):
    r"""
    Return the constant C with ||(W*(fg)) psi||_H10 <= C ||f|| ||g|| ||psi||:
    ||W||_l2 E3**2 + E1**3 ||grad W||_l1.
    """

    if not model.hartree_enabled:
        return 0.0
    return model.hartree_kernel.product_constant(bundle.E1, bundle.E3)


def pairing(f_values, g_values):
    r"""
    Return sum_j conj(f_j) g_j.
    """

    return np.sum(np.conj(f_values) * g_values, axis=0)


def multiplied_h10_norm(grid, field, psi_values):
    return ds.h10_norm_values(grid, field * psi_values)


def hartree_product_bound_check(f, g, psi, model, bundle):
    r"""
    Return (lhs, rhs, pass) for ||(W*(fg)) psi||_H10 <= C ||f||_H10 ||g||_H10 ||psi||_H10.

    Description of argument(s):
    f, g, psi                       OrbitalSets on the model grid.  fg is the pairing sum_j conj(f_j) g_j.
    model                           A potentials.PotentialModel.
    bundle                          A constants bundle supplying E1 and E3.
    """

    if not model.hartree_enabled:
        return 0.0, 0.0, True
    field = model.hartree_kernel.convolve(pairing(f.values, g.values))
    lhs = multiplied_h10_norm(model.grid, field, psi.values)
    rhs = product_constant(model, bundle) * ds.norm(f) * ds.norm(g) * ds.norm(psi)
    return lhs, rhs, lhs <= rhs


def hartree_lipschitz_check(psi1, psi2, direction, model, bundle):
    r"""
    Return (lhs, rhs, pass) for the Hartree Lipschitz inequality

    ||(W*(rho1 - rho2)) psi|| <= C ||Psi1 - Psi2|| (||Psi1|| + ||Psi2||) ||psi||

    using the factorization rho1 - rho2 = Re sum_j conj(psi1_j - psi2_j)(psi1_j + psi2_j).
    """

    if not model.hartree_enabled:
        return 0.0, 0.0, True
    grid = model.grid
    difference = ds.density_values(psi1.values) - ds.density_values(psi2.values)
    lhs = multiplied_h10_norm(grid, model.hartree(difference), direction.values)
    distance = ds.h10_norm_values(grid, psi1.values - psi2.values)
    rhs = product_constant(model, bundle) * distance * (ds.norm(psi1) + ds.norm(psi2)) * ds.norm(direction)
    return lhs, rhs, lhs <= rhs


def potential_difference_norm(psi1_traj, psi2_traj, psi, model):
    r"""
    Return max_k ||[V_e(t_k, rho1) - V_e(t_k, rho2)] psi||_H10 for the densities of two trajectories.
    """

    grid = model.grid
    path1 = pt.PotentialPath(model, psi1_traj.density_path(), include_external=False)
    path2 = pt.PotentialPath(model, psi2_traj.density_path(), include_external=False)
    return max(multiplied_h10_norm(grid, path1.knot(k) - path2.knot(k), psi.values)
               for k in range(psi1_traj.n_knots))


def potential_lipschitz_check(psi1_traj, psi2_traj, psi, model, bundle):
    r"""
    Return (lhs, rhs, pass, pair_rhs) for the Lipschitz condition of the effective potential

    max_k ||[V_e(t_k, rho1) - V_e(t_k, rho2)] psi||_H10 <= C sup_norm(Psi1 - Psi2) ||psi||_H10

    with C the bundle's Lipschitz constant on the ball.  pair_rhs replaces C by the pair-dependent
    C0_pair (sup_norm(Psi1) + sup_norm(Psi2)), C0_pair the product constant plus the XC derivative bound.
    """

    if not model.coupled:
        return 0.0, 0.0, True, 0.0
    lhs = potential_difference_norm(psi1_traj, psi2_traj, psi, model)
    pair_constant = product_constant(model, bundle)
    if model.xc is not None:
        window_length = psi1_traj.window[1] - psi1_traj.window[0]
        pair_constant += model.xc.deriv_bound(bundle.E1, bundle.E3, window_length)
    distance = ds.sup_norm(psi1_traj - psi2_traj) * ds.norm(psi)
    rhs = bundle.C * distance
    pair_rhs = pair_constant * (ds.sup_norm(psi1_traj) + ds.sup_norm(psi2_traj)) * distance
    return lhs, rhs, lhs <= rhs, pair_rhs


def xc_derivative_bound_check(f, g, psi, time_knots, model, bundle):
    r"""
    Return (lhs, rhs, pass) for ||(dPhi/drho[Re(conj f g)]) psi||_H10 <= C_xc ||f|| ||g|| ||psi||, the
    increment held constant on the knots and the lhs maximized over them.
    """

    if model.xc is None:
        return 0.0, 0.0, True
    grid = model.grid
    increment = np.real(pairing(f.values, g.values))
    product_path = np.broadcast_to(increment, (len(time_knots),) + grid.shape)
    base_path = ds.DensityPath.zeros(grid, time_knots)
    fields = model.xc_derivative_apply(base_path, product_path)
    lhs = max(multiplied_h10_norm(grid, field, psi.values) for field in fields)
    window_length = time_knots[-1] - time_knots[0]
    rhs = model.xc.deriv_bound(bundle.E1, bundle.E3, window_length) * ds.norm(f) * ds.norm(g) * ds.norm(psi)
    return lhs, rhs, lhs <= rhs


def hartree_young_check(rho_values, model):
    r"""
    Return (lhs, rhs, pass) for max |W*rho| <= ||W||_l2 ||rho||_l2.
    """

    lhs = float(np.max(np.abs(model.hartree(rho_values))))
    rhs = model.hartree_kernel.l2_norm() * ds.l2_norm_values(model.grid, rho_values)
    return lhs, rhs, lhs <= rhs


def hartree_gradient_check(f, g, model, bundle):
    r"""
    Return (lhs, rhs, pass) for sum_a ||D_a (W*(fg))||_L3 <= ||grad W||_L1 E1**2 ||f|| ||g||.
    """

    if not model.hartree_enabled:
        return 0.0, 0.0, True
    grid = model.grid
    field = model.hartree_kernel.convolve(pairing(f.values, g.values))
    lhs = sum(ds.lp_norm_values(grid, np.diff(field, axis=axis) / grid.spacing, 3)
              for axis in range(grid.dim))
    rhs = model.hartree_kernel.gradient_l1_norm() * bundle.E1 ** 2 * ds.norm(f) * ds.norm(g)
    return lhs, rhs, lhs <= rhs


def embedding_audit(grid, constants, rng, n_states=1000):
    r"""
    Return an OrderedDict mapping each exponent (6, 3, 4) to (max_ratio, constant, pass) for
    ||f||_Lp <= E ||f||_H10 over n_states random states.

    Description of argument(s):
    grid                            The Grid.
    constants                       The (E1, E2, E3) triple.
    rng                             A numpy Generator.
    n_states                        The number of random states.
    """

    exponents = (6, 3, 4)
    ratios = dict((p, 0.0) for p in exponents)
    for ix in range(n_states):
        field = ds.random_smooth_field(grid, rng, n_modes=int(rng.integers(1, 12)),
                                       decay=rng.uniform(0.0, 2.0))
        h10 = ds.h10_norm_values(grid, field)
        for p in exponents:
            ratios[p] = max(ratios[p], ds.lp_norm_values(grid, field, p) / h10)
    result = collections.OrderedDict()
    for p, constant in zip(exponents, constants):
        result[p] = (ratios[p], constant, ratios[p] <= constant)
    return result


def zero_force(trajectory, model):
    r"""
    Return, per knot, the vector integral of rho grad(Phi) (shape (n_knots, dim)).  The built-in XC model
    does not guarantee that it vanishes, so this is reported and never asserted.
    """

    grid = model.grid
    result = np.zeros((trajectory.n_knots, grid.dim))
    if model.xc is None:
        return result
    rho_path = trajectory.density_path()
    xc_knots = pt.PotentialPath(model, rho_path, include_external=False, include_hartree=False).xc_knots
    for k in range(trajectory.n_knots):
        for axis, gradient in enumerate(ds.edge_gradients(grid, xc_knots[k])):
            centred = 0.5 * (np.take(gradient, range(1, gradient.shape[axis]), axis=axis)
                             + np.take(gradient, range(0, gradient.shape[axis] - 1), axis=axis))
            result[k, axis] = grid.cell_volume * np.sum(rho_path.values[k] * centred)
    return result


# Convergence and derivative checks.

def convergence_order(trace, below=None, floor=None):
    r"""
    Return (order, r_squared): the least-squares slope of log r_{k+1} against log r_k over the residuals
    above the floor.

    Description of argument(s):
    trace                           An IterationTrace or a sequence of residuals.
    below                           Only residuals strictly below this value are used.
    floor                           Residuals below this value are dropped.  Defaults to the trace floor.
    """

    if isinstance(trace, ne.IterationTrace):
        residuals = list(trace.residual_norms)
        floor = trace.floor if floor is None else floor
    else:
        residuals = [float(x) for x in trace]
    floor = floor or 0.0
    residuals = [r for r in residuals if r > floor and r > 0.0]
    if below is not None:
        residuals = [r for r in residuals if r < below]
    if len(residuals) < 3:
        raise DiagnosticError("A convergence-order fit needs at least 3 residuals above the floor; "
                              + str(len(residuals)) + " are available.")
    x = np.log(residuals[:-1])
    y = np.log(residuals[1:])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    total = np.sum((y - np.mean(y)) ** 2)
    r_squared = 1.0 - np.sum((y - fitted) ** 2) / total if total > 0 else 1.0
    return float(slope), float(r_squared)


def roundoff_cut(epsilons, errors):
    r"""
    Return the leading (epsilon, error) pairs over which the error keeps decreasing as epsilon decreases.
    """

    kept = [(epsilons[0], errors[0])]
    for eps, error in zip(epsilons[1:], errors[1:]):
        if error >= kept[-1][1] or error == 0.0:
            break
        kept.append((eps, error))
    return kept


def gateaux_fd_check(base, omega, psi0, model, cfg, epsilons=fd_ladders["fine"], one_sided=False):
    r"""
    Compare finite-difference quotients of K with K'(base)[omega] and return an OrderedDict with the
    per-epsilon relative errors and the fitted log-log slope (about 2 for central differences, 1 for
    one-sided ones).

    Description of argument(s):
    base                            The base Trajectory.
    omega                           The direction.
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    cfg                             An evolution.PropagatorConfig.
    epsilons                        The decreasing step sizes.  Steps past the roundoff floor are dropped
                                    from the slope fit (see roundoff_cut).
    one_sided                       Use (K(base + eps omega) - K(base)) / eps.
    """

    k_base = ev.fixed_point_map(base, psi0, cfg, model)
    derivative = ne.kprime_apply(base, omega, psi0, model, cfg, k_base=k_base)
    scale = max(ds.sup_norm(derivative), 1e-300)
    errors = []
    for eps in epsilons:
        plus = ev.fixed_point_map(base + eps * omega, psi0, cfg, model)
        if one_sided:
            quotient = (plus - k_base) * (1.0 / eps)
        else:
            minus = ev.fixed_point_map(base - eps * omega, psi0, cfg, model)
            quotient = (plus - minus) * (0.5 / eps)
        errors.append(ds.sup_norm(quotient - derivative) / scale)
    result = collections.OrderedDict()
    result["epsilons"] = list(epsilons)
    result["relative_errors"] = errors
    kept = roundoff_cut(list(epsilons), errors)
    if len(kept) >= 2:
        result["slope"] = float(np.polyfit(np.log([k[0] for k in kept]), np.log([k[1] for k in kept]), 1)[0])
    else:
        result["slope"] = None
    return result


def real_basis_trajectories(template):
    r"""
    Yield, for every real coordinate of the trajectory space, the unit trajectory along it (real part
    first, then imaginary part).
    """

    size = template.values.size
    for ix in range(2 * size):
        values = np.zeros(size, dtype=complex)
        values[ix % size] = 1.0 if ix < size else 1j
        yield template.like(values.reshape(template.values.shape))


def real_coordinates(trajectory):
    flat = trajectory.values.ravel()
    return np.concatenate([flat.real, flat.imag])


def dense_linearization_check(base, psi0, model, cfg, eps=1e-6):
    r"""
    Assemble the Jacobian of K at base (as a real matrix) twice: from central finite differences column by
    column, and from kprime_apply on the basis.  Return the relative Frobenius difference.  Only suitable for
    tiny grids.
    """

    linearization = ne.Linearization(base, psi0, model, cfg)
    fd_columns = []
    derivative_columns = []
    for direction in real_basis_trajectories(base):
        plus = ev.fixed_point_map(base + eps * direction, psi0, cfg, model)
        minus = ev.fixed_point_map(base - eps * direction, psi0, cfg, model)
        fd_columns.append(real_coordinates((plus - minus) * (0.5 / eps)))
        derivative_columns.append(real_coordinates(linearization.apply(direction)))
    fd_matrix = np.array(fd_columns).T
    derivative_matrix = np.array(derivative_columns).T
    scale = np.linalg.norm(derivative_matrix)
    difference = np.linalg.norm(fd_matrix - derivative_matrix)
    if scale == 0.0:
        return float(difference)
    return float(difference / scale)


def sa_bound_check(iterates, fixed_point, q):
    r"""
    Return a list of (measured, bound) pairs for the successive-approximation estimate
    ||Psi_n - Psi_fix|| <= q**n / (1 - q) ||Psi_1 - Psi_0||.
    """

    first_step = ds.sup_norm(iterates[1] - iterates[0])
    return [(ds.sup_norm(iterate - fixed_point), q ** n / (1.0 - q) * first_step)
            for n, iterate in enumerate(iterates)]


def uniform_bound_check(model, window, cfg, bundle, rng, n_iterations=30):
    r"""
    Return (lhs, rhs, pass) comparing the measured H10 norm of the zero-charge propagator over the whole
    window with the bundle's uniform bound.
    """

    time_knots = ev.window_knots(window, cfg.dt)
    path = ev.zero_charge_path(model, time_knots)
    lhs = ev.propagator_h10_norm(path, time_knots, 0, len(time_knots) - 1, cfg, rng, n_iterations) \
        if len(time_knots) > 1 else 1.0
    return lhs, bundle.U_bound, lhs <= bundle.U_bound
