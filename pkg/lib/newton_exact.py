#!/usr/bin/env python

r"""
This module provides the derivative K'(Psi)[omega] of the fixed-point map, the linearized solve
(I - K'(Psi)) psi = f, the Kantorovich parameters (kappa, sigma) and the exact Newton driver for
S(u) = u - K(u) = 0.

All distances are sup_norm (the maximum over knots of the H10 norm).
"""

import time
import collections

import numpy as np

import gen_print as gp
import gen_valid as gv
import discrete_space as ds
import potentials as pt
import evolution as ev
from solver_errors import ConfigurationError, ConsistencyError, NonConvergenceError, WindowTooLongError

trace_columns = ["iter", "residual", "step_norm", "kantwo_lhs", "kantwo_rhs", "neumann_n", "defect_measured",
                 "M_times_residual"]


class IterationTrace(object):
    r"""
    The per-iterate record of an outer iteration.

    Every list has one entry per recorded iterate.  Entries that do not apply to a solver are None (written
    as empty CSV fields).  Wall times are kept for the report only.

    Description of argument(s):
    solver                          The solver name ("picard", "newton", "approx_newton").
    """

    def __init__(self, solver):
        self.solver = solver
        self.residual_norms = []
        self.step_norms = []
        self.neumann_orders = []
        self.wall_times = []
        self.kanone_lhs = []
        self.kanone_rhs = []
        self.kantwo_lhs = []
        self.kantwo_rhs = []
        self.defect_measured = []
        self.m_times_residual = []
        self.inner_iterations = []
        self.converged = False
        self.floor = 0.0
        self.info = collections.OrderedDict()
        self._start_time = time.time()

    def record(self, residual, step_norm=None, neumann_order=0, kanone=(None, None), kantwo=(None, None),
               defect=None, m_times_residual=None, inner_iterations=0):
        r"""
        Append one iterate.

        Description of argument(s):
        residual                        sup_norm(S(u_k)).
        step_norm                       sup_norm(u_k - u_{k-1}).
        neumann_order                   The truncation order used (0 for exact solves).
        kanone                          The (lhs, rhs) pair of the step-size inequality.
        kantwo                          The (lhs, rhs) pair of the quadratic residual inequality.
        defect                          The measured approximate-inverse defect.
        m_times_residual                M times the previous residual.
        inner_iterations                The number of derivative applications made for this iterate.
        """

        residual = float(residual)
        if not np.isfinite(residual):
            raise NonConvergenceError("The " + self.solver + " residual is not finite.", trace=self)
        self.residual_norms.append(residual)
        self.step_norms.append(step_norm)
        self.neumann_orders.append(int(neumann_order))
        self.wall_times.append(time.time() - self._start_time)
        self.kanone_lhs.append(kanone[0])
        self.kanone_rhs.append(kanone[1])
        self.kantwo_lhs.append(kantwo[0])
        self.kantwo_rhs.append(kantwo[1])
        self.defect_measured.append(defect)
        self.m_times_residual.append(m_times_residual)
        self.inner_iterations.append(int(inner_iterations))
        gp.dprint_varx(self.solver + "_residual_" + str(len(self.residual_norms) - 1), residual)

    @property
    def n_iterations(self):
        if self.solver == "picard":
            return len(self.residual_norms)
        return max(len(self.residual_norms) - 1, 0)

    @property
    def total_inner_iterations(self):
        return int(sum(self.inner_iterations))

    def final_residual(self):
        return self.residual_norms[-1] if self.residual_norms else None

    def pre_floor_residuals(self):
        return [r for r in self.residual_norms if r >= self.floor]

    def kanone_holds(self):
        return all(lhs is None or lhs <= rhs for lhs, rhs in zip(self.kanone_lhs, self.kanone_rhs))

    def kantwo_holds(self):
        return all(lhs is None or lhs <= rhs or lhs < self.floor
                   for lhs, rhs in zip(self.kantwo_lhs, self.kantwo_rhs))

    def rows(self):
        r"""
        Return the CSV rows (trace_columns order).  Floats are written with repr.
        """

        def cell(value):
            return "" if value is None else repr(float(value)) if isinstance(value, float) else str(value)

        rows = []
        for ix in range(len(self.residual_norms)):
            neumann_n = self.neumann_orders[ix] if self.solver == "approx_newton" else None
            rows.append([str(ix), cell(self.residual_norms[ix]), cell(self.step_norms[ix]),
                         cell(self.kantwo_lhs[ix]), cell(self.kantwo_rhs[ix]), cell(neumann_n),
                         cell(self.defect_measured[ix]), cell(self.m_times_residual[ix])])
        return rows

    def summary(self):
        result = collections.OrderedDict()
        result["converged"] = self.converged
        result["iterations"] = self.n_iterations
        result["final_residual"] = self.final_residual()
        result["floor"] = self.floor
        result["kprime_applications"] = self.total_inner_iterations
        result["wall_time"] = self.wall_times[-1] if self.wall_times else 0.0
        result.update(self.info)
        return result


class NewtonParams(object):
    r"""
    Description of argument(s):
    h                               The Kantorovich quantity h (at most 1/2).
    alpha                           alpha in (0, 1).
    tau                             tau in (0, 1).
    kappa                           kappa (filled in by newton_constants when None).
    sigma                           sigma (filled in by newton_constants when None).
    max_newton_iters                The outer iteration cap.
    linearized_tol                  The sup_norm change at which the linearized fixed-point iteration stops.
    linearized_max_iters            The iteration cap of the linearized solve.
    """

    def __init__(self, h=0.5, alpha=0.5, tau=0.5, kappa=None, sigma=None, max_newton_iters=30,
                 linearized_tol=1e-13, linearized_max_iters=400):
        gv.valid_float(h, lower=0.0, upper=0.5, lower_open=True, var_name="h", error_class=ConfigurationError)
        gv.valid_float(alpha, lower=0.0, upper=1.0, lower_open=True, upper_open=True, var_name="alpha",
                       error_class=ConfigurationError)
        gv.valid_float(tau, lower=0.0, upper=1.0, lower_open=True, upper_open=True, var_name="tau",
                       error_class=ConfigurationError)
        gv.valid_integer(max_newton_iters, lower=1, var_name="max_newton_iters",
                         error_class=ConfigurationError)
        gv.valid_float(linearized_tol, lower=0.0, lower_open=True, var_name="linearized_tol",
                       error_class=ConfigurationError)
        gv.valid_integer(linearized_max_iters, lower=1, var_name="linearized_max_iters",
                         error_class=ConfigurationError)
        self.h = float(h)
        self.alpha = float(alpha)
        self.tau = float(tau)
        self.kappa = kappa
        self.sigma = sigma
        self.max_newton_iters = int(max_newton_iters)
        self.linearized_tol = float(linearized_tol)
        self.linearized_max_iters = int(linearized_max_iters)

    @property
    def floor(self):
        r"""
        The residual below which the iteration is reported converged.
        """
        return 10.0 * self.linearized_tol

    def as_dict(self):
        return collections.OrderedDict([("h", self.h), ("alpha", self.alpha), ("tau", self.tau),
                                        ("kappa", self.kappa), ("sigma", self.sigma),
                                        ("max_newton_iters", self.max_newton_iters),
                                        ("linearized_tol", self.linearized_tol),
                                        ("linearized_max_iters", self.linearized_max_iters)])


def pair_density(base_values, omega_values):
    r"""
    Return 2 Re sum_j conj(psi_j) omega_j per knot, the derivative of |Psi|**2 in direction omega.
    """

    return np.sum(2.0 * np.real(np.conj(base_values) * omega_values), axis=1)


class Linearization(object):
    r"""
    The derivative of the discrete map K at a base trajectory.

    K(base) and the base potential path are computed once, so that repeated applications cost one
    inhomogeneous propagation each.  The application is the exact derivative of the discrete map: for the
    step k -> k+1 the source is dv(t_k + dt/2) (Y_k + Y_{k+1})/2, with Y = K(base) and dv the potential
    increment of the density increment 2 Re(conj(base) omega).

    Description of argument(s):
    base                            The base Trajectory.
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    cfg                             An evolution.PropagatorConfig.
    k_base                          Optional precomputed K(base).
    """

    def __init__(self, base, psi0, model, cfg, k_base=None):
        self.base = base
        self.psi0 = psi0
        self.model = model
        self.cfg = cfg
        self.applications = 0
        if not model.coupled:
            self.k_base = k_base
            self.base_path = None
            return
        self.base_path = pt.PotentialPath(model, base.density_path())
        if k_base is None:
            k_base = ev.propagate_on_knots(psi0, self.base_path, base.time_knots, cfg)
        self.k_base = k_base
        self._k_average = 0.5 * (k_base.values[1:] + k_base.values[:-1])

    def apply(self, omega):
        if omega.values.shape != self.base.values.shape:
            raise ConfigurationError("omega does not match the base trajectory.")
        self.applications += 1
        if not self.model.coupled:
            return ds.Trajectory.zeros_like(omega)
        knots = self.base.time_knots
        increment = ds.DensityPath(self.model.grid, knots, pair_density(self.base.values, omega.values))
        increment_path = pt.PotentialPath(self.model, increment, include_external=False)
        midpoints = 0.5 * (knots[1:] + knots[:-1])
        source = np.array([increment_path.at(t) * self._k_average[k] for k, t in enumerate(midpoints)])
        if source.size == 0:
            return ds.Trajectory.zeros_like(omega)
        return ev.propagate_inhomogeneous(source, None, None, self.cfg, self.model, kind="steps",
                                          time_knots=knots, potential_path=self.base_path)


def kprime_apply(base, omega, psi0, model, cfg, k_base=None):
    r"""
    Return K'(base)[omega].

    Description of argument(s):
    base                            The base Trajectory.
    omega                           The direction, a Trajectory on the same knots.
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    cfg                             An evolution.PropagatorConfig.
    k_base                          Optional precomputed K(base).
    """

    return Linearization(base, psi0, model, cfg, k_base).apply(omega)


def kprime_norm_bound(bundle, window_length):
    r"""
    Return the norm estimate (2 C0_eff T / hbar) U**2 ||Psi0||_H10 of K'.
    """

    return 2.0 * bundle.C0_effective * window_length / bundle.hbar * bundle.U_bound ** 2 * bundle.psi0_h10


def newton_residual(u, psi0, model, cfg):
    r"""
    Return (S(u), K(u)) with S(u) = u - K(u).
    """

    k_u = ev.fixed_point_map(u, psi0, cfg, model)
    return u - k_u, k_u


def solve_linearized(linearization, rhs, tol, max_iters=400, kprime_bound=None):
    r"""
    Solve (I - K'(base)) psi = rhs by the fixed-point iteration psi <- K'(base) psi + rhs and return
    (psi, iterations).  The iteration starts from psi = rhs and stops once the sup_norm change is at most
    tol.

    Description of argument(s):
    linearization                   A Linearization at the base trajectory.
    rhs                             The right-hand side Trajectory.
    tol                             The stopping change.
    max_iters                       The iteration cap.
    kprime_bound                    Optional bound on ||K'||.  A bound >= 1 raises WindowTooLongError.
    """

    if kprime_bound is not None and kprime_bound >= 1.0:
        raise WindowTooLongError("The derivative bound " + repr(float(kprime_bound))
                                 + " of K is not below 1 for this window.  Shorten the window.")
    psi = rhs
    changes = []
    for iteration in range(1, max_iters + 1):
        psi_next = linearization.apply(psi) + rhs
        change = ds.sup_norm(psi_next - psi)
        psi = psi_next
        changes.append(change)
        if change <= tol:
            return psi, iteration
        if iteration >= 4 and changes[-1] >= changes[-4] and changes[-1] > changes[0]:
            raise WindowTooLongError("The linearized fixed-point iteration is not contracting (change "
                                     + repr(change) + ").  Shorten the window.")
    raise NonConvergenceError("The linearized solve did not reach tol " + repr(tol) + " in "
                              + str(max_iters) + " iterations (last change " + repr(changes[-1]) + ").")


def newton_constants(c_lip, tau, alpha, h, inverse_norm_at_root):
    r"""
    Return (kappa, sigma):

    kappa = inverse_norm / (1 - tau)
    sigma = max(c kappa**2 / h, c kappa**2 (1 - tau) / (h (1 - alpha) tau))
    """

    kappa = inverse_norm_at_root / (1.0 - tau)
    first = c_lip * kappa ** 2 / h
    second = c_lip * kappa ** 2 * (1.0 - tau) / (h * (1.0 - alpha) * tau)
    return kappa, max(first, second)


def kantorovich_tstar(h, sigma):
    r"""
    Return t* = (1 - sqrt(1 - 2h)) / (h sigma), the radius of the ball that holds the Newton iterates.
    """

    if sigma <= 0:
        return 0.0
    return (1.0 - np.sqrt(1.0 - 2.0 * h)) / (h * sigma)


def kappa_consistent(kappa, alpha, delta, h, sigma):
    r"""
    Return True when kappa <= (1 - alpha) delta / t*.
    """

    t_star = kantorovich_tstar(h, sigma)
    return t_star == 0.0 or kappa <= (1.0 - alpha) * delta / t_star


def r_quadratic_bound(kappa, h, sigma, k):
    r"""
    Return the a priori error bound of the k-th Newton iterate:
    kappa / (h sigma) * (1 - sqrt(1 - 2h))**(2**k) / 2**k.
    """

    if sigma <= 0:
        return 0.0
    return kappa / (h * sigma) * (1.0 - np.sqrt(1.0 - 2.0 * h)) ** (2 ** k) / 2.0 ** k


def random_direction(trajectory, rng, norm_value=1.0):
    return ds.random_trajectory(trajectory.grid, trajectory.time_knots, trajectory.n_orbitals, rng,
                                sup_norm_value=norm_value)


def inverse_norm_estimate(linearization, rng, tol, n_directions=20, safety=1.2, max_iters=400):
    r"""
    Return (estimate, iterations): the maximum of sup_norm((I - K')^-1 f) over n_directions random unit f,
    times safety, and the total number of derivative applications.
    """

    ratio = 0.0
    iterations = 0
    for ix in range(n_directions):
        f = random_direction(linearization.base, rng)
        psi, count = solve_linearized(linearization, f, tol, max_iters)
        iterations += count
        ratio = max(ratio, ds.sup_norm(psi))
    return safety * ratio, iterations


def injectivity_witness(linearization, rng, n_samples=8):
    r"""
    Return the smallest sampled ratio sup_norm((I - K') g) / sup_norm(g) over n_samples random unit g.  A
    bounded inverse with norm at most N requires this to be at least 1 / N.

    Description of argument(s):
    linearization                   The Linearization at the root.
    rng                             A numpy Generator.
    n_samples                       The number of sampled directions.
    """

    ratio = np.inf
    for ix in range(n_samples):
        g = random_direction(linearization.base, rng)
        ratio = min(ratio, ds.sup_norm(g - linearization.apply(g)) / ds.sup_norm(g))
    return ratio


def lipschitz_constant_empirical(base, psi0, model, cfg, rng, spread=0.1, n_pairs=4, n_directions=2,
                                 safety=1.5):
    r"""
    Return safety times the largest sampled ratio
    sup_norm((K'(Psi1) - K'(Psi2)) omega) / (sup_norm(Psi1 - Psi2) sup_norm(omega))
    for Psi1, Psi2 drawn around base at relative distance spread.
    """

    if not model.coupled:
        return 0.0
    scale = spread * ds.sup_norm(base)
    ratio = 0.0
    for ix in range(n_pairs):
        psi1 = base + random_direction(base, rng, scale)
        psi2 = base + random_direction(base, rng, scale)
        distance = ds.sup_norm(psi1 - psi2)
        linearization1 = Linearization(psi1, psi0, model, cfg)
        linearization2 = Linearization(psi2, psi0, model, cfg)
        for jx in range(n_directions):
            omega = random_direction(base, rng)
            difference = linearization1.apply(omega) - linearization2.apply(omega)
            ratio = max(ratio, ds.sup_norm(difference) / distance)
    return safety * ratio


def lipschitz_constant_analytic(bundle, window_length):
    r"""
    Return the bound D1 + D2 + D3 on the Lipschitz constant of K':

    D1 = D3 = 2 r T gamma_T beta ||U|| / hbar,   D2 = 2 T beta ||U||**2 ||Psi0|| / hbar

    with beta = C0_effective.
    """

    beta = bundle.C0_effective
    d1 = 2.0 * bundle.r * window_length * bundle.gamma_t * beta * bundle.U_bound / bundle.hbar
    d2 = 2.0 * window_length * beta * bundle.U_bound ** 2 * bundle.psi0_h10 / bundle.hbar
    return 2.0 * d1 + d2


def perturbation_check(linearization, inverse_norm, tau, delta, rng, n_samples=3, n_directions=2):
    r"""
    Evaluate the perturbation-lemma inequality ||S'(x0)^-1|| ||K'(x0) - K'(v)|| <= tau on states v sampled in
    the ball of radius delta around x0 = linearization.base, and return an OrderedDict with the largest lhs
    and whether the inequality held.
    """

    base = linearization.base
    lhs = 0.0
    for ix in range(n_samples):
        v = base + random_direction(base, rng, delta * (ix + 1) / float(n_samples))
        linearization_v = Linearization(v, linearization.psi0, linearization.model, linearization.cfg)
        for jx in range(n_directions):
            omega = random_direction(base, rng)
            difference = ds.sup_norm(linearization.apply(omega) - linearization_v.apply(omega))
            lhs = max(lhs, inverse_norm * difference)
    return collections.OrderedDict([("delta", delta), ("lhs", lhs), ("tau", tau), ("held", lhs <= tau)])


def newton_solve(u0, psi0, model, params, cfg, ball_radius=None):
    r"""
    Run exact Newton on S(u) = u - K(u) from u0 and return (trajectory, trace).

    Each step solves (I - K'(u)) d = S(u) to params.linearized_tol and sets u <- u - d.  The trace records
    the step-size inequality ||u_k - u_{k-1}|| <= kappa ||S(u_{k-1})|| and the quadratic residual inequality
    ||S(u_k)|| <= (h sigma / 2) ||S(u_{k-1})||**2 for every step.  The iteration stops once the residual is
    below params.floor.

    Description of argument(s):
    u0                              The starting Trajectory.  ||S(u0)|| <= 1/sigma is required.
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    params                          A NewtonParams with kappa and sigma set.
    cfg                             An evolution.PropagatorConfig.
    ball_radius                     Optional radius r.  sup_norm(u0) > r raises ConsistencyError.
    """

    if params.kappa is None or params.sigma is None:
        raise ConfigurationError("kappa and sigma must be computed before newton_solve.")
    trace = IterationTrace("newton")
    trace.floor = params.floor
    residual, k_u = newton_residual(u0, psi0, model, cfg)
    residual_norm = ds.sup_norm(residual)
    basin = 1.0 / params.sigma if params.sigma > 0 else np.inf
    if residual_norm > basin and residual_norm >= params.floor:
        raise ConsistencyError("The starting residual " + repr(residual_norm) + " exceeds 1/sigma = "
                               + repr(basin) + ".  Run more Picard steps.")
    if ball_radius is not None:
        u0_norm = ds.sup_norm(u0)
        if u0_norm > ball_radius:
            raise ConsistencyError("sup_norm(u0) = " + repr(u0_norm) + " lies outside the ball of radius "
                                   + repr(ball_radius) + ".")
        trace.info["in_alpha_ball"] = u0_norm <= params.alpha * ball_radius
    trace.info["t_star"] = kantorovich_tstar(params.h, params.sigma)
    trace.record(residual_norm)
    u = u0
    for k in range(1, params.max_newton_iters + 1):
        if residual_norm < params.floor:
            break
        linearization = Linearization(u, psi0, model, cfg, k_base=k_u)
        step_values, inner = solve_linearized(linearization, residual, params.linearized_tol,
                                              params.linearized_max_iters)
        u = u - step_values
        previous = residual_norm
        residual, k_u = newton_residual(u, psi0, model, cfg)
        residual_norm = ds.sup_norm(residual)
        step_norm = ds.sup_norm(step_values)
        trace.record(residual_norm, step_norm,
                     kanone=(step_norm, params.kappa * previous),
                     kantwo=(residual_norm, 0.5 * params.h * params.sigma * previous ** 2),
                     inner_iterations=inner)
        gp.lprint_timen("Newton iterate " + str(k) + ": residual " + repr(residual_norm) + ".")
        if residual_norm > 1e3 * max(previous, 1e-300) and residual_norm > basin:
            raise NonConvergenceError("Newton diverged at iterate " + str(k) + ".", trace=trace)
    trace.converged = residual_norm < params.floor
    trace.info["r_quadratic_bound"] = r_quadratic_bound(params.kappa, params.h, params.sigma,
                                                        trace.n_iterations)
    if not trace.converged:
        raise NonConvergenceError("Newton did not reach the residual floor " + repr(params.floor) + " in "
                                  + str(params.max_newton_iters) + " iterations.", trace=trace)
    return u, trace
