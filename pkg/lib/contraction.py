#!/usr/bin/env python

r"""
This module provides the Picard (successive approximation) driver for the fixed-point map K, continuation
in time across windows, and the constants which certify them: the embedding constants E1-E3, the uniform
propagator bound, the ball radius r, the Lipschitz constant C of the effective potential and the
contraction constant gamma_t.

Constants are computed in one of two modes.  "analytic" evaluates the closed-form bounds (conservative and
possibly infinite).  "empirical" measures the same operator norms on the discrete problem and inflates them
by a safety factor.
"""

import math
import collections

import numpy as np

import gen_print as gp
import gen_valid as gv
import discrete_space as ds
import potentials as pt
import evolution as ev
import newton_exact as ne
import newton_neumann as nn
import diagnostics as dg
from solver_errors import ConfigurationError, ModelViolationError, NonConvergenceError, WindowTooLongError

constants_modes = ["analytic", "empirical"]
embedding_exponents = (6, 3, 4)
bundle_fields = ["E1", "E2", "E3", "C0", "C0_effective", "C", "U_bound", "r0", "r", "gamma_t", "kappa",
                 "sigma", "tau", "alpha", "h", "c_lip", "inverse_norm", "kprime_bound", "K0", "M",
                 "sigma_approx"]
# Largest uniform bound accepted by the analytic fixed-point resolution of (r, U).
unresolved_bound = 1e6


class ConstantsBundle(object):
    r"""
    The constants of one mode for one window.

    Entries that were not computed are None.  flags holds notes such as "unresolved" (no consistent (r, U)
    pair) or "model_supplied" (an XC constant taken from the model declaration).

    Description of argument(s):
    mode                            "analytic" or "empirical".
    hbar                            The reduced Planck constant.
    psi0_h10                        ||Psi0||_H10.
    window_length                   The window length T.
    kwargs                          Any of bundle_fields.
    """

    def __init__(self, mode, hbar=1.0, psi0_h10=0.0, window_length=0.0, **kwargs):
        gv.valid_value(mode, valid_values=constants_modes, var_name="mode", error_class=ConfigurationError)
        self.mode = mode
        self.hbar = float(hbar)
        self.psi0_h10 = float(psi0_h10)
        self.window_length = float(window_length)
        for field in bundle_fields:
            setattr(self, field, None)
        for key, value in kwargs.items():
            if key not in bundle_fields:
                raise ConfigurationError("Unknown constant \"" + key + "\".")
            setattr(self, key, value)
        self.flags = collections.OrderedDict()

    @property
    def q(self):
        return self.gamma_t

    @property
    def contractive(self):
        return self.gamma_t is not None and self.gamma_t < 1.0

    def as_dict(self):
        result = collections.OrderedDict()
        result["mode"] = self.mode
        result["window_length"] = self.window_length
        result["psi0_h10"] = self.psi0_h10
        for field in bundle_fields:
            value = getattr(self, field)
            result[field] = None if value is None else float(value)
        for key, value in self.flags.items():
            result["flag_" + key] = value
        return result


def embedding_trial_fields(grid, rng, n_trials):
    r"""
    Yield n_trials trial fields: the constant field, low sine modes, centred Gaussians of widths from h to
    L/4, then random smooth fields with random mode counts and decay.
    """

    center = [grid.axis_length / 2.0] * grid.dim
    structured = [np.ones(grid.shape)]
    structured += [ds.sine_mode(grid, modes) for modes in range(1, 5)]
    for width in np.geomspace(grid.spacing, grid.axis_length / 4.0, 8):
        structured.append(ds.gaussian_packet(grid, center, width))
    for field in structured[:n_trials]:
        yield field
    for ix in range(n_trials - len(structured)):
        yield ds.random_smooth_field(grid, rng, n_modes=int(rng.integers(1, 16)), decay=rng.uniform(0.0, 2.0))


def embedding_constants(grid, rng, n_trials=2000, safety=1.2):
    r"""
    Return (E1, E2, E3), the discrete embedding constants of H10 into L6, L3 and L4: the maximum of
    ||f||_Lp / ||f||_H10 over the trial fields, times safety.

    Description of argument(s):
    grid                            The Grid.
    rng                             A numpy Generator.
    n_trials                        The number of trial fields.
    safety                          The inflation factor.
    """

    ratios = dict((p, 0.0) for p in embedding_exponents)
    for field in embedding_trial_fields(grid, rng, n_trials):
        h10 = ds.h10_norm_values(grid, field)
        if h10 == 0.0:
            continue
        for p in embedding_exponents:
            ratios[p] = max(ratios[p], ds.lp_norm_values(grid, field, p) / h10)
    return tuple(safety * ratios[p] for p in embedding_exponents)


def initial_energy(psi0, model):
    r"""
    Return script_E(0) of the initial state.
    """

    rho_path = ds.DensityPath(psi0.grid, [0.0], ds.density_values(psi0.values)[np.newaxis])
    return dg.energy(psi0, 0.0, rho_path, model)[0]


def potential_rate_sup(psi0, model, t_end, n_samples=201, safety=1.1):
    r"""
    Return a bound on sup |d(V + Phi)/dt| over the space-time grid: safety times the sampled maximum of
    |dV/dt| plus c_xc ||Psi0||_L2**2 (the XC rate c_xc g*rho never exceeds c_xc times the conserved charge).
    """

    result = safety * model.external.max_abs_time_derivative(t_end, n_samples)
    if model.xc is not None:
        result += model.xc.c_xc * ds.norm(psi0, "L2") ** 2
    return result


def ball_radius(psi0, model, t_end, u_bound, rate_sup=None):
    r"""
    Return (r0, r):

    r0**2 = (4m/hbar**2) [E0 + (T/2) sup|dV/dt| ||Psi0||_L2**2] + ||Psi0||_L2**2
    r = 2 U max(||Psi0||_H10, r0)

    Description of argument(s):
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    t_end                           The window length T.
    u_bound                         The uniform propagator bound U.
    rate_sup                        sup |d(V + Phi)/dt| (computed by potential_rate_sup when None).
    """

    energy0 = initial_energy(psi0, model)
    if energy0 < -1e-14 * max(1.0, abs(energy0)):
        raise ModelViolationError("The initial energy " + repr(energy0) + " is negative.")
    if rate_sup is None:
        rate_sup = potential_rate_sup(psi0, model, t_end)
    charge = ds.norm(psi0, "L2") ** 2
    r0 = math.sqrt(4.0 * model.mass / model.hbar ** 2 * (max(energy0, 0.0) + 0.5 * t_end * rate_sup * charge)
                   + charge)
    return r0, 2.0 * u_bound * max(ds.norm(psi0), r0)


def hartree_constant_analytic(model, E1):
    r"""
    Return the closed-form constant E1**2 [E1 ||grad W||_L1 + |Omega|**(2/3) ||W||_L2 + lambda E1**2 |Omega|].
    """

    if not model.hartree_enabled:
        return 0.0
    kernel = model.hartree_kernel
    volume = model.grid.domain_volume
    return E1 ** 2 * (E1 * kernel.gradient_l1_norm() + volume ** (2.0 / 3.0) * kernel.l2_norm()
                      + kernel.coupling * E1 ** 2 * volume)


def product_constants(model, E1, E3, t_end):
    r"""
    Return (C0_chain, xc_increment): the Hartree product constant and the XC derivative bound on [0, t_end].
    """

    chain = model.hartree_kernel.product_constant(E1, E3) if model.hartree_enabled else 0.0
    increment = model.xc.deriv_bound(E1, E3, t_end) if model.xc is not None else 0.0
    return chain, increment


def xc_gradient_bound(psi0, model, t_end):
    r"""
    Return a uniform bound on ||grad Phi||_L3 over [0, t_end]: c_xc (1 + T) ||grad g||_L3 ||Psi0||_L2**2.
    """

    if model.xc is None:
        return 0.0
    return model.xc.c_xc * (1.0 + t_end) * model.xc.kernel.gradient_lp_norm(3) * ds.norm(psi0, "L2") ** 2


def uniform_bound_analytic(psi0, model, t_end, E1, rate_sup=None, max_rounds=200):
    r"""
    Return (U, r0, r, resolved) from the closed-form bound

    U <= exp((E1 T / hbar) [2 r E1**2 ||grad W||_L1 + ||grad V||_C(L3) + ||grad Phi||_L3])

    with r = 2 U max(||Psi0||_H10, r0).  r depends on U and the bound depends on r, so the pair is resolved by
    monotone fixed-point iteration from U = 1.  When the iteration leaves [1, unresolved_bound] or does not
    settle, U and r are infinite and resolved is False.
    """

    gradient_w = model.hartree_kernel.gradient_l1_norm() if model.hartree_enabled else 0.0
    static = model.external.gradient_l3_sup() + xc_gradient_bound(psi0, model, t_end)
    if rate_sup is None:
        rate_sup = potential_rate_sup(psi0, model, t_end)
    u_bound = 1.0
    for ix in range(max_rounds):
        r0, r = ball_radius(psi0, model, t_end, u_bound, rate_sup)
        exponent = E1 * t_end / model.hbar * (2.0 * r * E1 ** 2 * gradient_w + static)
        if exponent > math.log(unresolved_bound):
            break
        next_bound = math.exp(exponent)
        if abs(next_bound - u_bound) <= 1e-12 * next_bound:
            r0, r = ball_radius(psi0, model, t_end, next_bound, rate_sup)
            return next_bound, r0, r, True
        u_bound = next_bound
    r0 = ball_radius(psi0, model, t_end, 1.0, rate_sup)[0]
    return np.inf, r0, np.inf, False


def uniform_bound_empirical(psi0, model, window, cfg, rng, n_pairs=6, safety=1.2, n_iterations=20):
    r"""
    Return safety times the largest measured H10 operator norm of the discrete propagator U(t, s) along the
    zero-charge path, over sampled knot pairs s < t (always including the full window and its halves).  The
    norm of U(t, t) is 1, so the result is at least safety.
    """

    time_knots = ev.window_knots(window, cfg.dt)
    path = ev.zero_charge_path(model, time_knots)
    n_steps = len(time_knots) - 1
    if n_steps == 0:
        return safety
    half = max(n_steps // 2, 1)
    pairs = [(0, n_steps), (0, half), (half, n_steps) if half < n_steps else (0, n_steps)]
    while len(pairs) < n_pairs:
        first, last = sorted(rng.choice(n_steps + 1, size=2, replace=False))
        pairs.append((int(first), int(last)))
    measured = 1.0
    for first, last in pairs:
        measured = max(measured,
                       ev.propagator_h10_norm(path, time_knots, first, last, cfg, rng, n_iterations))
    gp.dprint_var(measured)
    return safety * measured


def ball_pair(reference, radius, rng, near=False):
    r"""
    Return two random trajectories with sup_norm at most radius.  With near, the second is a small
    perturbation of the first.
    """

    first = ne.random_direction(reference, rng, radius)
    if near:
        second = first + ne.random_direction(reference, rng, 0.05 * radius)
        second = second * min(1.0, radius / ds.sup_norm(second))
    else:
        second = ne.random_direction(reference, rng, radius * rng.uniform(0.2, 1.0))
    return first, second


def lipschitz_potential_empirical(model, time_knots, n_orbitals, radius, rng, n_pairs=8, n_directions=2,
                                  safety=1.5):
    r"""
    Return safety times the largest sampled ratio

    max_k ||[V_e(t_k, rho1) - V_e(t_k, rho2)] psi||_H10 / (sup_norm(Psi1 - Psi2) ||psi||_H10)

    over pairs Psi1, Psi2 in the ball of the given radius (half of them close together) and random
    directions psi.
    """

    if not model.coupled:
        return 0.0
    grid = model.grid
    reference = ds.Trajectory(grid, time_knots, np.zeros((len(time_knots), n_orbitals) + grid.shape))
    ratio = 0.0
    for ix in range(n_pairs):
        psi1, psi2 = ball_pair(reference, radius, rng, near=ix % 2 == 1)
        distance = ds.sup_norm(psi1 - psi2)
        for jx in range(n_directions):
            direction = ds.random_state(grid, n_orbitals, rng, h10_norm=1.0)
            ratio = max(ratio, dg.potential_difference_norm(psi1, psi2, direction, model) / distance)
    return safety * ratio


def contraction_constant(window_length, bundle, model):
    r"""
    Return gamma_t = (C t / hbar) U**2 ||Psi0||_H10, or 0 for a density-independent potential.

    Description of argument(s):
    window_length                   The window length t.
    bundle                          A ConstantsBundle with C, U_bound and psi0_h10.
    model                           A potentials.PotentialModel.
    """

    if not model.coupled or bundle.C == 0.0:
        return 0.0
    return bundle.C * window_length / bundle.hbar * bundle.U_bound ** 2 * bundle.psi0_h10


def contraction_ratio_empirical(psi0, model, cfg, window, radius, rng, n_pairs=20):
    r"""
    Return the list of measured ratios sup_norm(K Psi1 - K Psi2) / sup_norm(Psi1 - Psi2) over random pairs in
    the ball of the given radius.
    """

    time_knots = ev.window_knots(window, cfg.dt)
    reference = ds.Trajectory.constant(psi0, time_knots)
    ratios = []
    for ix in range(n_pairs):
        psi1, psi2 = ball_pair(reference, radius, rng, near=ix % 2 == 1)
        k1 = ev.fixed_point_map(psi1, psi0, cfg, model)
        k2 = ev.fixed_point_map(psi2, psi0, cfg, model)
        ratios.append(ds.sup_norm(k1 - k2) / ds.sup_norm(psi1 - psi2))
    return ratios


def picard_tolerance(sigma, q):
    r"""
    Return the Picard error target sigma**-1 / (1 + q).
    """

    if sigma is None or sigma == 0.0:
        return np.inf
    return 1.0 / (sigma * (1.0 + q))


def predicted_picard_iterations(q, first_step, eps):
    r"""
    Return the smallest n with q**n / (1 - q) first_step <= eps, or None when q >= 1.
    """

    if q >= 1.0:
        return None
    if first_step <= eps * (1.0 - q):
        return 0
    if q == 0.0:
        return 1
    return int(math.ceil(math.log(eps * (1.0 - q) / first_step) / math.log(q)))


def build_constants(psi0, model, cfg, window, mode, rng, params=None, settings=None):
    r"""
    Return the ConstantsBundle of the given mode for the window.

    Description of argument(s):
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    cfg                             An evolution.PropagatorConfig.
    window                          A (t_start, t_end) pair.
    mode                            "analytic" or "empirical".
    rng                             A numpy Generator.
    params                          A newton_exact.NewtonParams supplying h, alpha, tau and tolerances.
    settings                        A dict of sampling settings: embedding_trials, uniform_pairs,
                                    lipschitz_pairs, inverse_samples, kprime_samples, declared_K0.
    """

    gv.valid_value(mode, valid_values=constants_modes, var_name="mode", error_class=ConfigurationError)
    params = params or ne.NewtonParams()
    settings = settings or {}
    t_end = window[1] - window[0]
    grid = model.grid
    bundle = ConstantsBundle(mode, model.hbar, ds.norm(psi0), t_end, tau=params.tau, alpha=params.alpha,
                             h=params.h)
    bundle.E1, bundle.E2, bundle.E3 = embedding_constants(grid, rng, settings.get("embedding_trials", 2000))
    rate_sup = potential_rate_sup(psi0, model, t_end)
    chain, increment = product_constants(model, bundle.E1, bundle.E3, t_end)
    if model.xc is not None and model.xc.declared_deriv_bound is not None:
        bundle.flags["model_supplied"] = True
    time_knots = ev.window_knots(window, cfg.dt)

    if mode == "analytic":
        bundle.C0 = max(hartree_constant_analytic(model, bundle.E1), chain)
        bundle.C0_effective = bundle.C0 + increment
        bundle.U_bound, bundle.r0, bundle.r, resolved = uniform_bound_analytic(psi0, model, t_end, bundle.E1,
                                                                               rate_sup)
        if not resolved:
            bundle.flags["unresolved"] = True
        bundle.C = 0.0 if bundle.C0_effective == 0.0 else 2.0 * bundle.r * bundle.C0_effective
    else:
        bundle.C0 = chain
        bundle.C0_effective = chain + increment
        bundle.U_bound = uniform_bound_empirical(psi0, model, window, cfg, rng,
                                                 settings.get("uniform_pairs", 6))
        bundle.r0, bundle.r = ball_radius(psi0, model, t_end, bundle.U_bound, rate_sup)
        bundle.C = lipschitz_potential_empirical(model, time_knots, psi0.n_orbitals, bundle.r, rng,
                                                 settings.get("lipschitz_pairs", 8))
    bundle.gamma_t = contraction_constant(t_end, bundle, model)

    base = ev.propagate(psi0, None, window, cfg, model)
    linearization = ne.Linearization(base, psi0, model, cfg)
    bundle.kprime_bound = ne.kprime_norm_bound(bundle, t_end) if bundle.C0_effective else 0.0
    if not model.coupled:
        bundle.c_lip = 0.0
        bundle.inverse_norm = 1.0
        measured_kprime = 0.0
    else:
        if mode == "analytic":
            bundle.c_lip = ne.lipschitz_constant_analytic(bundle, t_end)
        else:
            bundle.c_lip = ne.lipschitz_constant_empirical(base, psi0, model, cfg, rng)
        bundle.inverse_norm = ne.inverse_norm_estimate(linearization, rng, params.linearized_tol,
                                                       settings.get("inverse_samples", 20),
                                                       max_iters=params.linearized_max_iters)[0]
        bundle.flags["inverse_norm_sampled"] = True
        measured_kprime = nn.kprime_norm_estimate(linearization, rng, settings.get("kprime_samples", 4))
    bundle.kappa, bundle.sigma = ne.newton_constants(bundle.c_lip, params.tau, params.alpha, params.h,
                                                     bundle.inverse_norm)
    if mode == "analytic":
        bundle.K0 = bundle.kprime_bound
    else:
        bundle.K0 = min(measured_kprime, bundle.kprime_bound)
    if settings.get("declared_K0") is not None:
        bundle.K0 = float(settings["declared_K0"])
        bundle.flags["declared_K0"] = True
    if bundle.K0 < 1.0:
        approx_constants = nn.approx_newton_constants(bundle.K0, bundle.c_lip, params.h, params.alpha,
                                                      bundle.r)
        bundle.M = approx_constants[0]
        bundle.sigma_approx = approx_constants[2]
    else:
        bundle.flags["K0_not_below_one"] = True
    gp.lprint_var(bundle.as_dict())
    return bundle


def picard_solve(psi0, model, window, target_residual, max_iters, cfg, gamma=None, sigma=None,
                 keep_iterates=False):
    r"""
    Run successive approximation Psi_n = K(Psi_{n-1}) from the zero-charge propagation and return
    (trajectory, trace).

    The residual sup_norm(Psi_n - K Psi_n) is recorded for every evaluation of K, and the iteration returns
    the first iterate whose residual is at most target_residual.  The trace counts the evaluations of K.

    Description of argument(s):
    psi0                            The initial OrbitalSet at window[0].
    model                           A potentials.PotentialModel.
    window                          A (t_start, t_end) pair.
    target_residual                 The stopping residual.
    max_iters                       The maximum number of evaluations of K.
    cfg                             An evolution.PropagatorConfig.
    gamma                           The contraction constant of the window.  gamma >= 1 raises
                                    WindowTooLongError.
    sigma                           The Newton sigma, used to report the error target sigma**-1 / (1 + q).
    keep_iterates                   Keep every iterate in trace.iterates.
    """

    gv.valid_integer(max_iters, lower=1, var_name="max_iters", error_class=ConfigurationError)
    if gamma is not None and gamma >= 1.0:
        raise WindowTooLongError("The contraction constant " + repr(float(gamma)) + " of the window "
                                 + repr(tuple(window)) + " is not below 1.  Shorten the window.")
    trace = ne.IterationTrace("picard")
    trace.floor = target_residual
    trace.iterates = []
    u = ev.propagate(psi0, None, window, cfg, model)
    max_norm = ds.sup_norm(u)
    for n in range(1, max_iters + 1):
        if keep_iterates:
            trace.iterates.append(u)
        k_u = ev.fixed_point_map(u, psi0, cfg, model)
        residual = ds.sup_norm(u - k_u)
        trace.record(residual)
        if n == 1 and gamma is not None:
            trace.info["predicted_iterations"] = predicted_picard_iterations(
                gamma, residual, max(target_residual, 1e-300))
        if residual <= target_residual:
            trace.converged = True
            break
        u = k_u
        max_norm = max(max_norm, ds.sup_norm(u))
    trace.info["target_residual"] = target_residual
    trace.info["max_iterate_norm"] = max_norm
    if gamma is not None:
        trace.info["gamma"] = gamma
        if sigma is not None:
            trace.info["error_target"] = picard_tolerance(sigma, gamma)
    gp.lprint_timen("Picard stopped after " + str(trace.n_iterations) + " evaluations of K with residual "
                    + repr(trace.final_residual()) + ".")
    if not trace.converged:
        raise NonConvergenceError("Picard did not reach the residual " + repr(target_residual) + " in "
                                  + str(max_iters) + " evaluations of K.", trace=trace)
    return u, trace


def continuation_windows(gamma_total, cap, n_steps):
    r"""
    Return the number of uniform windows m: the smallest divisor of n_steps with gamma_total / m <= cap.
    """

    if not np.isfinite(gamma_total):
        raise WindowTooLongError("The contraction constant is not finite; no window partition certifies it.")
    m = max(1, int(math.ceil(gamma_total / cap - 1e-12)))
    while m <= n_steps and n_steps % m != 0:
        m += 1
    if m > n_steps:
        raise WindowTooLongError("The window would need " + str(m) + " pieces but has only " + str(n_steps)
                                 + " time steps.")
    return m


def continue_in_time(psi0, model, t_end, per_window_gamma_cap, cfg, gamma_total, target_residual,
                     max_iters=100, solver=None):
    r"""
    Solve on [0, t_end] by splitting it into the fewest uniform windows whose contraction constant is at most
    per_window_gamma_cap, chaining each window's terminal state and terminal XC history Phi into the next.
    Return (trajectory, traces).

    Description of argument(s):
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    t_end                           The horizon T.
    per_window_gamma_cap            The largest accepted per-window gamma (in (0, 1)).
    cfg                             An evolution.PropagatorConfig.
    gamma_total                     gamma_T for the whole horizon (gamma is linear in the window length).
    target_residual                 The per-window stopping residual.
    max_iters                       The per-window Picard cap.
    solver                          Optional callable solver(state, model, window, cfg, gamma) returning
                                    (trajectory, trace).  Defaults to picard_solve.
    """

    gv.valid_float(per_window_gamma_cap, lower=0.0, upper=1.0, lower_open=True, upper_open=True,
                   var_name="per_window_gamma_cap", error_class=ConfigurationError)
    n_steps = ev.window_steps((0.0, t_end), cfg.dt)
    m = continuation_windows(gamma_total, per_window_gamma_cap, n_steps)
    gp.lprint_timen("Continuing over " + str(m) + " window(s).")

    def picard_window(state, model, window, cfg, gamma):
        return picard_solve(state, model, window, target_residual, max_iters, cfg, gamma=gamma)

    solver = solver or picard_window
    edges = ds.uniform_knots(t_end, m)
    state = psi0
    pieces = []
    traces = []
    window_model = model
    for ix in range(m):
        window = (edges[ix], edges[ix + 1])
        trajectory, trace = solver(state, window_model, window, cfg, gamma_total / m)
        pieces.append(trajectory)
        traces.append(trace)
        state = trajectory.final_state()
        if model.xc is not None:
            phi_end = pt.PotentialPath(window_model, trajectory.density_path()).xc_knots[-1]
            window_model = model.with_xc_start(phi_end)
    return ds.concatenate(pieces), traces
