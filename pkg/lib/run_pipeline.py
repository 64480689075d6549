#!/usr/bin/env python

r"""
This module runs the solver stack described by a RunConfig: the constants ledger in both modes, the Picard,
exact Newton and approximate Newton solves (Newton variants start from the first Picard iterate inside their
basin), and the asserted check suite used by the verify verb.
"""

import copy
import collections

import numpy as np

import gen_print as gp
import discrete_space as ds
import potentials as pt
import evolution as ev
import contraction as ct
import newton_exact as ne
import newton_neumann as nn
import diagnostics as dg
from solver_errors import NonConvergenceError, TdksError

solver_names = ["picard", "newton", "approx_newton"]

# Random streams (see RunConfig.rng).
constants_streams = {"analytic": 1, "empirical": 2}
solver_stream = 3
check_stream = 4


def one_line(error):
    return " ".join(line.strip() for line in str(error).split("\n") if line.strip())


class RunResult(object):
    r"""
    Everything one run produced.  Solver entries are missing when the solver was not selected or failed, in
    which case errors names the failure.

    Description of argument(s):
    config                          The run_config.RunConfig.
    """

    def __init__(self, config):
        self.config = config
        self.grid = config.grid()
        self.model = config.model(self.grid)
        self.psi0 = config.initial_state(self.grid)
        self.cfg = config.propagator_config()
        self.params = config.newton_params()
        self.bundles = collections.OrderedDict()
        self.trajectories = collections.OrderedDict()
        self.traces = collections.OrderedDict()
        self.handoff = collections.OrderedDict()
        self.starts = collections.OrderedDict()
        self.errors = collections.OrderedDict()
        self.checks = []
        self.energies = None

    @property
    def bundle(self):
        return self.bundles.get(self.config.mode)

    @property
    def floor(self):
        return self.params.floor

    def solution(self):
        r"""
        Return the first available solver trajectory (picard, newton, approx_newton order), or None.
        """

        for name in solver_names:
            if name in self.trajectories:
                return self.trajectories[name]
        return None

    def picard_traces(self):
        r"""
        Return the Picard traces of the certified windows (one per continuation window).
        """

        return [(name, trace) for name, trace in self.traces.items()
                if name == "picard" or name.startswith("picard.w")]

    def failed(self):
        return len(self.errors) > 0


def compute_constants(result, modes=None):
    r"""
    Build the ConstantsBundle of each mode and store them in result.bundles.

    Description of argument(s):
    result                          A RunResult.
    modes                           The modes to compute (default: both).
    """

    config = result.config
    settings = config.constants_settings()
    for mode in modes or ct.constants_modes:
        gp.lprint_timen("Computing the " + mode + " constants.")
        result.bundles[mode] = ct.build_constants(result.psi0, result.model, result.cfg, config.window, mode,
                                                  config.rng(constants_streams[mode]), result.params,
                                                  settings)
    return result.bundles


def basin_target(sigma, floor):
    r"""
    Return the handoff residual max(1/sigma, floor); 1/0 counts as infinite.
    """

    if sigma is None:
        return None
    return np.inf if sigma == 0.0 else max(1.0 / sigma, floor)


def handoff_start(trace, target):
    r"""
    Return (index, iterate) of the first kept Picard iterate whose residual is at most target, or
    (None, None).
    """

    for ix, residual in enumerate(trace.residual_norms):
        if residual <= target and ix < len(trace.iterates):
            return ix, trace.iterates[ix]
    return None, None


def _record_failure(result, name, error):
    result.errors[name] = one_line(error)
    trace = getattr(error, "trace", None)
    if trace is not None:
        result.traces[name] = trace
    gp.lprint_timen("The " + name + " stage failed: " + result.errors[name])


def run_picard(result, names):
    r"""
    Run Picard.  When the selected bundle certifies the whole window (gamma_t at most the cap) one Picard
    solve serves as the Picard result and as the source of Newton starting points.  Otherwise the Picard
    result comes from continuation over shorter windows and an uncertified full-window Picard run (trace
    "picard.handoff") supplies the Newton starting points.
    """

    config = result.config
    bundle = result.bundle
    solver = config.data["solver"]
    cap = solver["gamma_cap"]
    max_iters = solver["picard_max_iters"]
    certified = bundle.gamma_t is not None and bundle.gamma_t <= cap
    newton_targets = [basin_target(bundle.sigma, result.floor)] if "newton" in names else []
    if "approx_newton" in names and bundle.sigma_approx is not None:
        newton_targets.append(basin_target(bundle.sigma_approx, result.floor))
    if "picard" in names and not certified:
        try:
            trajectory, traces = ct.continue_in_time(result.psi0, result.model, config.t_end, cap, result.cfg,
                                                     bundle.gamma_t, result.floor, max_iters)
            result.trajectories["picard"] = trajectory
            for ix, trace in enumerate(traces, start=1):
                result.traces["picard.w" + str(ix)] = trace
        except TdksError as error:
            _record_failure(result, "picard", error)
    if not newton_targets and ("picard" not in names or not certified):
        return None
    target = result.floor if "picard" in names and certified else max(min(newton_targets), result.floor)
    name = "picard" if certified and "picard" in names else "picard.handoff"
    try:
        trajectory, trace = ct.picard_solve(result.psi0, result.model, config.window, target, max_iters,
                                            result.cfg, gamma=bundle.gamma_t if certified else None,
                                            sigma=bundle.sigma, keep_iterates=True)
    except TdksError as error:
        _record_failure(result, name, error)
        return None
    trace.info["certified"] = certified
    result.traces[name] = trace
    if name == "picard":
        result.trajectories["picard"] = trajectory
    return trace


def newton_params(result, kappa, sigma):
    params = copy.copy(result.params)
    params.kappa = kappa
    params.sigma = sigma
    return params


def neumann_policy(result, bundle, mode=None, fixed_n=None):
    neumann = result.config.neumann_settings()
    return nn.NeumannPolicy(bundle.K0, bundle.M, neumann["n_max"], mode or neumann["mode"],
                            neumann["fixed_n"] if fixed_n is None else fixed_n)


def handoff(result, name, picard_trace, sigma):
    r"""
    Return the starting trajectory of the named Newton variant: the first Picard iterate whose residual is
    at most max(1/sigma, floor).  The choice is recorded in result.handoff.
    """

    if picard_trace is None:
        raise NonConvergenceError("No Picard run is available to start " + name + ".")
    target = basin_target(sigma, result.floor)
    ix, u0 = handoff_start(picard_trace, target)
    result.handoff[name] = collections.OrderedDict([
        ("target", target), ("picard_iterate", ix),
        ("residual", None if ix is None else picard_trace.residual_norms[ix])])
    if u0 is None:
        raise NonConvergenceError("No Picard iterate reached the " + name + " handoff residual "
                                  + repr(target) + ".", trace=picard_trace)
    result.starts[name] = u0
    return u0


def run_newton(result, picard_trace):
    bundle = result.bundle
    u0 = handoff(result, "newton", picard_trace, bundle.sigma)
    params = newton_params(result, bundle.kappa, bundle.sigma)
    trajectory, trace = ne.newton_solve(u0, result.psi0, result.model, params, result.cfg,
                                        ball_radius=bundle.r)
    trace.info["handoff_residual"] = result.handoff["newton"]["residual"]
    trace.info["kappa_consistent"] = ne.kappa_consistent(bundle.kappa, params.alpha, bundle.r, params.h,
                                                         bundle.sigma)
    return trajectory, trace


def run_approx_newton(result, picard_trace):
    bundle = result.bundle
    policy = neumann_policy(result, bundle)
    u0 = handoff(result, "approx_newton", picard_trace, bundle.sigma_approx)
    params = newton_params(result, bundle.M, bundle.sigma_approx)
    trajectory, trace = nn.approx_newton_solve(u0, result.psi0, result.model, policy, params, result.cfg,
                                               ball_radius=bundle.r, rng=result.config.rng(solver_stream))
    trace.info["handoff_residual"] = result.handoff["approx_newton"]["residual"]
    trace.info["K0"] = policy.K0
    return trajectory, trace


def run_solvers(result, names=None):
    r"""
    Run the selected solvers and store their trajectories and traces in result.  Solver failures are
    recorded in result.errors; the remaining solvers still run when they can.

    Description of argument(s):
    result                          A RunResult whose bundles have been computed.
    names                           The solvers to run (default: the configured selection).
    """

    selection = result.config.selection
    names = names or (solver_names if selection == "all" else [selection])
    if result.bundle is None:
        compute_constants(result, [result.config.mode])
    picard_trace = run_picard(result, names)
    for name, runner in (("newton", run_newton), ("approx_newton", run_approx_newton)):
        if name not in names:
            continue
        gp.lprint_timen("Running " + name + ".")
        try:
            result.trajectories[name], result.traces[name] = runner(result, picard_trace)
        except TdksError as error:
            _record_failure(result, name, error)
    solution = result.solution()
    if solution is not None:
        result.energies = dg.energy_path(solution, result.model)
    return result


# Check suite.

def ratio_check(name, pairs, mode="-", floor=0.0, asserted=True, note=""):
    r"""
    Return a CheckResult for a family of inequalities lhs <= rhs: its lhs is the largest ratio lhs/rhs and its
    rhs is 1.  Pairs whose lhs is None or at most floor are skipped.
    """

    worst = 0.0
    count = 0
    for lhs, rhs in pairs:
        if lhs is None or rhs is None or lhs <= floor:
            continue
        count += 1
        worst = max(worst, lhs / rhs if rhs > 0.0 else np.inf)
    note = (note + "; " if note else "") + str(count) + " compared"
    return dg.CheckResult(name, worst, 1.0, mode=mode, asserted=asserted, note=note)


def static_model(model):
    r"""
    Return the model with exchange-correlation removed and a time-independent external potential (a driven
    harmonic potential loses its drive).
    """

    external = model.external
    if not external.is_static:
        external = pt.ExternalPotential(model.grid, "harmonic", collections.OrderedDict(
            [("k", external.params["k"]), ("center", external.params["center"])]))
    return pt.PotentialModel(model.grid, external, model.hartree_kernel, None, model.hbar, model.mass)


def picard_to_floor(result, model=None, cfg=None, keep_iterates=False):
    config = result.config
    return ct.picard_solve(result.psi0, model or result.model, config.window, result.floor,
                           config.data["solver"]["picard_max_iters"], cfg or result.cfg,
                           keep_iterates=keep_iterates)


def max_abs(values):
    return float(np.max(np.abs(values)))


def check_solvers(result, rng):
    return [dg.CheckResult("solver_" + name, 0.0, 0.0, passed=name in result.trajectories,
                           note=result.errors.get(name, ""))
            for name in solver_names]


def check_unitarity(result, rng):
    tolerance = result.config.diagnostics["unitarity_tolerance"]
    zero_charge = ev.propagate(result.psi0, None, result.config.window, result.cfg, result.model)
    drifts = [ev.l2_drift(zero_charge)]
    drifts += [ev.l2_drift(trajectory) for trajectory in result.trajectories.values()]
    return [dg.CheckResult("unitarity", max(drifts), tolerance,
                           note=str(len(drifts)) + " trajectories")]


def check_energy(result, rng):
    diagnostics = result.config.diagnostics
    checks = []
    model = static_model(result.model)
    trajectory, trace = picard_to_floor(result, model, keep_iterates=True)
    residual = max_abs(dg.energy_identity_residual(trajectory, model))
    checks.append(dg.CheckResult("energy_static", residual, diagnostics["energy_tolerance"]))
    if len(trace.iterates) > 1:
        unconverged = max_abs(dg.energy_identity_residual(trace.iterates[1], model))
        checks.append(dg.CheckResult("energy_unconverged_iterate", residual, unconverged,
                                     passed=residual < unconverged))
    model = result.model
    time_dependent = not model.external.is_static or model.xc is not None

    def identity_residual(dt):
        solution = picard_to_floor(result, cfg=result.cfg.with_dt(dt))[0]
        return max_abs(dg.energy_identity_residual(solution, model))

    if diagnostics["refinement"]:
        residuals, ratios = dg.refinement_study(identity_residual, result.cfg.dt)
        checks.append(dg.CheckResult("energy_identity", residuals[0], diagnostics["identity_tolerance"],
                                     asserted=time_dependent))
        checks.extend(refinement_checks("energy_refinement", residuals, ratios, diagnostics,
                                        asserted=time_dependent))
    else:
        residual = identity_residual(result.cfg.dt)
        checks.append(dg.CheckResult("energy_identity", residual, diagnostics["identity_tolerance"],
                                     asserted=time_dependent))
    return checks


def refinement_checks(name, residuals, ratios, diagnostics, asserted=True):
    lower, upper = diagnostics["refinement_band"]
    return [dg.CheckResult(name + "_" + str(ix), ratio, upper, passed=lower <= ratio <= upper,
                           asserted=asserted, note="residuals " + repr(residuals[ix - 1]) + " -> "
                           + repr(residuals[ix]))
            for ix, ratio in enumerate(ratios, start=1)]


def duhamel_paths(result, cfg):
    grid = result.grid
    knots = ev.window_knots(result.config.window, cfg.dt)
    charge = float(np.sum(ds.l2_norm_values(grid, result.psi0.values) ** 2))
    center = grid.axis_length / 2.0
    rho1 = dg.breathing_density_path(grid, knots, center, 1.0, 0.2, 2.0, charge)
    rho2 = dg.breathing_density_path(grid, knots, center, 1.2, 0.1, 3.0, charge)
    return rho1, rho2


def check_duhamel(result, rng):
    diagnostics = result.config.diagnostics
    t_end = result.config.t_end
    rho1, rho2 = duhamel_paths(result, result.cfg)
    same = dg.duhamel_identity_residual(result.psi0, rho1, rho1, t_end, result.cfg, result.model)
    checks = [dg.CheckResult("duhamel_same_path", same, result.cfg.linear_solve_tol)]

    def identity_residual(dt):
        cfg = result.cfg.with_dt(dt)
        rho1, rho2 = duhamel_paths(result, cfg)
        return dg.duhamel_identity_residual(result.psi0, rho1, rho2, t_end, cfg, result.model)

    levels = 3 if diagnostics["refinement"] else 1
    residuals, ratios = dg.refinement_study(identity_residual, result.cfg.dt, levels)
    checks.append(dg.CheckResult("duhamel_identity", residuals[0], diagnostics["identity_tolerance"]))
    checks.extend(refinement_checks("duhamel_refinement", residuals, ratios, diagnostics,
                                    asserted=result.model.coupled))
    return checks


def check_contraction(result, rng):
    diagnostics = result.config.diagnostics
    checks = []
    for mode, bundle in result.bundles.items():
        name = "contraction_ratio." + mode
        if bundle.r is None or not np.isfinite(bundle.r):
            checks.append(dg.CheckResult(name, 0.0, bundle.gamma_t, mode=mode, asserted=False,
                                         note="no finite ball radius"))
            continue
        ratios = ct.contraction_ratio_empirical(result.psi0, result.model, result.cfg, result.config.window,
                                                bundle.r, rng, diagnostics["contraction_pairs"])
        checks.append(dg.CheckResult(name, max(ratios), bundle.gamma_t, mode=mode,
                                     note=str(len(ratios)) + " pairs"))
    mode = result.config.mode
    traces = result.picard_traces()
    if not traces:
        checks.append(dg.CheckResult("picard_ratio", 0.0, 0.0, passed=False, mode=mode,
                                     note="no certified Picard run"))
        return checks
    pairs = []
    for name, trace in traces:
        residuals = trace.residual_norms
        pairs += [(residuals[k + 1], trace.info["gamma"] * residuals[k]) for k in range(len(residuals) - 1)
                  if residuals[k + 1] > 10.0 * result.floor]
    checks.append(ratio_check("picard_ratio", pairs, mode=mode))
    trace = result.traces.get("picard")
    if trace is not None and len(trace.iterates) > 1 and trace.info.get("gamma", 1.0) < 1.0:
        pairs = [pair for pair in dg.sa_bound_check(trace.iterates, result.trajectories["picard"],
                                                    trace.info["gamma"])
                 if pair[1] > 10.0 * result.floor]
        checks.append(ratio_check("picard_sa_bound", pairs, mode=mode))
    return checks


def check_derivative(result, rng):
    diagnostics = result.config.diagnostics
    model = result.model
    base = result.solution() or ev.propagate(result.psi0, None, result.config.window, result.cfg, model)
    omega = ne.random_direction(base, rng)
    spot = dg.gateaux_fd_check(base, omega, result.psi0, model, result.cfg,
                               epsilons=(diagnostics["fd_spot_epsilon"],))
    checks = [dg.CheckResult("fd_spot", spot["relative_errors"][0], diagnostics["fd_spot_tolerance"])]
    tolerance = diagnostics["fd_slope_tolerance"]
    for name, expected, one_sided in (("fd_slope", 2.0, False), ("fd_one_sided_slope", 1.0, True)):
        ladder = dg.gateaux_fd_check(base, omega, result.psi0, model, result.cfg,
                                     epsilons=result.config.fd_epsilons, one_sided=one_sided)
        if ladder["slope"] is None:
            checks.append(dg.CheckResult(name, 0.0, tolerance, passed=not model.coupled,
                                         asserted=model.coupled, note="no slope above the roundoff floor"))
            continue
        checks.append(dg.CheckResult(name, abs(ladder["slope"] - expected), tolerance,
                                     note="slope " + repr(ladder["slope"])))
    if diagnostics["dense_check"]:
        checks.append(dense_check(result))
    return checks


def dense_check(result):
    r"""
    Compare the brute-force Jacobian of K with the assembled derivative on a tiny copy of the problem.
    """

    config = result.config
    diagnostics = config.diagnostics
    if result.grid.dim != 1:
        return dg.CheckResult("dense_jacobian", 0.0, 1e-3, asserted=False, note="1D configurations only")
    grid = ds.Grid(1, diagnostics["dense_points"], result.grid.axis_length)
    model = config.model(grid)
    psi0 = config.initial_state(grid)
    cfg = result.cfg.with_dt(config.t_end / (diagnostics["dense_knots"] - 1))
    base = ev.propagate(psi0, None, config.window, cfg, model)
    error = dg.dense_linearization_check(base, psi0, model, cfg)
    return dg.CheckResult("dense_jacobian", error, 1e-3, note=str(grid.points_per_axis) + " points, "
                          + str(base.n_knots) + " knots")


def order_checks(name, trace, order_min):
    try:
        order, r_squared = dg.convergence_order(trace)
    except TdksError as error:
        return [dg.CheckResult(name + "_order", order_min, 0.0, passed=False, note=one_line(error))]
    return [dg.CheckResult(name + "_order", order_min, order, note="r_squared " + repr(r_squared))]


def check_newton(result, rng):
    diagnostics = result.config.diagnostics
    bundle = result.bundle
    mode = bundle.mode
    trace = result.traces.get("newton")
    if "newton" not in result.trajectories:
        return [dg.CheckResult("newton_order", diagnostics["order_min"], 0.0, passed=False, mode=mode,
                               note=result.errors.get("newton", "not run"))]
    checks = order_checks("newton", trace, diagnostics["order_min"])
    checks.append(ratio_check("newton_kanone", zip(trace.kanone_lhs, trace.kanone_rhs), mode=mode))
    checks.append(ratio_check("newton_kantwo", zip(trace.kantwo_lhs, trace.kantwo_rhs), mode=mode,
                              floor=trace.floor))
    solution = result.trajectories["newton"]
    linearization = ne.Linearization(solution, result.psi0, result.model, result.cfg)
    witness = ne.injectivity_witness(linearization, rng)
    inverse_norm = bundle.inverse_norm
    if inverse_norm is None or not np.isfinite(inverse_norm) or inverse_norm <= 0.0:
        bound = result.params.linearized_tol
    else:
        bound = 1.0 / inverse_norm
    checks.append(dg.CheckResult("newton_injectivity", bound, witness, mode=mode,
                                 note="min |(I - K')g| / |g| against 1 / inverse_norm"))
    t_star = ne.kantorovich_tstar(bundle.h, bundle.sigma)
    consistency_bound = (1.0 - bundle.alpha) * bundle.r / t_star if t_star > 0.0 else np.inf
    checks.append(dg.CheckResult("newton_kappa_consistent", bundle.kappa, consistency_bound, mode=mode,
                                 asserted=False))
    if result.model.coupled and np.isfinite(bundle.r):
        perturbation = ne.perturbation_check(linearization, bundle.inverse_norm, bundle.tau, bundle.r, rng)
        checks.append(dg.CheckResult("newton_perturbation", perturbation["lhs"], bundle.tau, mode=mode,
                                     asserted=False, note="delta " + repr(bundle.r)))
    return checks


def check_approx_newton(result, rng):
    diagnostics = result.config.diagnostics
    bundle = result.bundle
    mode = bundle.mode
    if "approx_newton" not in result.trajectories:
        return [dg.CheckResult("approx_newton_order", diagnostics["order_min"], 0.0, passed=False, mode=mode,
                               note=result.errors.get("approx_newton", "not run"))]
    trace = result.traces["approx_newton"]
    checks = order_checks("approx_newton", trace, diagnostics["order_min"])
    checks.append(ratio_check("approx_newton_defect", zip(trace.defect_measured, trace.m_times_residual),
                              mode=mode))
    checks.append(ratio_check("approx_newton_kantwo", zip(trace.kantwo_lhs, trace.kantwo_rhs), mode=mode,
                              floor=trace.floor))
    if result.model.coupled:
        checks.append(fixed_order_control(result, bundle))
    return checks


def fixed_order_control(result, bundle):
    r"""
    Rerun approximate Newton with the truncation order fixed at 1 and fit its order on the residuals below
    K0**2, where the fixed truncation limits the convergence to a linear rate.
    """

    policy = neumann_policy(result, bundle, mode="fixed", fixed_n=1)
    params = newton_params(result, bundle.M, bundle.sigma_approx)
    try:
        trajectory, trace = nn.approx_newton_solve(result.starts["approx_newton"], result.psi0, result.model,
                                                   policy, params, result.cfg, ball_radius=bundle.r)
    except NonConvergenceError as error:
        trace = error.trace
    below = bundle.K0 ** 2
    if len([r for r in trace.residual_norms if trace.floor < r < below]) < 3:
        below = None
    try:
        order, r_squared = dg.convergence_order(trace, below=below)
    except TdksError as error:
        return dg.CheckResult("approx_newton_fixed_control", 0.0, 1.5, passed=False, mode=bundle.mode,
                              note=one_line(error))
    return dg.CheckResult("approx_newton_fixed_control", order, 1.5, passed=order < 1.5, mode=bundle.mode,
                          note="fixed n = 1, " + str(trace.n_iterations) + " iterations")


def check_audits(result, rng):
    r"""
    Audit the product, Lipschitz and embedding inequalities on seeded random inputs with the empirical
    constants.
    """

    diagnostics = result.config.diagnostics
    bundle = result.bundles["empirical"]
    model = result.model
    grid = result.grid
    n_orbitals = result.psi0.n_orbitals
    n_trials = diagnostics["audit_trials"]
    time_knots = ev.window_knots(result.config.window, result.cfg.dt)
    reference = ds.Trajectory.constant(result.psi0, time_knots)

    def sample(size=1.0):
        return ds.random_state(grid, n_orbitals, rng, h10_norm=size)

    audits = collections.OrderedDict([(name, []) for name in ("hartree_product", "hartree_lipschitz",
                                                              "potential_lipschitz", "xc_derivative",
                                                              "hartree_gradient", "hartree_young")])
    pair_audit = []
    for ix in range(n_trials):
        audits["hartree_product"].append(dg.hartree_product_bound_check(sample(), sample(), sample(), model,
                                                                        bundle)[:2])
        audits["hartree_lipschitz"].append(dg.hartree_lipschitz_check(sample(rng.uniform(0.1, 2.0)),
                                                                      sample(rng.uniform(0.1, 2.0)),
                                                                      sample(), model, bundle)[:2])
        psi1, psi2 = ct.ball_pair(reference, bundle.r, rng, near=ix % 2 == 1)
        lhs, rhs, _, pair_rhs = dg.potential_lipschitz_check(psi1, psi2, sample(), model, bundle)
        audits["potential_lipschitz"].append((lhs, rhs))
        pair_audit.append((lhs, pair_rhs))
        audits["xc_derivative"].append(dg.xc_derivative_bound_check(sample(), sample(), sample(), time_knots,
                                                                    model, bundle)[:2])
        audits["hartree_gradient"].append(dg.hartree_gradient_check(sample(), sample(), model, bundle)[:2])
        if model.hartree_enabled:
            audits["hartree_young"].append(dg.hartree_young_check(ds.density_values(sample().values),
                                                                  model)[:2])
    checks = [ratio_check("audit_" + name, pairs, mode="empirical", note=str(n_trials) + " trials")
              for name, pairs in audits.items()]
    checks.append(ratio_check("audit_potential_lipschitz_pair", pair_audit, mode="empirical", asserted=False,
                              note="pair constant C0_pair (sup_norm(Psi1) + sup_norm(Psi2))"))
    for p, (ratio, constant, passed) in dg.embedding_audit(grid, (bundle.E1, bundle.E2, bundle.E3), rng,
                                                           diagnostics["embedding_audit_states"]).items():
        checks.append(dg.CheckResult("embedding_L" + str(p), ratio, constant, passed=passed,
                                     mode="empirical"))
    for mode, mode_bundle in result.bundles.items():
        lhs, rhs, passed = dg.uniform_bound_check(model, result.config.window, result.cfg, mode_bundle, rng)
        checks.append(dg.CheckResult("uniform_bound." + mode, lhs, rhs, passed=passed, mode=mode))
    return checks


def solver_floor(result, name):
    if name == "picard":
        traces = result.picard_traces()
        return max(trace.floor for trace_name, trace in traces) if traces else result.floor
    return result.traces[name].floor


def check_agreement(result, rng):
    r"""
    Compare the terminal trajectories of the solvers pairwise, and a forced two-window continuation with
    the single-window solution.
    """

    bundle = result.bundle
    checks = []
    for ix, first in enumerate(solver_names):
        for second in solver_names[ix + 1:]:
            name = "agreement." + first + "_" + second
            if first not in result.trajectories or second not in result.trajectories:
                checks.append(dg.CheckResult(name, 0.0, 0.0, passed=False, note="solver missing"))
                continue
            distance = ds.sup_norm(result.trajectories[first] - result.trajectories[second])
            tolerance = 10.0 * (solver_floor(result, first) + solver_floor(result, second))
            checks.append(dg.CheckResult(name, distance, tolerance, mode=bundle.mode))
    checks.append(continuation_check(result))
    return checks


def continuation_check(result):
    config = result.config
    cap = config.data["solver"]["gamma_cap"]
    max_iters = config.data["solver"]["picard_max_iters"]

    def window_solver(state, model, window, cfg, gamma):
        return ct.picard_solve(state, model, window, result.floor, max_iters, cfg)

    # gamma_total = 1.5 cap forces at least two windows.
    trajectory, traces = ct.continue_in_time(result.psi0, result.model, config.t_end, cap, result.cfg,
                                             1.5 * cap, result.floor, max_iters, solver=window_solver)
    reference = result.solution() or picard_to_floor(result)[0]
    distance = ds.sup_norm(trajectory - reference)
    tolerance = 10.0 * (len(traces) + 1) * result.floor
    return dg.CheckResult("continuation", distance, tolerance, note=str(len(traces)) + " windows")


def check_zero_force(result, rng):
    solution = result.solution()
    if solution is None or result.model.xc is None:
        return [dg.CheckResult("zero_force", 0.0, 0.0, asserted=False, note="no XC history")]
    return [dg.CheckResult("zero_force", max_abs(dg.zero_force(solution, result.model)), 0.0, asserted=False,
                           note="max |int rho grad Phi|")]


check_functions = [check_solvers, check_unitarity, check_energy, check_duhamel, check_contraction,
                   check_derivative, check_newton, check_approx_newton, check_audits, check_agreement,
                   check_zero_force]


def run_check_suite(config, result=None):
    r"""
    Run every check and return the ordered list of CheckResults.  A check which raises a solver error is
    recorded as a failed check named after its group.

    Description of argument(s):
    config                          A run_config.RunConfig.
    result                          A RunResult whose constants and solvers have already been run (all three
                                    solvers).  Built when not given.
    """

    if result is None:
        result = RunResult(config)
        compute_constants(result)
        run_solvers(result, solver_names)
    rng = config.rng(check_stream)
    checks = []
    for function in check_functions:
        group = function.__name__[len("check_"):]
        gp.lprint_timen("Running the " + group + " checks.")
        try:
            checks.extend(function(result, rng))
        except TdksError as error:
            checks.append(dg.CheckResult(group, 0.0, 0.0, passed=False, note=one_line(error)))
    result.checks = checks
    return checks
