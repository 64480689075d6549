#!/usr/bin/env python

r"""
This module provides the approximate Newton iteration, which replaces the exact inverse of I - K'(u) with
the truncated Neumann series I + K' + ... + K'**n.  The order n follows the residual: the smallest n with
||K'||**n <= ||S(u)||.
"""

import math
import collections

import numpy as np

import gen_print as gp
import gen_valid as gv
import discrete_space as ds
import newton_exact as ne
from solver_errors import ConfigurationError, ConsistencyError, NonConvergenceError, WindowTooLongError

truncation_modes = ["adaptive", "fixed"]


class NeumannPolicy(object):
    r"""
    Description of argument(s):
    K0                              The bound on ||K'(u)||, uniform in u.  Must be below 1.
    M                               The approximate-inverse constant, at least 1/(1 - K0).
    n_max                           The truncation cap.
    mode                            "adaptive" (order from the residual) or "fixed".
    fixed_n                         The order used in fixed mode.
    """

    def __init__(self, K0, M, n_max=64, mode="adaptive", fixed_n=1):
        if K0 >= 1.0:
            raise WindowTooLongError("The derivative bound K0 = " + repr(float(K0)) + " is not below 1."
                                     + "  The Neumann series is not available on this window.")
        gv.valid_float(K0, lower=0.0, var_name="K0", error_class=ConfigurationError)
        gv.valid_float(M, lower=1.0 / (1.0 - K0) * (1.0 - 1e-12), var_name="M",
                       error_class=ConfigurationError)
        gv.valid_integer(n_max, lower=1, var_name="n_max", error_class=ConfigurationError)
        gv.valid_value(mode, valid_values=truncation_modes, var_name="mode", error_class=ConfigurationError)
        gv.valid_integer(fixed_n, lower=0, var_name="fixed_n", error_class=ConfigurationError)
        self.K0 = float(K0)
        self.M = float(M)
        self.n_max = int(n_max)
        self.mode = mode
        self.fixed_n = int(fixed_n)

    def as_dict(self):
        return collections.OrderedDict([("K0", self.K0), ("M", self.M), ("n_max", self.n_max),
                                        ("mode", self.mode), ("fixed_n", self.fixed_n)])


def approx_newton_constants(K0, c_lip, h, alpha, delta):
    r"""
    Return (M, kappa, sigma) for the approximate Newton iteration:

    M = max(1/(1 - K0), c/2),  kappa = M,  sigma = (2 (M + M**3) / h) max(1, 1/((1 - alpha) delta))

    Description of argument(s):
    K0                              The bound on ||K'||, below 1.
    c_lip                           The Lipschitz constant of K'.
    h                               The Kantorovich quantity h.
    alpha                           alpha in (0, 1).
    delta                           The ball radius (the Picard radius r).
    """

    if K0 >= 1.0:
        raise WindowTooLongError("The derivative bound K0 = " + repr(float(K0)) + " is not below 1.")
    M = max(1.0 / (1.0 - K0), 0.5 * c_lip)
    sigma = 2.0 * (M + M ** 3) / h * max(1.0, 1.0 / ((1.0 - alpha) * delta))
    return M, M, sigma


def neumann_apply(linearization, f, n):
    r"""
    Return [I + K' + ... + K'**n] f, using exactly n derivative applications.

    Description of argument(s):
    linearization                   A newton_exact.Linearization at the base trajectory.
    f                               The Trajectory to apply the series to.
    n                               The truncation order (>= 0).
    """

    gv.valid_integer(n, lower=0, var_name="n")
    total = f
    term = f
    for k in range(n):
        term = linearization.apply(term)
        total = total + term
    return total


def choose_truncation(residual_norm, kprime_norm_est, n_max):
    r"""
    Return (n, capped): the smallest n >= 1 with kprime_norm_est**n <= residual_norm, capped at n_max.

    A zero residual returns (0, False): the base is the fixed point and no correction is needed.

    Description of argument(s):
    residual_norm                   ||S(u)||.
    kprime_norm_est                 An upper estimate of ||K'(u)||, below 1.
    n_max                           The cap.
    """

    if kprime_norm_est >= 1.0:
        raise WindowTooLongError("The derivative estimate " + repr(float(kprime_norm_est))
                                 + " is not below 1.")
    if residual_norm <= 0.0:
        return 0, False
    if kprime_norm_est <= residual_norm:
        return 1, False
    n = max(1, int(math.ceil(math.log(residual_norm) / math.log(kprime_norm_est))))
    while kprime_norm_est ** n > residual_norm:
        n += 1
    while n > 1 and kprime_norm_est ** (n - 1) <= residual_norm:
        n -= 1
    if n > n_max:
        return n_max, True
    return n, False


def kprime_norm_estimate(linearization, rng, n_directions=4, n_power=3, safety=1.2, analytic_bound=None):
    r"""
    Return safety times the largest ratio sup_norm(K' v) / sup_norm(v) seen over n_power successive
    applications to each of n_directions random unit directions, or the analytic bound when that is smaller.
    """

    ratio = 0.0
    for ix in range(n_directions):
        v = ne.random_direction(linearization.base, rng)
        for jx in range(n_power):
            image = linearization.apply(v)
            size = ds.sup_norm(v)
            image_size = ds.sup_norm(image)
            ratio = max(ratio, image_size / size)
            if image_size == 0.0:
                break
            v = image * (1.0 / image_size)
    estimate = safety * ratio
    if analytic_bound is not None:
        estimate = min(estimate, analytic_bound)
    return estimate


def approx_inverse_defect(linearization, n, rng, direction_count=2):
    r"""
    Return the measured norm of I - (I - K')(I + K' + ... + K'**n) = K'**(n+1): the largest
    sup_norm(K'**(n+1) w) over direction_count random unit directions w.
    """

    defect = 0.0
    for ix in range(direction_count):
        w = ne.random_direction(linearization.base, rng)
        for k in range(n + 1):
            w = linearization.apply(w)
        defect = max(defect, ds.sup_norm(w))
    return defect


def approx_newton_solve(u0, psi0, model, policy, params, cfg, ball_radius=None, rng=None,
                        defect_directions=2):
    r"""
    Run approximate Newton on S(u) = u - K(u) from u0 and return (trajectory, trace).

    Each step sets u <- u - [I + K'(u) + ... + K'(u)**n] S(u), with n from choose_truncation (adaptive mode)
    or policy.fixed_n.  The trace records n, the step-size inequality with kappa = M, the quadratic residual
    inequality and, when rng is given, the measured defect ||K'**(n+1)|| against M ||S(u)||.

    Description of argument(s):
    u0                              The starting Trajectory.  ||S(u0)|| <= 1/sigma is required.
    psi0                            The initial OrbitalSet.
    model                           A potentials.PotentialModel.
    policy                          A NeumannPolicy.
    params                          A newton_exact.NewtonParams whose kappa is M and sigma the approximate
                                    Newton sigma.
    cfg                             An evolution.PropagatorConfig.
    ball_radius                     Optional radius r.  sup_norm(u0) > r raises ConsistencyError.
    rng                             A numpy Generator for the defect directions (None skips them).
    defect_directions               The number of defect directions per iterate.
    """

    if params.kappa is None or params.sigma is None:
        raise ConfigurationError("kappa and sigma must be computed before approx_newton_solve.")
    trace = ne.IterationTrace("approx_newton")
    trace.floor = params.floor
    residual, k_u = ne.newton_residual(u0, psi0, model, cfg)
    residual_norm = ds.sup_norm(residual)
    basin = 1.0 / params.sigma if params.sigma > 0 else np.inf
    if residual_norm > basin and residual_norm >= params.floor:
        raise ConsistencyError("The starting residual " + repr(residual_norm) + " exceeds 1/sigma = "
                               + repr(basin) + ".  Run more Picard steps.")
    if ball_radius is not None and ds.sup_norm(u0) > ball_radius:
        raise ConsistencyError("sup_norm(u0) = " + repr(ds.sup_norm(u0)) + " lies outside the ball of radius "
                               + repr(ball_radius) + ".")
    trace.record(residual_norm)
    trace.info["truncation_mode"] = policy.mode
    trace.info["truncation_capped"] = False
    audit_applications = 0
    u = u0
    for k in range(1, params.max_newton_iters + 1):
        if residual_norm < params.floor:
            break
        linearization = ne.Linearization(u, psi0, model, cfg, k_base=k_u)
        if policy.mode == "fixed":
            n, capped = policy.fixed_n, False
        else:
            n, capped = choose_truncation(residual_norm, policy.K0, policy.n_max)
        if capped:
            trace.info["truncation_capped"] = True
            gp.lprint_timen("The Neumann order was capped at " + str(n) + ".")
        defect = None
        if rng is not None and model.coupled:
            defect = approx_inverse_defect(linearization, n, rng, defect_directions)
            audit_applications += (n + 1) * defect_directions
        elif rng is not None:
            defect = 0.0
        step_values = neumann_apply(linearization, residual, n)
        u = u - step_values
        previous = residual_norm
        residual, k_u = ne.newton_residual(u, psi0, model, cfg)
        residual_norm = ds.sup_norm(residual)
        step_norm = ds.sup_norm(step_values)
        trace.record(residual_norm, step_norm, neumann_order=n,
                     kanone=(step_norm, policy.M * previous),
                     kantwo=(residual_norm, 0.5 * params.h * params.sigma * previous ** 2),
                     defect=defect, m_times_residual=policy.M * previous, inner_iterations=n)
        gp.lprint_timen("Approximate Newton iterate " + str(k) + " (n = " + str(n) + "): residual "
                        + repr(residual_norm) + ".")
        if residual_norm > 1e3 * max(previous, 1e-300) and residual_norm > basin:
            raise NonConvergenceError("Approximate Newton diverged at iterate " + str(k) + ".", trace=trace)
    trace.converged = residual_norm < params.floor
    trace.info["audit_applications"] = audit_applications
    if not trace.converged:
        raise NonConvergenceError("Approximate Newton did not reach the residual floor " + repr(params.floor)
                                  + " in " + str(params.max_newton_iters) + " iterations.", trace=trace)
    return u, trace


def defect_condition_holds(trace):
    r"""
    Return True when every recorded defect is at most M times the preceding residual.
    """

    return all(defect is None or defect <= bound
               for defect, bound in zip(trace.defect_measured, trace.m_times_residual) if bound is not None)
