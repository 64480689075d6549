#!/usr/bin/env python

r"""
This module assembles the effective potential V_e = V + W*rho + Phi: the external potential families, the
mollified Hartree kernel with its zero-padded FFT convolution, and the Gaussian time-history
exchange-correlation model with its functional derivative.
"""

import os
import collections

import numpy as np
import scipy.fft

import gen_valid as gv
import discrete_space as ds
from solver_errors import ConfigurationError, StructuralError

fft_workers = int(os.environ.get("TDKS_NUM_THREADS", "0") or 0) or None

# Mean of 1/|x| over a unit cube centred on the origin, used for the unmollified 3D self term.
cube_self_interaction = 2.3800774


def offset_coordinates(grid):
    r"""
    Return the coordinate arrays of all grid point differences x_i - x_j: (2n-1) offsets per axis.
    """

    n = grid.points_per_axis
    offsets = grid.spacing * np.arange(-(n - 1), n)
    return tuple(np.meshgrid(*([offsets] * grid.dim), indexing="ij"))


class ConvolutionKernel(object):
    r"""
    A translation-invariant kernel sampled on the offset grid, applied by zero-padded FFT convolution:

    (kernel * f)(x_i) = h**dim * sum_j kernel(x_i - x_j) f(x_j)

    The offset grid covers every difference of two grid points, so the result is exact discrete convolution
    with f extended by zero outside the domain.

    Description of argument(s):
    grid                            The Grid.
    offset_values                   The kernel sampled on offset_coordinates(grid), shape (2n-1,)*dim.
    """

    def __init__(self, grid, offset_values):
        n = grid.points_per_axis
        offset_values = np.asarray(offset_values, dtype=float)
        if offset_values.shape != (2 * n - 1,) * grid.dim:
            raise ConfigurationError("The kernel is not sampled on the offset grid.")
        gv.valid_finite_array(offset_values, var_name="kernel_values", error_class=ConfigurationError)
        self.grid = grid
        self.offset_values = offset_values
        self.fft_shape = tuple([scipy.fft.next_fast_len(3 * n - 2, real=True)] * grid.dim)
        self.fft_axes = tuple(range(-grid.dim, 0))
        self._kernel_fft = scipy.fft.rfftn(offset_values, s=self.fft_shape, axes=self.fft_axes,
                                           workers=fft_workers)

    def convolve(self, field):
        r"""
        Return kernel * field.  field has shape (...,) + grid.shape and may be real or complex.
        """

        field = np.asarray(field)
        if np.iscomplexobj(field):
            return self.convolve(field.real) + 1j * self.convolve(field.imag)
        n = self.grid.points_per_axis
        product = scipy.fft.rfftn(field, s=self.fft_shape, axes=self.fft_axes, workers=fft_workers) \
            * self._kernel_fft
        full = scipy.fft.irfftn(product, s=self.fft_shape, axes=self.fft_axes, workers=fft_workers)
        window = (Ellipsis,) + (slice(n - 1, 2 * n - 1),) * self.grid.dim
        return self.grid.cell_volume * full[window]

    def value_at_offset(self, offset_index):
        r"""
        Return the kernel value at the integer grid offset (a dim-tuple, each in -(n-1)..(n-1)).
        """

        n = self.grid.points_per_axis
        return float(self.offset_values[tuple(np.asarray(offset_index) + n - 1)])

    def _axis_differences(self):
        h = self.grid.spacing
        return [np.diff(self.offset_values, axis=axis) / h for axis in range(self.grid.dim)]

    def l2_norm(self):
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.offset_values ** 2)))

    def gradient_lp_norm(self, p):
        r"""
        Return the sum over axes of the l^p norms of the forward differences (an upper bound for the l^p norm
        of the gradient magnitude).
        """
        return float(sum(ds.lp_norm_values(self.grid, d, p) for d in self._axis_differences()))

    def gradient_l1_norm(self):
        return self.gradient_lp_norm(1)

    def gradient_l2_norm(self):
        return float(np.sqrt(sum(self.grid.cell_volume * np.sum(d ** 2) for d in self._axis_differences())))

    def product_constant(self, E1, E3):
        r"""
        Return C with ||(kernel * (conj(f) g)) psi||_H10 <= C ||f||_H10 ||g||_H10 ||psi||_H10:
        ||kernel||_l2 E3**2 + E1**3 ||grad kernel||_l1.
        """
        return self.l2_norm() * E3 ** 2 + E1 ** 3 * self.gradient_l1_norm()

    def norms(self):
        return collections.OrderedDict([("kernel_l2", self.l2_norm()),
                                        ("kernel_gradient_l1", self.gradient_l1_norm()),
                                        ("kernel_gradient_l2", self.gradient_l2_norm())])


def mollified_coulomb(grid, distance, radius):
    r"""
    Return the mollified Coulomb kernel at the given distances.

    1D: 1/sqrt(distance**2 + radius**2) (softened Coulomb; radius must be positive).
    3D: 1/distance for distance >= radius, the cap value 1/radius for distance <= radius/2 and a C1 cubic
    blend in between.  With radius 0 the origin gets the cell-averaged value 2.3800774/h.
    """

    if grid.dim == 1:
        return 1.0 / np.sqrt(distance ** 2 + radius ** 2)
    values = np.empty_like(distance)
    if radius == 0.0:
        at_origin = distance == 0.0
        values[~at_origin] = 1.0 / distance[~at_origin]
        values[at_origin] = cube_self_interaction / grid.spacing
        return values
    outer = distance >= radius
    inner = distance <= radius / 2.0
    blend = ~outer & ~inner
    values[outer] = 1.0 / distance[outer]
    values[inner] = 1.0 / radius
    s = (distance[blend] - radius / 2.0) / (radius / 2.0)
    values[blend] = 1.0 / radius + (s ** 2 - s ** 3) / (2.0 * radius)
    return values


class HartreeKernel(ConvolutionKernel):
    r"""
    The coupling-scaled mollified Coulomb kernel lambda * W_a.

    Every offset lies within the domain diameter, so truncation beyond diam(Omega) never changes a sampled
    value.

    Description of argument(s):
    grid                            The Grid.
    coupling                        The multiplier lambda (nonnegative).
    mollification_radius            a.  None selects 2h.  Must be positive in 1D.
    """

    def __init__(self, grid, coupling=1.0, mollification_radius=None):
        mollification_radius = 2.0 * grid.spacing if mollification_radius is None \
            else float(mollification_radius)
        gv.valid_float(coupling, lower=0.0, var_name="coupling", error_class=ConfigurationError)
        if grid.dim == 1:
            gv.valid_float(mollification_radius, lower=0.0, lower_open=True, var_name="mollification_radius",
                           error_class=ConfigurationError)
        else:
            gv.valid_float(mollification_radius, lower=0.0, var_name="mollification_radius",
                           error_class=ConfigurationError)
        self.coupling = float(coupling)
        self.mollification_radius = mollification_radius
        distance = np.sqrt(sum(x ** 2 for x in offset_coordinates(grid)))
        super(HartreeKernel, self).__init__(
            grid, self.coupling * mollified_coulomb(grid, distance, mollification_radius))


class GaussianKernel(ConvolutionKernel):
    r"""
    The kernel exp(-|xi|**2 / (2 width**2)).
    """

    def __init__(self, grid, width):
        gv.valid_float(width, lower=0.0, lower_open=True, var_name="width", error_class=ConfigurationError)
        self.width = float(width)
        squared = sum(x ** 2 for x in offset_coordinates(grid))
        super(GaussianKernel, self).__init__(grid, np.exp(-squared / (2.0 * width ** 2)))


def _zero_values(grid, t, params):
    return np.zeros(grid.shape)


def _harmonic_values(grid, t, params):
    return 0.5 * params["k"] * grid.squared_distance(params["center"])


def _driven_harmonic_values(grid, t, params):
    drive = 1.0 + params["amplitude"] * np.sin(params["frequency"] * t)
    return 0.5 * params["k"] * grid.squared_distance(params["center"]) * drive


def _driven_harmonic_rate(grid, t, params):
    drive_rate = params["amplitude"] * params["frequency"] * np.cos(params["frequency"] * t)
    return 0.5 * params["k"] * grid.squared_distance(params["center"]) * drive_rate


# family name: (default parameters, value function, analytic time derivative)
external_families = collections.OrderedDict([
    ("zero", (collections.OrderedDict(), _zero_values, _zero_values)),
    ("harmonic", (collections.OrderedDict([("k", 1.0), ("center", None)]), _harmonic_values, _zero_values)),
    ("driven_harmonic", (collections.OrderedDict([("k", 1.0), ("center", None), ("amplitude", 0.1),
                                                  ("frequency", 1.0)]),
                         _driven_harmonic_values, _driven_harmonic_rate)),
])


class ExternalPotential(object):
    r"""
    An external potential family selected by name.

    zero                            V = 0.
    harmonic                        V = k/2 |x - center|**2.
    driven_harmonic                 V = k/2 |x - center|**2 (1 + amplitude sin(frequency t)), |amplitude| < 1.

    Every family is nonnegative and has an analytic time derivative.  center defaults to the domain centre.

    Description of argument(s):
    grid                            The Grid.
    family                          The family name.
    params                          A dictionary of family parameters.  Missing ones take their defaults.
    """

    def __init__(self, grid, family="zero", params=None):
        if family not in external_families:
            raise ConfigurationError("Unknown external potential family \"" + str(family) + "\".  Valid: "
                                     + ", ".join(external_families.keys()))
        defaults, self._values_func, self._rate_func = external_families[family]
        params = params or {}
        unknown = [key for key in params if key not in defaults]
        if unknown:
            raise ConfigurationError("Unknown parameters for external family \"" + family + "\": "
                                     + ", ".join(unknown))
        self.params = collections.OrderedDict(defaults)
        self.params.update(params)
        if "center" in self.params and self.params["center"] is None:
            self.params["center"] = grid.axis_length / 2.0
        if "k" in self.params:
            gv.valid_float(self.params["k"], lower=0.0, var_name="k", error_class=ConfigurationError)
        if "amplitude" in self.params:
            gv.valid_float(self.params["amplitude"], lower=-1.0, upper=1.0, lower_open=True, upper_open=True,
                           var_name="amplitude", error_class=ConfigurationError)
            gv.valid_float(self.params["frequency"], var_name="frequency", error_class=ConfigurationError)
        self.grid = grid
        self.family = family

    @property
    def is_static(self):
        return self.family != "driven_harmonic" or self.params["amplitude"] == 0.0

    def values(self, t):
        return self._values_func(self.grid, t, self.params)

    def time_derivative(self, t):
        return self._rate_func(self.grid, t, self.params)

    def max_abs_time_derivative(self, t_end, n_samples=201):
        r"""
        Return max |dV/dt| sampled on n_samples uniform times in [0, t_end].
        """

        if self.is_static:
            return 0.0
        return float(max(np.max(np.abs(self.time_derivative(t)))
                         for t in np.linspace(0.0, t_end, n_samples)))

    def gradient_l3_sup(self):
        r"""
        Return an upper bound for sup_t ||grad V(t)||_{L3}.
        """

        if self.family == "zero":
            return 0.0
        peak = 1.0 + abs(self.params.get("amplitude", 0.0))
        magnitude = self.params["k"] * np.sqrt(self.grid.squared_distance(self.params["center"])) * peak
        return ds.lp_norm_values(self.grid, magnitude, 3)

    def as_dict(self):
        return collections.OrderedDict([("family", self.family)] + list(self.params.items()))


class GaussianHistoryXC(object):
    r"""
    A non-local exchange-correlation history model:

    phi(x, t, rho) = c_xc (g * rho(t))(x),  Phi(t) = Phi0 + int_0^t phi ds,  Phi0 = c_xc (g * rho(0))

    with g the Gaussian kernel of the given width.  Phi is nonnegative for nonnegative densities and its
    functional derivative, dPhi/drho[d](t) = c_xc g * d(0) + int_0^t c_xc g * d(s) ds, does not depend on the
    base density.  History integrals use the trapezoid rule on the density knots, with the density linearly
    interpolated between knots.

    Description of argument(s):
    grid                            The Grid.
    c_xc                            The nonnegative strength.
    width                           The Gaussian width.
    declared_deriv_bound            Optional override of the derivative bound constant.
    declared_lipschitz              Optional override of the Lipschitz constant.
    """

    def __init__(self, grid, c_xc=0.1, width=1.0, declared_deriv_bound=None, declared_lipschitz=None):
        gv.valid_float(c_xc, lower=0.0, var_name="c_xc", error_class=ConfigurationError)
        self.grid = grid
        self.c_xc = float(c_xc)
        self.kernel = GaussianKernel(grid, width)
        self.declared_deriv_bound = declared_deriv_bound
        self.declared_lipschitz = declared_lipschitz

    def rate(self, rho):
        r"""
        Return phi for a density (shape (...,) + grid.shape).
        """
        return self.c_xc * self.kernel.convolve(rho)

    def phi0(self, rho_initial):
        return self.rate(rho_initial)

    def history(self, rates, dt, start=None):
        r"""
        Return Phi on every knot from the per-knot rates by trapezoid accumulation.

        Description of argument(s):
        rates                           The per-knot phi values, shape (n_knots,) + grid.shape.
        dt                              The knot spacing.
        start                           Phi at the first knot.  Defaults to rates[0] (Phi0 of the initial
                                        density).
        """

        first = rates[:1] if start is None else np.asarray(start, dtype=float)[None]
        increments = 0.5 * dt * (rates[1:] + rates[:-1])
        return np.concatenate([first, first + np.cumsum(increments, axis=0)], axis=0)

    def deriv_bound(self, E1, E3, t_end):
        r"""
        Return the constant C with ||(dPhi/drho[fg]) psi||_{H10} <= C ||f|| ||g|| ||psi|| on [0, t_end].
        """

        if self.declared_deriv_bound is not None:
            return float(self.declared_deriv_bound)
        return self.c_xc * (1.0 + t_end) * self.kernel.product_constant(E1, E3)

    def lipschitz(self, E1, E3, t_end, ball_radius):
        r"""
        Return the Lipschitz constant of Phi as a multiplier on the ball of the given radius.
        """

        if self.declared_lipschitz is not None:
            return float(self.declared_lipschitz)
        return 2.0 * ball_radius * self.deriv_bound(E1, E3, t_end)

    def as_dict(self):
        return collections.OrderedDict([("model", "gaussian_history"), ("c_xc", self.c_xc),
                                        ("width", self.kernel.width)])


class PotentialModel(object):
    r"""
    The external potential, the Hartree kernel and the exchange-correlation model together with hbar and the
    effective mass.

    Description of argument(s):
    grid                            The Grid.
    external                        An ExternalPotential (None selects the zero family).
    hartree_kernel                  A HartreeKernel, or None when Hartree is disabled.
    xc                              A GaussianHistoryXC, or None.
    hbar                            The reduced Planck constant.
    mass                            The effective mass.
    xc_start                        Optional Phi at the first knot of every density path (a window that
                                    continues an earlier one).  None starts from Phi0 of the path.
    """

    def __init__(self, grid, external=None, hartree_kernel=None, xc=None, hbar=1.0, mass=1.0,
                 xc_start=None):
        gv.valid_float(hbar, lower=0.0, lower_open=True, var_name="hbar", error_class=ConfigurationError)
        gv.valid_float(mass, lower=0.0, lower_open=True, var_name="mass", error_class=ConfigurationError)
        self.grid = grid
        self.external = external or ExternalPotential(grid, "zero")
        self.hartree_kernel = hartree_kernel
        self.xc = xc
        self.hbar = float(hbar)
        self.mass = float(mass)
        self.xc_start = None if xc_start is None else np.asarray(xc_start, dtype=float)

    @property
    def hartree_enabled(self):
        return self.hartree_kernel is not None

    @property
    def coupled(self):
        r"""
        True when the effective potential depends on the density.
        """
        return self.hartree_enabled or self.xc is not None

    def decoupled(self):
        r"""
        Return a copy of this model with Hartree and exchange-correlation removed.
        """
        return PotentialModel(self.grid, self.external, None, None, self.hbar, self.mass)

    def with_xc_start(self, phi_start):
        r"""
        Return a copy of this model whose density paths start the XC history from phi_start.
        """

        if self.xc is None:
            return self
        phi_start = np.asarray(phi_start, dtype=float)
        if phi_start.shape != self.grid.shape:
            raise StructuralError("The starting XC history has shape " + str(phi_start.shape) + ", expected "
                                  + str(self.grid.shape) + ".")
        return PotentialModel(self.grid, self.external, self.hartree_kernel, self.xc, self.hbar, self.mass,
                              xc_start=phi_start)

    def hartree(self, rho):
        r"""
        Return W_a * rho for a DensityField or density array.
        """

        if not self.hartree_enabled:
            raise ConfigurationError("The Hartree term is disabled in this model.")
        rho = rho.values if isinstance(rho, ds.DensityField) else np.asarray(rho, dtype=float)
        return self.hartree_kernel.convolve(rho)

    def xc_phi(self, rho_path, t):
        r"""
        Return Phi(t) = Phi0 + trapezoid integral of phi over [0, t] along the density path.
        """

        if self.xc is None:
            raise ConfigurationError("No exchange-correlation model is configured.")
        return PotentialPath(self, rho_path).xc_at(t)

    def effective_potential(self, t, rho_path):
        r"""
        Return V(t) + W * rho(t) + Phi(t) using the density path (linearly interpolated at t).
        """

        return PotentialPath(self, rho_path).at(t)

    def xc_derivative_apply(self, rho_base_path, pair_product, t=None):
        r"""
        Apply dPhi/drho to a path of density increments (e.g. 2 Re(conj(Psi) omega)) and return the field path
        on every knot, or the field at time t when t is given.

        Description of argument(s):
        rho_base_path                   The base DensityPath.  The built-in model's derivative does not
                                        depend on it; it supplies the knots.
        pair_product                    A real array of shape (n_knots,) + grid.shape.
        t                               Optional evaluation time.
        """

        if self.xc is None:
            raise ConfigurationError("No exchange-correlation model is configured.")
        increment_path = ds.DensityPath(self.grid, rho_base_path.time_knots, pair_product)
        path = PotentialPath(self, increment_path, include_external=False, include_hartree=False)
        if t is None:
            return path.xc_knots
        return path.xc_at(t)

    def as_dict(self):
        result = collections.OrderedDict()
        result["hbar"] = self.hbar
        result["mass"] = self.mass
        result["external"] = self.external.as_dict()
        result["hartree_enabled"] = self.hartree_enabled
        if self.hartree_enabled:
            result["coupling"] = self.hartree_kernel.coupling
            result["mollification_radius"] = self.hartree_kernel.mollification_radius
        result["xc"] = self.xc.as_dict() if self.xc is not None else None
        return result


class PotentialPath(object):
    r"""
    The effective potential along a fixed density path, with the knot values of the Hartree field, the XC
    rate and the XC history precomputed.

    Hartree and phi are linear in the density and the density is linear between knots, so
    at(t) = V(t) + lerp(hartree knots) + Phi_k + (t - t_k)/2 (phi_k + phi(t)) is exact for that path.

    The density path values may be signed increments (used for derivatives): pass include_external=False so
    that only the parts linear in the density are evaluated.  When the model carries xc_start, Phi starts
    from it on a density path and from zero on an increment path.

    Description of argument(s):
    model                           The PotentialModel.
    rho_path                        The DensityPath.
    include_external                Add V(t).
    include_hartree                 Add the Hartree field.
    """

    def __init__(self, model, rho_path, include_external=True, include_hartree=True):
        ds.same_grid(model.grid, rho_path.grid)
        self.model = model
        self.rho_path = rho_path
        self.include_external = include_external
        values = rho_path.values
        self.hartree_knots = model.hartree_kernel.convolve(values) \
            if (include_hartree and model.hartree_enabled) else None
        if model.xc is not None:
            self.rate_knots = model.xc.rate(values)
            start = model.xc_start
            if start is not None and not include_external:
                start = np.zeros(model.grid.shape)
            self.xc_knots = model.xc.history(self.rate_knots, rho_path.dt, start)
        else:
            self.rate_knots = None
            self.xc_knots = None

    def xc_at(self, t):
        k, theta = self.rho_path.locate(t)
        if theta == 0.0:
            return self.xc_knots[k]
        rate_t = (1.0 - theta) * self.rate_knots[k] + theta * self.rate_knots[k + 1]
        return self.xc_knots[k] + 0.5 * theta * self.rho_path.dt * (self.rate_knots[k] + rate_t)

    def rate_at(self, t):
        k, theta = self.rho_path.locate(t)
        if theta == 0.0:
            return self.rate_knots[k]
        return (1.0 - theta) * self.rate_knots[k] + theta * self.rate_knots[k + 1]

    def at(self, t):
        k, theta = self.rho_path.locate(t)
        result = self.model.external.values(t) if self.include_external else np.zeros(self.model.grid.shape)
        if self.hartree_knots is not None:
            if theta == 0.0:
                result = result + self.hartree_knots[k]
            else:
                result = result + (1.0 - theta) * self.hartree_knots[k] + theta * self.hartree_knots[k + 1]
        if self.xc_knots is not None:
            result = result + self.xc_at(t)
        return result

    def knot(self, knot_ix):
        return self.at(self.rho_path.time_knots[knot_ix])
