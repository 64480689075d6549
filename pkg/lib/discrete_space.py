#!/usr/bin/env python

r"""
This module provides the spatial grid, the discrete function types (OrbitalSet, Trajectory, DensityField,
DensityPath) and the discrete Sobolev norms that every solver contract is stated in.

Conventions:
- A Grid stores interior points only.  The homogeneous Dirichlet boundary values are implied zeros.
- Orbital values have shape (n_orbitals,) + grid.shape.  Trajectory values have shape
  (n_knots, n_orbitals) + grid.shape.
- Integrals use the rectangle rule h**dim * sum.
- Gradients are forward differences on the n+1 edges of each axis with zero ghost values, so that
  <-laplacian(u), u> equals the squared gradient norm exactly.
"""

import functools
import collections

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

import gen_valid as gv
from solver_errors import StructuralError, RangeError

max_points_3d = 24
knot_tolerance = 1e-12


class Grid(object):
    r"""
    Uniform interior-point grid on the box [0, axis_length]**dim.

    Description of argument(s):
    dim                             1 or 3.
    points_per_axis                 The number of interior points per axis (at least 2).
    axis_length                     The length of each axis.
    """

    def __init__(self, dim, points_per_axis, axis_length):
        gv.valid_value(dim, valid_values=[1, 3], var_name="dim", error_class=StructuralError)
        gv.valid_integer(points_per_axis, lower=2, var_name="points_per_axis", error_class=StructuralError)
        gv.valid_float(axis_length, lower=0.0, lower_open=True, var_name="axis_length",
                       error_class=StructuralError)
        if dim == 3:
            gv.valid_range(points_per_axis, upper=max_points_3d, var_name="points_per_axis",
                           error_class=StructuralError)
        self.dim = int(dim)
        self.points_per_axis = int(points_per_axis)
        self.axis_length = float(axis_length)

    @property
    def spacing(self):
        return self.axis_length / (self.points_per_axis + 1)

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    @property
    def size(self):
        return self.points_per_axis ** self.dim

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    @property
    def domain_volume(self):
        return self.axis_length ** self.dim

    @property
    def spatial_axes(self):
        r"""
        The trailing array axes which are spatial, for arrays shaped (...,) + grid.shape.
        """
        return tuple(range(-self.dim, 0))

    def axis_points(self):
        return self.spacing * np.arange(1, self.points_per_axis + 1)

    def coordinates(self):
        r"""
        Return a tuple of dim coordinate arrays, each of shape grid.shape.
        """
        x = self.axis_points()
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def squared_distance(self, center):
        r"""
        Return |x - center|**2 on the grid.  center is a scalar (same on every axis) or a dim-sequence.
        """
        center = np.broadcast_to(np.asarray(center, dtype=float), (self.dim,))
        return sum((x - c) ** 2 for x, c in zip(self.coordinates(), center))

    def key(self):
        return (self.dim, self.points_per_axis, self.axis_length)

    def __eq__(self, other):
        return isinstance(other, Grid) and self.key() == other.key()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return "Grid(dim=%d, points_per_axis=%d, axis_length=%r)" % self.key()

    def as_dict(self):
        return collections.OrderedDict([("dim", self.dim), ("points_per_axis", self.points_per_axis),
                                        ("axis_length", self.axis_length), ("spacing", self.spacing)])


def check_values_shape(grid, values, leading_dims, var_name="values"):
    r"""
    Raise a StructuralError unless values has leading_dims leading axes followed by grid.shape.
    """

    if np.ndim(values) != leading_dims + grid.dim or np.shape(values)[leading_dims:] != grid.shape:
        raise StructuralError("Array does not match the grid:\n"
                              + "  " + var_name + "_shape: " + str(np.shape(values)) + "\n"
                              + "  grid_shape: " + str(grid.shape))


def same_grid(grid1, grid2):
    if grid1 != grid2:
        raise StructuralError("Mismatched grids: " + repr(grid1) + " vs " + repr(grid2))


class OrbitalSet(object):
    r"""
    The state Psi at one time: n_orbitals complex orbitals sampled on the grid interior.

    Description of argument(s):
    grid                            The Grid.
    values                          A complex array of shape (n_orbitals,) + grid.shape.  A single orbital
                                    of shape grid.shape is accepted and promoted.
    """

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape == grid.shape:
            values = values[np.newaxis]
        check_values_shape(grid, values, 1)
        gv.valid_finite_array(values, var_name="orbital_values", error_class=StructuralError)
        self.grid = grid
        self.values = values

    @property
    def n_orbitals(self):
        return self.values.shape[0]

    def density(self):
        return DensityField(self.grid, density_values(self.values))

    def copy(self):
        return OrbitalSet(self.grid, self.values.copy())

    def __repr__(self):
        return "OrbitalSet(" + repr(self.grid) + ", n_orbitals=" + str(self.n_orbitals) + ")"


class DensityField(object):
    r"""
    A real nonnegative field on the grid.

    Description of argument(s):
    grid                            The Grid.
    values                          A real array of shape grid.shape.
    tolerance                       Negative roundoff that is accepted.
    """

    def __init__(self, grid, values, tolerance=1e-13):
        values = np.asarray(values, dtype=float)
        check_values_shape(grid, values, 0)
        gv.valid_nonnegative_array(values, tolerance=tolerance, var_name="density_values",
                                   error_class=StructuralError)
        self.grid = grid
        self.values = values


def density_values(orbital_values):
    r"""
    Return sum_j |psi_j|**2 for orbital values shaped (n_orbitals,) + grid.shape.
    """

    return np.sum(np.abs(orbital_values) ** 2, axis=0)


def uniform_knots(t_end, n_steps, t_start=0.0):
    r"""
    Return n_steps + 1 uniform time knots from t_start to t_end.
    """

    return t_start + (t_end - t_start) * np.arange(n_steps + 1) / float(max(n_steps, 1))


def check_uniform_knots(time_knots):
    r"""
    Raise a StructuralError unless time_knots is a strictly increasing, uniform (relative 1e-12) sequence.
    """

    time_knots = np.asarray(time_knots, dtype=float)
    if time_knots.ndim != 1 or time_knots.size == 0:
        raise StructuralError("The time knots must be a non-empty one-dimensional sequence.")
    if time_knots.size == 1:
        return time_knots
    steps = np.diff(time_knots)
    if np.any(steps <= 0):
        raise StructuralError("The time knots are not strictly increasing.")
    dt = (time_knots[-1] - time_knots[0]) / (time_knots.size - 1)
    if np.max(np.abs(steps - dt)) > knot_tolerance * max(abs(time_knots[-1]), dt, 1.0):
        raise StructuralError("The time knots are not uniform to relative tolerance "
                              + repr(knot_tolerance) + ".")
    return time_knots


class Trajectory(object):
    r"""
    A time-knotted path of orbital sets: the discrete element of C(J; H^1_0).

    Trajectories support +, - (with trajectories on the same knots), scalar * and unary -, which act on the
    values and return new trajectories.

    Description of argument(s):
    grid                            The Grid.
    time_knots                      Uniform, strictly increasing times.
    values                          A complex array of shape (n_knots, n_orbitals) + grid.shape.
    """

    def __init__(self, grid, time_knots, values):
        time_knots = check_uniform_knots(time_knots)
        values = np.asarray(values, dtype=complex)
        check_values_shape(grid, values, 2)
        if values.shape[0] != time_knots.size:
            raise StructuralError("Knot count mismatch: " + str(values.shape[0]) + " states for "
                                  + str(time_knots.size) + " knots.")
        if values.shape[1] < 1:
            raise StructuralError("A trajectory needs at least one orbital.")
        self.grid = grid
        self.time_knots = time_knots
        self.values = values

    @classmethod
    def constant(cls, state, time_knots):
        r"""
        Return the trajectory which equals state at every knot.
        """
        time_knots = np.asarray(time_knots, dtype=float)
        values = np.broadcast_to(state.values, (time_knots.size,) + state.values.shape).copy()
        return cls(state.grid, time_knots, values)

    @classmethod
    def zeros_like(cls, other):
        return cls(other.grid, other.time_knots, np.zeros_like(other.values))

    @property
    def n_knots(self):
        return self.time_knots.size

    @property
    def n_orbitals(self):
        return self.values.shape[1]

    @property
    def dt(self):
        if self.n_knots < 2:
            return 0.0
        return (self.time_knots[-1] - self.time_knots[0]) / (self.n_knots - 1)

    @property
    def window(self):
        return (self.time_knots[0], self.time_knots[-1])

    def state(self, knot_ix):
        return OrbitalSet(self.grid, self.values[knot_ix])

    def initial_state(self):
        return self.state(0)

    def final_state(self):
        return self.state(-1)

    def density_path(self):
        return DensityPath(self.grid, self.time_knots, np.sum(np.abs(self.values) ** 2, axis=1))

    def copy(self):
        return Trajectory(self.grid, self.time_knots.copy(), self.values.copy())

    def like(self, values):
        r"""
        Return a trajectory on the same grid and knots with the given values.
        """
        return Trajectory(self.grid, self.time_knots, values)

    def _check_compatible(self, other):
        same_grid(self.grid, other.grid)
        if self.values.shape != other.values.shape \
                or np.max(np.abs(self.time_knots - other.time_knots)) > knot_tolerance * max(
                    1.0, abs(self.time_knots[-1])):
            raise StructuralError("Trajectories do not share knots and orbital count.")

    def __add__(self, other):
        self._check_compatible(other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.like(self.values - other.values)

    def __mul__(self, scalar):
        return self.like(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)

    def __repr__(self):
        return "Trajectory(" + repr(self.grid) + ", n_knots=" + str(self.n_knots) + ", n_orbitals=" \
            + str(self.n_orbitals) + ")"


def concatenate(trajectories):
    r"""
    Join trajectories whose windows abut (the last knot of one is the first knot of the next, with equal
    states) into one trajectory.
    """

    if not trajectories:
        raise StructuralError("Nothing to concatenate.")
    first = trajectories[0]
    knots = [first.time_knots]
    values = [first.values]
    for trajectory in trajectories[1:]:
        same_grid(first.grid, trajectory.grid)
        knots.append(trajectory.time_knots[1:])
        values.append(trajectory.values[1:])
    return Trajectory(first.grid, np.concatenate(knots), np.concatenate(values))


class DensityPath(object):
    r"""
    A density on every time knot.  Between knots the density is linearly interpolated.

    Description of argument(s):
    grid                            The Grid.
    time_knots                      Uniform, strictly increasing times.
    values                          A real array of shape (n_knots,) + grid.shape.
    """

    def __init__(self, grid, time_knots, values):
        time_knots = check_uniform_knots(time_knots)
        values = np.asarray(values, dtype=float)
        check_values_shape(grid, values, 1, var_name="density_path")
        if values.shape[0] != time_knots.size:
            raise StructuralError("Knot count mismatch in density path.")
        self.grid = grid
        self.time_knots = time_knots
        self.values = values

    @classmethod
    def zeros(cls, grid, time_knots):
        time_knots = np.asarray(time_knots, dtype=float)
        return cls(grid, time_knots, np.zeros((time_knots.size,) + grid.shape))

    @classmethod
    def from_function(cls, grid, time_knots, density_function):
        r"""
        Sample density_function(t) (returning an array of shape grid.shape) on the knots.
        """
        time_knots = np.asarray(time_knots, dtype=float)
        return cls(grid, time_knots, np.array([density_function(t) for t in time_knots]))

    @property
    def n_knots(self):
        return self.time_knots.size

    @property
    def dt(self):
        if self.n_knots < 2:
            return 0.0
        return (self.time_knots[-1] - self.time_knots[0]) / (self.n_knots - 1)

    def locate(self, t):
        r"""
        Return (k, theta) such that t = t_k + theta * dt with 0 <= theta <= 1.  Times outside the path (beyond
        the knot tolerance) raise a RangeError.
        """

        t0, t1 = self.time_knots[0], self.time_knots[-1]
        slack = knot_tolerance * max(1.0, abs(t1))
        if t < t0 - slack or t > t1 + slack:
            raise RangeError("Time " + repr(float(t)) + " lies outside the density path ["
                             + repr(float(t0)) + ", " + repr(float(t1)) + "].")
        if self.n_knots == 1:
            return 0, 0.0
        position = (min(max(t, t0), t1) - t0) / self.dt
        k = min(int(np.floor(position)), self.n_knots - 2)
        return k, position - k

    def at(self, t):
        k, theta = self.locate(t)
        if theta == 0.0:
            return self.values[k]
        return (1.0 - theta) * self.values[k] + theta * self.values[k + 1]

    def knot(self, knot_ix):
        return DensityField(self.grid, self.values[knot_ix])


# Discrete calculus.

def inner(grid, f, g):
    r"""
    Return the L2 inner product h**dim * sum(conj(f) * g) over all entries.
    """

    return grid.cell_volume * np.vdot(f, g)


def edge_gradients(grid, values):
    r"""
    Return a list with one forward-difference array per spatial axis.  Each array has n+1 entries along its
    axis (zero ghost values on both ends).

    Description of argument(s):
    grid                            The Grid.
    values                          An array whose trailing axes are grid.shape.
    """

    lead = values.ndim - grid.dim
    gradients = []
    for axis in range(grid.dim):
        pad_width = [(0, 0)] * values.ndim
        pad_width[lead + axis] = (1, 1)
        gradients.append(np.diff(np.pad(values, pad_width), axis=lead + axis) / grid.spacing)
    return gradients


def gradient_norm_squared(grid, values):
    return grid.cell_volume * sum(np.sum(np.abs(d) ** 2) for d in edge_gradients(grid, values))


def laplacian_values(grid, values):
    r"""
    Apply the second-order Dirichlet Laplacian to an array whose trailing axes are grid.shape.
    """

    lead = values.ndim - grid.dim
    result = np.zeros_like(values)
    h2 = grid.spacing ** 2
    for axis in range(grid.dim):
        pad_width = [(0, 0)] * values.ndim
        pad_width[lead + axis] = (1, 1)
        padded = np.pad(values, pad_width)
        upper = [slice(None)] * values.ndim
        lower = [slice(None)] * values.ndim
        upper[lead + axis] = slice(2, None)
        lower[lead + axis] = slice(None, -2)
        result = result + (padded[tuple(upper)] + padded[tuple(lower)] - 2.0 * values) / h2
    return result


@functools.lru_cache(maxsize=16)
def laplacian_matrix(grid):
    r"""
    Return the sparse (CSR) Dirichlet Laplacian on the flattened grid (C order), scaled by 1/h**2.
    """

    n = grid.points_per_axis
    ones = np.ones(n)
    lap1 = sparse.diags([ones[:-1], -2.0 * ones, ones[:-1]], [-1, 0, 1], shape=(n, n), format="csr")
    eye = sparse.identity(n, format="csr")
    if grid.dim == 1:
        lap = lap1
    else:
        lap = sparse.kron(sparse.kron(lap1, eye), eye) + sparse.kron(sparse.kron(eye, lap1), eye) \
            + sparse.kron(sparse.kron(eye, eye), lap1)
    return (lap / grid.spacing ** 2).tocsr()


@functools.lru_cache(maxsize=16)
def helmholtz_factor(grid):
    r"""
    Return a factorized solver for (I - laplacian).
    """

    matrix = sparse.identity(grid.size, format="csc") - laplacian_matrix(grid).tocsc()
    return sparse_linalg.factorized(matrix)


def l2_norm_values(grid, values):
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(values) ** 2)))


def h10_norm_values(grid, values):
    r"""
    Return sqrt(||u||_L2**2 + sum_a ||D_a u||**2) with D_a the forward edge differences including the two
    Dirichlet boundary edges.  Summation by parts gives sum_a ||D_a u||**2 = <u, -laplacian u>, so this norm
    is the one induced by the discrete Laplacian.  The centered-difference gradient gives an equivalent
    norm but loses the identity.
    """

    l2_squared = grid.cell_volume * np.sum(np.abs(values) ** 2)
    return float(np.sqrt(l2_squared + gradient_norm_squared(grid, values)))


def hm1_norm_values(grid, values):
    r"""
    Return the discrete dual norm sqrt(<f, (I - laplacian)^-1 f>) summed over the leading (orbital) axes.
    """

    solve = helmholtz_factor(grid)
    flat = np.reshape(values, (-1, grid.size))
    total = 0.0
    for row in flat:
        total += np.real(np.vdot(row, solve(row.real) + 1j * solve(row.imag)))
    return float(np.sqrt(max(grid.cell_volume * total, 0.0)))


def magnitude(orbital_values):
    r"""
    Return the pointwise magnitude sqrt(sum_j |psi_j|**2) of orbital values shaped (n_orbitals,) + grid.shape.
    """

    return np.sqrt(np.sum(np.abs(orbital_values) ** 2, axis=0))


def lp_norm_values(grid, field, p):
    r"""
    Return the discrete L^p norm of a single field (shape grid.shape, real or complex).  p may be np.inf.
    """

    field = np.abs(field)
    if np.isinf(p):
        return float(np.max(field)) if field.size else 0.0
    return float((grid.cell_volume * np.sum(field ** p)) ** (1.0 / p))


def norm(state, which="H10"):
    r"""
    Return the L2, H10 or H-1 norm of an OrbitalSet.

    Description of argument(s):
    state                           An OrbitalSet.
    which                           "L2", "H10" or "H-1".
    """

    gv.valid_value(which, valid_values=["L2", "H10", "H-1"], var_name="which")
    check_values_shape(state.grid, state.values, 1)
    if which == "L2":
        return l2_norm_values(state.grid, state.values)
    if which == "H10":
        return h10_norm_values(state.grid, state.values)
    return hm1_norm_values(state.grid, state.values)


def lp_norm(state, p):
    r"""
    Return the L^p norm of the pointwise magnitude of an OrbitalSet.
    """

    return lp_norm_values(state.grid, magnitude(state.values), p)


def knot_norms(trajectory, which="H10"):
    r"""
    Return the array of per-knot norms of a trajectory.
    """

    grid = trajectory.grid
    if which == "L2":
        return np.array([l2_norm_values(grid, v) for v in trajectory.values])
    if which == "H10":
        return np.array([h10_norm_values(grid, v) for v in trajectory.values])
    return np.array([hm1_norm_values(grid, v) for v in trajectory.values])


def sup_norm(trajectory):
    r"""
    Return the C(J; H^1_0) norm: the maximum over knots of the H10 norm.
    """

    if trajectory is None or trajectory.n_knots == 0:
        raise StructuralError("The trajectory is empty.")
    return float(np.max(knot_norms(trajectory, "H10")))


def laplacian(state):
    r"""
    Return the discrete Laplacian of an OrbitalSet as an OrbitalSet on the same grid.
    """

    check_values_shape(state.grid, state.values, 1)
    return OrbitalSet(state.grid, laplacian_values(state.grid, state.values))


def h10_inner(grid, f, g):
    r"""
    Return the H10 inner product <f, g> + <Df, Dg>.
    """

    result = inner(grid, f, g)
    for df, dg in zip(edge_gradients(grid, f), edge_gradients(grid, g)):
        result += grid.cell_volume * np.vdot(df, dg)
    return result


# Sample fields.

def sine_mode(grid, modes=1):
    r"""
    Return the Dirichlet eigenfunction prod_a sin(k_a pi x_a / L) on the grid.

    Description of argument(s):
    grid                            The Grid.
    modes                           An integer (same on every axis) or a dim-sequence of integers.
    """

    modes = np.broadcast_to(np.asarray(modes), (grid.dim,))
    field = np.ones(grid.shape)
    for x, k in zip(grid.coordinates(), modes):
        field = field * np.sin(k * np.pi * x / grid.axis_length)
    return field


def laplacian_eigenvalue(grid, modes=1):
    r"""
    Return the eigenvalue of the discrete Laplacian for sine_mode(grid, modes).
    """

    modes = np.broadcast_to(np.asarray(modes), (grid.dim,))
    h = grid.spacing
    return float(sum((2.0 / h ** 2) * (np.cos(k * np.pi * h / grid.axis_length) - 1.0) for k in modes))


def gaussian_packet(grid, center, width, momentum=0.0):
    r"""
    Return exp(-|x - c|**2 / (2 width**2)) * exp(i p x_0), not normalized.
    """

    field = np.exp(-grid.squared_distance(center) / (2.0 * width ** 2)).astype(complex)
    if momentum:
        field = field * np.exp(1j * momentum * grid.coordinates()[0])
    return field


def sine_basis(grid, n_modes):
    r"""
    Return the (n_modes, n) matrix of sampled sin(k pi x / L), k = 1..n_modes.
    """

    x = grid.axis_points()
    k = np.arange(1, n_modes + 1)
    return np.sin(np.outer(k, x) * np.pi / grid.axis_length)


def random_smooth_field(grid, rng, n_modes=8, complex_valued=True, decay=1.0):
    r"""
    Return a random smooth field: a sine series with n_modes modes per axis and Gaussian coefficients
    decaying like 1/(1 + |k|**2)**decay.

    Description of argument(s):
    grid                            The Grid.
    rng                             A numpy Generator.
    n_modes                         The number of modes per axis.
    complex_valued                  Draw complex coefficients.
    decay                           The coefficient decay exponent.
    """

    n_modes = min(n_modes, grid.points_per_axis)
    coefficient_shape = (n_modes,) * grid.dim
    coefficients = rng.standard_normal(coefficient_shape)
    if complex_valued:
        coefficients = coefficients + 1j * rng.standard_normal(coefficient_shape)
    k = np.arange(1, n_modes + 1)
    k_squared = sum(np.meshgrid(*([k ** 2] * grid.dim), indexing="ij"))
    coefficients = coefficients / (1.0 + k_squared) ** decay
    basis = sine_basis(grid, n_modes)
    if grid.dim == 1:
        return coefficients @ basis
    return np.einsum("abc,ai,bj,ck->ijk", coefficients, basis, basis, basis)


def random_state(grid, n_orbitals, rng, h10_norm=None, **kwargs):
    r"""
    Return an OrbitalSet of random smooth orbitals, optionally scaled to the given H10 norm.
    """

    values = np.array([random_smooth_field(grid, rng, **kwargs) for ix in range(n_orbitals)])
    if h10_norm is not None:
        values = values * (h10_norm / h10_norm_values(grid, values))
    return OrbitalSet(grid, values)


def random_trajectory(grid, time_knots, n_orbitals, rng, sup_norm_value=None, **kwargs):
    r"""
    Return a random smooth trajectory (smooth in space, random per knot), optionally scaled to the given
    sup_norm.
    """

    time_knots = np.asarray(time_knots, dtype=float)
    values = np.array([[random_smooth_field(grid, rng, **kwargs) for ix in range(n_orbitals)]
                       for t in time_knots])
    trajectory = Trajectory(grid, time_knots, values)
    if sup_norm_value is not None:
        trajectory = trajectory * (sup_norm_value / sup_norm(trajectory))
    return trajectory
