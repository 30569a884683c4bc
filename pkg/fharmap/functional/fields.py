#!/usr/bin/env python3
#
# fharmap: numerical laboratory for F-harmonic sphere-valued maps
# Copyright 2026 fharmap developers
# All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#
#


from collections import namedtuple
import numpy as np
from scipy import ndimage
from .errors import DomainError, DimensionError

UNIT_TOL = 1e-12
SNAP_TOL = 1e-9
# partial-cell weights sample each cell SUBSAMPLES times per axis
SUBSAMPLES = 4

energy_field = namedtuple("energy_field", "density gradsq")


class GridDomain:
    """A uniform grid of cells; values live at the cell centers."""
    def __init__(self, n_dim, dims, spacing, origin=None, shape="box", radius=None):
        if n_dim not in [2, 3]:
            raise DomainError("Grid dimension must be 2 or 3, got %s." % n_dim)
        dims = tuple(int(a) for a in dims)
        if len(dims) != n_dim:
            raise DimensionError("Need %i grid sizes, got %i." % (n_dim, len(dims)))
        if min(dims) < 8:
            raise DomainError("Grid needs at least 8 cells per axis, got %s." % (dims,))
        if spacing <= 0:
            raise DomainError("Grid spacing must be > 0, got %s." % spacing)
        if shape not in ["box", "ball"]:
            raise DomainError("Grid shape %s is not recognized." % shape)
        self.n_dim = n_dim
        self.dims = dims
        self.spacing = float(spacing)
        if origin is None:
            origin = -0.5 * self.spacing * np.array(dims, dtype=float)
        self.origin = np.asarray(origin, dtype=float)
        self.shape = shape
        self.radius = None
        if shape == "ball":
            half_width = 0.5 * self.spacing * min(dims)
            self.radius = half_width if radius is None else float(radius)
            if self.radius > half_width * (1 + 1e-12):
                raise DomainError("Ball radius %s exceeds the box." % self.radius)
        self._coordinates = None
        self._mask = None
        self._boundary = None

    @property
    def center(self):
        return self.origin + 0.5 * self.spacing * np.array(self.dims, dtype=float)

    @property
    def cell_volume(self):
        return self.spacing ** self.n_dim

    def coordinates(self):
        """Return cell centers with shape dims + (n,)."""
        if self._coordinates is None:
            axes = [
                self.origin[i] + (np.arange(self.dims[i]) + 0.5) * self.spacing
                for i in range(self.n_dim)
            ]
            self._coordinates = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return self._coordinates

    def mask(self):
        """Cells counted in the domain: all cells of a box, centers inside a ball."""
        if self._mask is None:
            if self.shape == "box":
                self._mask = np.ones(self.dims, dtype=bool)
            else:
                distance = np.linalg.norm(self.coordinates() - self.center, axis=-1)
                self._mask = distance < self.radius
        return self._mask

    def boundary_mask(self):
        """Frozen cells: the outer layer of the domain and everything outside it."""
        if self._boundary is None:
            mask = self.mask()
            eroded = ndimage.binary_erosion(mask, border_value=0)
            self._boundary = ~eroded
        return self._boundary

    def distance_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == "ball":
            return self.radius - np.linalg.norm(x - self.center)
        upper = self.origin + self.spacing * np.array(self.dims, dtype=float)
        return float(min(np.min(x - self.origin), np.min(upper - x)))

    def contains_ball(self, x, r):
        return self.distance_to_boundary(x) >= r * (1 - 1e-12)

    def fractional_index(self, points):
        """Return continuous cell indices of points (cell centers are integers)."""
        index = (np.asarray(points, dtype=float) - self.origin) / self.spacing - 0.5
        nearest = np.rint(index)
        return np.where(np.abs(index - nearest) < SNAP_TOL, nearest, index)

    def describe(self):
        return {
            "n": self.n_dim,
            "dims": list(self.dims),
            "spacing": self.spacing,
            "origin": self.origin.tolist(),
            "shape": self.shape,
            "radius": self.radius,
        }


def ball_domain(n_dim, cells, radius=1.0, center=None):
    """Return a ball of the given radius inscribed in a cube of cells^n cells."""
    spacing = 2.0 * radius / cells
    if center is None:
        center = np.zeros(n_dim)
    origin = np.asarray(center, dtype=float) - radius
    return GridDomain(n_dim, [cells] * n_dim, spacing, origin=origin, shape="ball", radius=radius)


def box_domain(n_dim, cells, length=1.0, origin=None):
    spacing = float(length) / cells
    if origin is None:
        origin = np.zeros(n_dim)
    return GridDomain(n_dim, [cells] * n_dim, spacing, origin=origin, shape="box")


class SphereMap:
    """Unit q-vectors at every cell of a GridDomain."""
    def __init__(self, domain, values, boundary_mask=None, check=True):
        values = np.asarray(values, dtype=float)
        if values.shape[:-1] != domain.dims:
            raise DimensionError(
                "Values of shape %s do not match grid %s." % (values.shape, domain.dims)
            )
        if values.shape[-1] < 2:
            raise DimensionError("Target dimension q must be >= 2.")
        if check:
            deviation = np.max(np.abs(np.linalg.norm(values, axis=-1) - 1))
            if deviation > 1e-9:
                raise DomainError("Map values leave the sphere by %s." % deviation)
        self.domain = domain
        self.values = values
        if boundary_mask is None:
            boundary_mask = domain.boundary_mask()
        self.boundary_mask = boundary_mask

    @property
    def q_dim(self):
        return self.values.shape[-1]

    @property
    def n_dim(self):
        return self.domain.n_dim

    def with_values(self, values):
        return SphereMap(self.domain, values, self.boundary_mask, check=False)


def normalize(values):
    """Project ambient vectors to the sphere; zero vectors map to e_1."""
    norm = np.linalg.norm(values, axis=-1, keepdims=True)
    fallback = np.zeros(values.shape[-1])
    fallback[0] = 1.0
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm > 0, values / safe, fallback)


def hedgehog_values(points, center=None):
    points = np.asarray(points, dtype=float)
    if center is not None:
        points = points - np.asarray(center, dtype=float)
    return normalize(points)


def _glued_hedgehog_values(points, separation):
    """
    Degree two map with point singularities at +/- separation e_n: the
    product of the stereographic coordinates (projected from -e_1) of the
    two hedgehogs, mapped back to the sphere.
    """
    offset = np.zeros(points.shape[-1])
    offset[-1] = separation
    numerator = np.ones(points.shape[:-1], dtype=complex)
    denominator = np.ones(points.shape[:-1])
    for center in [offset, -offset]:
        h_values = hedgehog_values(points, center)
        numerator = numerator * (h_values[..., 1] + 1j * h_values[..., 2])
        denominator = denominator * (1 + h_values[..., 0])
    size = denominator ** 2 + np.abs(numerator) ** 2
    # on the -e_1 ray of a center both parts vanish and the limit is -e_1
    on_ray = size == 0
    denominator = np.where(on_ray, 0.0, denominator)
    numerator = np.where(on_ray, 1.0, numerator)
    size = np.where(on_ray, 1.0, size)
    values = np.stack(
        [
            (denominator ** 2 - np.abs(numerator) ** 2) / size,
            2 * denominator * numerator.real / size,
            2 * denominator * numerator.imag / size,
        ],
        axis=-1,
    )
    return normalize(values)


def _smooth_perturbation(points, q_dim):
    n_dim = points.shape[-1]
    columns = [
        np.sin(np.pi * points[..., (alpha + 1) % n_dim] + alpha + 1) for alpha in range(q_dim)
    ]
    return np.stack(columns, axis=-1)


def make_map(domain, kind, q_dim=None, perturbation=0.0, separation=0.4,
             wavenumber=1.0, vector=None, seed=0):
    """Return one of the built-in maps, optionally perturbed away from the boundary."""
    points = domain.coordinates()
    n_dim = domain.n_dim
    if q_dim is None:
        q_dim = 2 if kind == "circle" else n_dim
    if kind == "hedgehog":
        values = hedgehog_values(points, domain.center if domain.shape == "ball" else None)
    elif kind == "cylinder":
        if n_dim != 3:
            raise DimensionError("Cylinder map needs n = 3.")
        planar = points.copy()
        planar[..., 2] = 0
        values = normalize(planar)
    elif kind == "two-hedgehogs":
        if n_dim != 3:
            raise DimensionError("Glued hedgehog map needs n = 3.")
        values = _glued_hedgehog_values(points, separation)
    elif kind == "circle":
        phase = wavenumber * points[..., 0]
        values = np.stack([np.cos(phase), np.sin(phase)], axis=-1)
    elif kind == "constant":
        if vector is None:
            vector = np.zeros(q_dim)
            vector[0] = 1.0
        values = np.broadcast_to(normalize(np.asarray(vector, dtype=float)), domain.dims + (q_dim,)).copy()
    elif kind == "random":
        rng = np.random.default_rng(seed)
        values = normalize(rng.standard_normal(domain.dims + (q_dim,)))
    else:
        raise DomainError("Map kind %s is not recognized." % kind)
    if values.shape[-1] != q_dim:
        raise DimensionError("Map kind %s has q = %i." % (kind, values.shape[-1]))
    if perturbation > 0:
        free = ~domain.boundary_mask()
        moved = normalize(values + perturbation * _smooth_perturbation(points, q_dim))
        values = np.where(free[..., None], moved, values)
    return SphereMap(domain, values)


def grid_gradient(values, spacing, n_dim):
    """Return d values / dx_i stacked on a leading axis of length n."""
    gradient = np.gradient(values, spacing, axis=tuple(range(n_dim)))
    if n_dim == 1:
        gradient = [gradient]
    return np.stack(gradient, axis=0)


def gradient_sq(u):
    """Return |grad u|^2 per cell."""
    gradient = grid_gradient(u.values, u.domain.spacing, u.n_dim)
    return np.sum(gradient ** 2, axis=(0, -1))


def energy_density(u, model):
    gradsq = gradient_sq(u)
    density = model.evaluate(u.domain.coordinates(), u.values, gradsq)[0]
    return energy_field(density, gradsq)


def total_energy(u, model, exclude=None):
    """
    Return the sum of F(x, u, |grad u|^2) h^n over the domain cells. exclude
    is a list of (center, radius) balls left out of the sum.
    """
    density = energy_density(u, model).density
    mask = u.domain.mask().copy()
    if exclude is not None:
        points = u.domain.coordinates()
        for center, radius in exclude:
            mask &= np.linalg.norm(points - np.asarray(center), axis=-1) >= radius
    return float(np.sum(density[mask]) * u.domain.cell_volume)


def _cell_fractions(relative, r, spacing, subsamples):
    """Fraction of each cell (centers given relative to the ball center) inside B_r."""
    n_dim = relative.shape[-1]
    distance = np.linalg.norm(relative, axis=-1)
    half_diagonal = 0.5 * spacing * np.sqrt(n_dim)
    weights = (distance + half_diagonal <= r).astype(float)
    partial = np.abs(distance - r) < half_diagonal
    if np.any(partial):
        offsets = (np.arange(subsamples) + 0.5) / subsamples - 0.5
        grids = np.meshgrid(*([offsets] * n_dim), indexing="ij")
        offsets = spacing * np.stack([a.ravel() for a in grids], axis=-1)
        sub_points = relative[partial][:, None, :] + offsets[None, :, :]
        inside = np.linalg.norm(sub_points, axis=-1) <= r
        weights[partial] = np.mean(inside, axis=1)
    return weights


def ball_weights(domain, x, r, subsamples=SUBSAMPLES):
    """
    Return (slices, weights): the fraction of each cell inside B_r(x) for
    the cells of the bounding box, estimated by subsamples^n points per cell.
    """
    x = np.asarray(x, dtype=float)
    h = domain.spacing
    low = np.floor((x - r - domain.origin) / h).astype(int)
    high = np.ceil((x + r - domain.origin) / h).astype(int)
    low = np.clip(low, 0, np.array(domain.dims))
    high = np.clip(high, 0, np.array(domain.dims))
    slices = tuple(slice(low[i], high[i]) for i in range(domain.n_dim))
    points = domain.coordinates()[slices]
    return slices, _cell_fractions(points - x, r, h, subsamples)


def ball_kernel(n_dim, spacing, r, subsamples=SUBSAMPLES):
    """Cell fractions of B_r about a cell center, on a (2m+1)^n stencil."""
    half = int(np.ceil(r / spacing)) + 1
    axis = spacing * np.arange(-half, half + 1)
    relative = np.stack(np.meshgrid(*([axis] * n_dim), indexing="ij"), axis=-1)
    return _cell_fractions(relative, r, spacing, subsamples)


def sample_array(array, domain, points, order=1):
    """Interpolate a per-cell array (trailing component axis) at points."""
    points = np.asarray(points, dtype=float)
    index = domain.fractional_index(points.reshape(-1, domain.n_dim)).T
    columns = [
        ndimage.map_coordinates(array[..., j], index, order=order, mode="nearest")
        for j in range(array.shape[-1])
    ]
    return np.stack(columns, axis=-1).reshape(points.shape[:-1] + (array.shape[-1],))


def sample_map(u, points):
    """Interpolate u at points and project back to the sphere."""
    values = sample_array(u.values, u.domain, points)
    norm = np.linalg.norm(values, axis=-1)
    degenerate = norm < 1e-8
    if np.any(degenerate):
        nearest = sample_array(u.values, u.domain, np.asarray(points)[degenerate], order=0)
        values[degenerate] = nearest
    return normalize(values)


def blowup(u, x, lam, cells=None):
    """Return u_{x,lam}(y) = u(x + lam y) sampled on a unit-ball grid."""
    if not 0 < lam <= 1:
        raise DomainError("Blow-up needs lambda in (0, 1], got %s." % lam)
    x = np.asarray(x, dtype=float)
    if not u.domain.contains_ball(x, lam):
        raise DomainError("Ball of radius %s about %s leaves the domain." % (lam, x))
    if cells is None:
        cells = u.domain.dims[0]
    target = ball_domain(u.n_dim, cells, radius=1.0)
    points = x + lam * target.coordinates()
    return SphereMap(target, sample_map(u, points))
