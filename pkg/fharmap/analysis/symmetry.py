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


import logging
import multiprocessing as mp
from functools import partial
from collections import namedtuple
import numpy as np
from scipy import ndimage
from scipy.integrate import quad
from scipy.linalg import null_space
from scipy.optimize import minimize_scalar
from ..functional.errors import DomainError, ResolutionError, StateError
from ..functional.fields import energy_density, normalize, sample_map
from ..functional.integrand import correction_h
from ..functional.utilities import fibonacci_sphere, partition
from .jones import best_plane, effective_span, measure_cloud
from .monotone import sphere_area, theta_field

# (radial samples, slice samples) per orbit ray
ORBIT_SAMPLES = (32, 16)
COARSE_ORBIT_SAMPLES = (8, 4)
MIN_ORBIT_SAMPLES = 8
CIRCLE_SAMPLES = 32
SPHERE_SAMPLES = 64
N_DIRECTIONS = 512
REFINE_ITERS = 20
REGULARITY_PAIRS = 4096
ALL_PAIRS_CELLS = 64
BISECTION_STEPS = 40
EPS0_FRACTION = 0.1
MAX_TIE = 1e-6

defect_result = namedtuple("defect_result", "defect projected plane")
StratumReport = namedtuple(
    "StratumReport",
    "points radii raw projected defects violations singular regularity membership eps",
)
singular_set = namedtuple("singular_set", "points mask theta_bar")
consistency_result = namedtuple("consistency_result", "applicable holds violations")


def _normal_directions(dim):
    """Directions on the unit sphere of a dim-dimensional space."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = 2 * np.pi * (np.arange(CIRCLE_SAMPLES) + 0.5) / CIRCLE_SAMPLES
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return fibonacci_sphere(SPHERE_SAMPLES, 3)


def _slice_points(k, count):
    """Nearly uniform points of the unit k-ball."""
    if k == 0:
        return np.zeros((1, 0))
    if k == 1:
        return (-1 + (2 * np.arange(count) + 1.0) / count)[:, None]
    j = np.arange(count) + 0.5
    radius = np.sqrt(j / count)
    angle = np.pi * (3 - np.sqrt(5)) * j
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)


def _orbit_samples(basis, n_dim, coarse):
    """
    Return offsets (n_orbits, samples, n) in B_1 and their weights. Orbit o
    collects the points v + t omega_o with v in V, t > 0.
    """
    k = len(basis)
    radial, slices = COARSE_ORBIT_SAMPLES if coarse else ORBIT_SAMPLES
    t = (np.arange(radial) + 0.5) / radial
    v = _slice_points(k, slices)
    if k:
        complement = null_space(basis).T
        v_ambient = v @ basis
    else:
        complement = np.eye(n_dim)
        v_ambient = np.zeros((1, n_dim))
    omega = _normal_directions(n_dim - k) @ complement
    slice_radius = np.sqrt(1 - t ** 2)
    offsets = (
        t[None, :, None, None] * omega[:, None, None, :]
        + slice_radius[None, :, None, None] * v_ambient[None, None, :, :]
    )
    offsets = offsets.reshape(len(omega), -1, n_dim)
    weights = np.repeat(t ** (n_dim - k - 1) * slice_radius ** k, len(v_ambient))
    return offsets, weights


def _defects(values, weights):
    """Mean square distance to the orbit means and to their projections."""
    total = np.sum(weights)
    mean = np.einsum("s,osq->oq", weights, values) / total
    ambient = np.einsum("s,os->o", weights, np.sum((values - mean[:, None]) ** 2, axis=-1)) / total
    projected_mean = normalize(mean)
    projected = np.einsum(
        "s,os->o", weights, np.sum((values - projected_mean[:, None]) ** 2, axis=-1)
    ) / total
    return float(np.mean(ambient)), float(np.mean(projected))


def _check_ball(u, x, r):
    if r < 2 * u.domain.spacing:
        raise ResolutionError("Defect radius %s is below two grid cells." % r)
    if not u.domain.contains_ball(x, r):
        raise DomainError("Ball of radius %s about %s leaves the domain." % (r, list(x)))


def orbit_defect(u, x, r, basis, coarse=False):
    """
    Return (ambient, projected) mean square deviation of u_{x,r} from the
    k-symmetric map built by averaging over orbits of the plane spanned
    by the rows of basis.
    """
    x = np.asarray(x, dtype=float)
    _check_ball(u, x, r)
    basis = np.asarray(basis, dtype=float).reshape(-1, u.n_dim)
    offsets, weights = _orbit_samples(basis, u.n_dim, coarse)
    if offsets.shape[1] < MIN_ORBIT_SAMPLES:
        raise ResolutionError(
            "Only %i samples per orbit, need %i." % (offsets.shape[1], MIN_ORBIT_SAMPLES)
        )
    values = sample_map(u, x + r * offsets)
    return _defects(values, weights)


def constant_defect(u, x, r):
    """Mean square deviation of u_{x,r} from its mean over B_1."""
    x = np.asarray(x, dtype=float)
    _check_ball(u, x, r)
    offsets, weights = _orbit_samples(np.zeros((0, u.n_dim)), u.n_dim, False)
    values = sample_map(u, x + r * offsets)
    return _defects(values.reshape(1, -1, u.q_dim), np.tile(weights, len(offsets)))


def _plane_basis(direction, k, n_dim):
    """Axis for k = 1, normal for k = n - 1 > 1."""
    direction = normalize(np.asarray(direction, dtype=float)[None])[0]
    if k == 1:
        return direction[None]
    return null_space(direction[None]).T


def _sphere_direction(polar, azimuth):
    return np.array([
        np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)
    ])


def _refine_direction(objective, direction, n_dim, n_directions, refine_iters):
    options = {"maxiter": refine_iters, "xatol": 1e-5}
    if n_dim == 2:
        start = np.arctan2(direction[1], direction[0])
        step = 2 * np.pi / n_directions
        fit = minimize_scalar(
            lambda a: objective(np.array([np.cos(a), np.sin(a)])),
            bounds=(start - step, start + step), method="bounded", options=options,
        )
        return np.array([np.cos(fit.x), np.sin(fit.x)])
    polar = np.arccos(np.clip(direction[2], -1, 1))
    azimuth = np.arctan2(direction[1], direction[0])
    step = 2 * np.sqrt(2 * np.pi / n_directions)
    fit = minimize_scalar(
        lambda a: objective(_sphere_direction(a, azimuth)),
        bounds=(polar - step, polar + step), method="bounded", options=options,
    )
    polar = fit.x
    azimuth_step = step / max(abs(np.sin(polar)), step)
    fit = minimize_scalar(
        lambda a: objective(_sphere_direction(polar, a)),
        bounds=(azimuth - azimuth_step, azimuth + azimuth_step), method="bounded", options=options,
    )
    return _sphere_direction(polar, fit.x)


def symmetry_defect(u, x, r, k, n_directions=N_DIRECTIONS, refine_iters=REFINE_ITERS):
    """
    Return the k-symmetry defect of u on B_r(x): the smallest orbit-average
    deviation over candidate k-planes, searched over a Fibonacci lattice of
    axes (k = 1) or normals (k = n - 1) and refined by bounded golden
    section. k = n compares with the constant mean.
    """
    n_dim = u.n_dim
    x = np.asarray(x, dtype=float)
    if not 0 <= k <= n_dim:
        raise DomainError("Symmetry dimension k must lie in [0, %i], got %s." % (n_dim, k))
    if k == 0:
        ambient, projected = orbit_defect(u, x, r, np.zeros((0, n_dim)))
        return defect_result(ambient, projected, np.zeros((0, n_dim)))
    if k == n_dim:
        ambient, projected = constant_defect(u, x, r)
        return defect_result(ambient, projected, np.eye(n_dim))

    def coarse_defect(direction):
        return orbit_defect(u, x, r, _plane_basis(direction, k, n_dim), coarse=True)[0]

    directions = fibonacci_sphere(n_directions, n_dim, hemisphere=True)
    coarse = np.array([coarse_defect(d) for d in directions])
    start = directions[int(np.argmin(coarse))]
    refined = _refine_direction(coarse_defect, start, n_dim, n_directions, refine_iters)
    best = None
    for direction in [start, refined]:
        basis = _plane_basis(direction, k, n_dim)
        ambient, projected = orbit_defect(u, x, r, basis)
        if best is None or ambient < best.defect:
            best = defect_result(ambient, projected, basis)
    return best


def _defect_rows(indexed_points, u, radii, n_directions, refine_iters):
    rows = []
    n_dim = u.n_dim
    for i, x in indexed_points:
        raw = np.full((n_dim + 1, len(radii)), np.nan)
        projected = np.full((n_dim + 1, len(radii)), np.nan)
        for j, r in enumerate(radii):
            if not u.domain.contains_ball(x, r):
                continue
            for k in range(n_dim + 1):
                result = symmetry_defect(u, x, r, k, n_directions, refine_iters)
                raw[k, j] = result.defect
                projected[k, j] = result.projected
        rows.append((i, raw, projected))
    return rows


def _sampled_scales(defect_row, radii, k, r):
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(defect_row)[k + 1]
    return values[(radii >= r * (1 - 1e-9)) & np.isfinite(values)]


def membership_decided(defect_row, radii, k, r):
    """True when some ball B_s(x), s >= r, inside the domain was sampled."""
    return len(_sampled_scales(defect_row, radii, k, r)) > 0


def stratum_membership(defect_row, radii, k, eps, r):
    """
    True when no sampled ball B_s(x), s >= r, is (k + 1, eps)-symmetric,
    i.e. D^{k+1}(x, s) > eps at every sampled s >= r. Scales whose ball
    leaves the domain are not sampled; without any sampled scale the
    membership is not certified and the result is False.
    """
    values = _sampled_scales(defect_row, radii, k, r)
    return bool(len(values) > 0 and np.all(values > eps))


def stratum_membership_all_scales(defect_row, radii, k, eps):
    """Membership in the stratum at every decided sampled scale."""
    decided = [r for r in radii if membership_decided(defect_row, radii, k, r)]
    return bool(decided) and all(stratum_membership(defect_row, radii, k, eps, r) for r in decided)


def stratum_report(u, points, radii, eps, alpha=None, singular=None,
                   n_directions=N_DIRECTIONS, refine_iters=REFINE_ITERS, threads=1, seed=0):
    """
    Return the StratumReport of u at points: raw defects D^k(x, r) for
    k = 0..n, the envelope made non-decreasing in k, raw violations of that
    order, stratum flags per (k, r) and, when alpha is given, regularity
    scales.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    radii = np.asarray(radii, dtype=float)
    n_dim = u.n_dim
    indexed_points = list(enumerate(points))
    if threads == 1 or len(indexed_points) < 2:
        rows = _defect_rows(indexed_points, u, radii, n_directions, refine_iters)
    else:
        get_rows = partial(
            _defect_rows, u=u, radii=radii, n_directions=n_directions, refine_iters=refine_iters
        )
        point_groups = [a for a in partition(indexed_points, threads) if a]
        pool = mp.Pool(threads)
        grouped = pool.map(get_rows, point_groups)
        pool.close()
        rows = [a for group in grouped for a in group]
    rows = sorted(rows, key=lambda a: a[0])
    raw = np.array([a[1] for a in rows]).reshape(len(points), n_dim + 1, len(radii))
    projected = np.array([a[2] for a in rows]).reshape(len(points), n_dim + 1, len(radii))
    defects = np.maximum.accumulate(raw, axis=1)
    with np.errstate(invalid="ignore"):
        violations = int(np.sum(raw[:, 1:] < raw[:, :-1] - 1e-12))
    if violations:
        logging.info("Plane search left %i raw defects below the lower-k value", violations)
    membership = np.zeros((len(points), n_dim, len(radii)), dtype=bool)
    for p in range(len(points)):
        for k in range(n_dim):
            for j, r in enumerate(radii):
                membership[p, k, j] = stratum_membership(defects[p], radii, k, eps, r)
    regularity = None
    if alpha is not None:
        regularity = np.array([regularity_scale(u, x, alpha, seed=seed) for x in points])
    if singular is not None:
        singular = np.asarray(singular, dtype=bool)
    return StratumReport(
        points, radii, raw, projected, defects, violations, singular, regularity, membership, eps
    )


def default_eps0(model):
    """
    Return EPS0_FRACTION times the density of the hedgehog for the model,
    |S^{n-1}| int_0^1 rho^{n-1} F((n-1)/rho^2) drho, in three dimensions.
    """
    n_dim = model.n_dim
    if n_dim != 3:
        return EPS0_FRACTION * sphere_area(2) * (n_dim - 1)
    x = np.zeros(n_dim)
    z = np.zeros(model.q_dim)
    z[0] = 1
    lower = 0.0
    if model.kind == "tabulated":
        lower = np.sqrt((n_dim - 1) / (model._p_range[1] * model.scale ** 2))

    def integrand(rho):
        return rho ** (n_dim - 1) * float(model.evaluate(x, z, (n_dim - 1) / rho ** 2)[0])

    value = quad(integrand, lower, 1, limit=200)[0]
    return EPS0_FRACTION * sphere_area(n_dim) * value


def theta_bar_field(u, model, r, density=None):
    """Theta_bar(x, r) at every cell center, NaN where B_r(x) leaves the domain."""
    field = theta_field(u, model, r, density)
    return np.exp(model.vartheta * r / model.c_e) * field + correction_h(model, r)


def singular_detect(u, model, radii, eps0, density=None):
    """
    Return the cells x with Theta_bar(x, r) > eps0 at every sampled radius;
    one small scale below eps0 certifies regularity. Only cells whose ball
    fits at the largest radius are candidates.
    """
    if density is None:
        density = energy_density(u, model).density
    radii = np.sort(np.asarray(radii, dtype=float))
    candidate = u.domain.mask().copy()
    smallest = None
    for r in radii:
        field = theta_bar_field(u, model, r, density)
        if smallest is None:
            smallest = field
        with np.errstate(invalid="ignore"):
            candidate &= np.isfinite(field) & (field > eps0)
    logging.info("Detected %i singular cells above eps0 = %s", int(np.sum(candidate)), eps0)
    return singular_set(u.domain.coordinates()[candidate], candidate, smallest)


def singular_cores(detected, spacing):
    """
    Reduce a detected singular set to its ridge: cells where Theta_bar at
    the smallest radius is a local maximum among detected neighbors, each
    connected cluster projected onto the plane its points 2h-effectively
    span.
    """
    mask = detected.mask
    if not np.any(mask):
        return np.zeros((0, mask.ndim))
    values = np.where(mask, detected.theta_bar, -np.inf)
    local_max = ndimage.maximum_filter(values, size=3, mode="constant", cval=-np.inf)
    ridge = mask & (values >= local_max - MAX_TIE * np.abs(local_max))
    labels, count = ndimage.label(ridge, structure=np.ones((3,) * mask.ndim))
    cores = []
    for label in range(1, count + 1):
        index = np.argwhere(labels == label)
        cluster = _cell_points(index, mask, detected.points)
        k = 0
        while k + 1 < mask.ndim and effective_span(cluster, spacing, k + 1)[0]:
            k += 1
        cloud = measure_cloud(cluster)
        center = np.mean(cluster, axis=0)
        radius = np.max(np.linalg.norm(cluster - center, axis=1)) + spacing
        plane = best_plane(cloud, center, radius, k)
        offset = cluster - plane.point
        if k:
            offset = (offset @ plane.basis.T) @ plane.basis
        else:
            offset = np.zeros_like(offset)
        cores.append(plane.point + offset)
    cores = np.unique(np.round(np.concatenate(cores, axis=0), 12), axis=0)
    return cores


def _cell_points(index, mask, detected_points):
    """Coordinates of the cells at index, in the order of detected_points."""
    order = np.full(mask.shape, -1)
    order[mask] = np.arange(np.sum(mask))
    return detected_points[order[tuple(index.T)]]


def _holder_seminorm(u, x, r, alpha, rng):
    domain = u.domain
    points = domain.coordinates()
    inside = domain.mask() & (np.linalg.norm(points - x, axis=-1) <= r)
    index = np.argwhere(inside)
    count = len(index)
    if count < 2:
        return 0.0
    if count <= ALL_PAIRS_CELLS:
        first, second = np.triu_indices(count, 1)
    else:
        half = REGULARITY_PAIRS // 2
        first = rng.integers(count, size=half)
        second = rng.integers(count, size=half)
        # adjacent pairs sample the finest resolved scale
        near = rng.integers(count, size=REGULARITY_PAIRS - half)
        step = np.zeros((len(near), domain.n_dim), dtype=int)
        step[np.arange(len(near)), rng.integers(domain.n_dim, size=len(near))] = 1
        neighbor = index[near] + step
        valid = np.all(neighbor < np.array(domain.dims), axis=1)
        neighbor_inside = np.zeros(len(near), dtype=bool)
        neighbor_inside[valid] = inside[tuple(neighbor[valid].T)]
        position = np.full(domain.dims, -1)
        position[tuple(index.T)] = np.arange(count)
        first = np.concatenate([first, near[neighbor_inside]])
        second = np.concatenate([second, position[tuple(neighbor[neighbor_inside].T)]])
        keep = first != second
        first = first[keep]
        second = second[keep]
    if len(first) == 0:
        return 0.0
    p_cells = tuple(index[first].T)
    q_cells = tuple(index[second].T)
    difference = np.linalg.norm(u.values[p_cells] - u.values[q_cells], axis=-1)
    distance = np.linalg.norm(points[p_cells] - points[q_cells], axis=-1)
    return float(np.max(difference / distance ** alpha))


def regularity_scale(u, x, alpha, pairs=REGULARITY_PAIRS, seed=0):
    """
    Return the largest r in [h, dist(x, boundary)] with
    r^alpha [u]_{C^alpha(B_r(x))} <= 1, by bisection in log r.
    """
    if not 0 < alpha <= 1:
        raise DomainError("Hoelder exponent must lie in (0, 1], got %s." % alpha)
    x = np.asarray(x, dtype=float)
    domain = u.domain
    r_low = domain.spacing
    r_high = domain.distance_to_boundary(x)
    if r_high <= r_low:
        return r_low

    def regular(r):
        rng = np.random.default_rng(seed)
        return r ** alpha * _holder_seminorm(u, x, r, alpha, rng) <= 1

    if regular(r_high):
        return float(r_high)
    if not regular(r_low):
        return float(r_low)
    for _ in range(BISECTION_STEPS):
        r_mid = np.sqrt(r_low * r_high)
        if regular(r_mid):
            r_low = r_mid
        else:
            r_high = r_mid
        if r_high / r_low < 1 + 1e-3:
            break
    return float(r_low)


def regularity_consistency(report, eps):
    """
    Check r_u(x) >= r / 2 wherever B_r(x) is (n - 2, eps)-symmetric,
    i.e. D^{n-2}(x, r) <= eps.
    """
    if report.regularity is None:
        raise StateError("Stratum report carries no regularity scales.")
    n_dim = report.points.shape[1]
    applicable = 0
    holds = 0
    violations = []
    for p, x in enumerate(report.points):
        for j, r in enumerate(report.radii):
            value = report.defects[p, n_dim - 2, j]
            if not np.isfinite(value) or value > eps:
                continue
            applicable += 1
            if report.regularity[p] >= r / 2:
                holds += 1
            else:
                violations.append((x.tolist(), float(r), float(report.regularity[p])))
    return consistency_result(applicable, holds, violations)
