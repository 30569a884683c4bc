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
from scipy.spatial import cKDTree
from scipy.special import gamma
from ..functional.errors import DomainError

MeasureCloud = namedtuple("MeasureCloud", "points weights")
Plane = namedtuple("Plane", "point basis")
reifenberg_result = namedtuple("reifenberg_result", "value ratio below scales")

BALL_SLACK = 1e-12


def measure_cloud(points, weights=None, n_dim=3):
    """Return a MeasureCloud; unit weights when none are given."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        points = points.reshape(0, points.shape[-1] if points.ndim == 2 else n_dim)
    points = np.atleast_2d(points)
    if weights is None:
        weights = np.ones(len(points))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(points),):
        raise DomainError("Need one weight per point, got %s for %i points." % (weights.shape, len(points)))
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise DomainError("Measure weights must be finite and >= 0.")
    return MeasureCloud(points, weights)


def unit_ball_volume(k):
    return np.pi ** (k / 2.0) / gamma(k / 2.0 + 1)


def discrete_measure(points, radii, k, n_dim=3):
    """Return mu = omega_k sum r_x^k delta_x for a cover by balls B_{r_x}(x)."""
    radii = np.asarray(radii, dtype=float)
    return measure_cloud(points, unit_ball_volume(k) * radii ** k, n_dim)


def _restrict(mu, x, r):
    if len(mu.points) == 0:
        return mu.points, mu.weights
    inside = np.linalg.norm(mu.points - np.asarray(x, dtype=float), axis=1) <= r * (1 + BALL_SLACK)
    return mu.points[inside], mu.weights[inside]


def _moments(points, weights):
    total = np.sum(weights)
    barycenter = weights @ points / total
    centered = points - barycenter
    second_moment = (centered * weights[:, None]).T @ centered
    eigenvalues, eigenvectors = np.linalg.eigh(second_moment)
    order = np.argsort(eigenvalues)[::-1]
    return barycenter, np.clip(eigenvalues[order], 0, None), eigenvectors[:, order]


def _check_k(k, n_dim):
    if not 0 <= k < n_dim:
        raise DomainError("Plane dimension k must lie in [0, %i), got %s." % (n_dim, k))


def _beta_sq(points, weights, r, k):
    if len(points) == 0 or np.sum(weights) == 0:
        return 0.0
    barycenter, _, eigenvectors = _moments(points, weights)
    # the n - k smallest eigenvalues, summed as squared normal components
    normal = (points - barycenter) @ eigenvectors[:, k:]
    return float(np.sum(weights * np.sum(normal ** 2, axis=1)) * r ** (-2.0 - k))


def jones_beta(mu, x, r, k):
    """
    Return beta^k_2(x, r) = sqrt(r^(-2-k) min_L int_{B_r(x)} d(y, L)^2 dmu)
    over affine k-planes L; the minimum is the sum of the n - k smallest
    eigenvalues of the weighted second moment about the barycenter.
    """
    n_dim = mu.points.shape[1]
    _check_k(k, n_dim)
    points, weights = _restrict(mu, x, r)
    return float(np.sqrt(_beta_sq(points, weights, r, k)))


def best_plane(mu, x, r, k):
    """Return the best L^2 affine k-plane of mu on B_r(x), or None if mu(B_r(x)) = 0."""
    n_dim = mu.points.shape[1]
    _check_k(k, n_dim)
    points, weights = _restrict(mu, x, r)
    if len(points) == 0 or np.sum(weights) == 0:
        return None
    barycenter, _, eigenvectors = _moments(points, weights)
    return Plane(barycenter, eigenvectors[:, :k].T)


def distance_to_plane(points, plane):
    offset = np.atleast_2d(points) - plane.point
    if len(plane.basis):
        offset = offset - (offset @ plane.basis.T) @ plane.basis
    return np.linalg.norm(offset, axis=1)


def greedy_span(points, rho, k):
    """
    Starting at the first point, repeatedly add the point farthest from the
    affine span so far while it lies at distance >= 2 rho, at most k times.
    Return (spans, plane): spans is True after k additions, and otherwise
    every point lies within 2 rho of plane, of dimension below k. plane is
    None for an empty point set.
    """
    if rho <= 0:
        raise DomainError("rho must be > 0, got %s." % rho)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0 or points.size == 0:
        return False, None
    plane = Plane(points[0], np.zeros((0, points.shape[1])))
    for _ in range(k):
        distance = distance_to_plane(points, plane)
        far = int(np.argmax(distance))
        if distance[far] < 2 * rho:
            return False, plane
        direction = points[far] - plane.point
        if len(plane.basis):
            direction = direction - (direction @ plane.basis.T) @ plane.basis
        plane = Plane(plane.point, np.vstack([plane.basis, direction / np.linalg.norm(direction)]))
    return True, plane


def effective_span(points, rho, k):
    """
    Whether points rho-effectively span a k-plane. Return (spans, plane),
    plane being the spanned Plane or None.
    """
    spans, plane = greedy_span(points, rho, k)
    return (True, plane) if spans else (False, None)


def log_scales(r, r0, refine=1):
    """
    Return the geometric midpoints of `refine` equal log-cells per octave
    covering [r0, r], and the log-width of a cell.
    """
    if r0 <= 0 or r0 > r:
        raise DomainError("Need 0 < r0 <= r, got r0=%s r=%s." % (r0, r))
    if refine < 1:
        raise DomainError("refine must be >= 1, got %s." % refine)
    cells = max(1, int(np.ceil(refine * np.log2(r / r0) - 1e-9)))
    width = np.log(r / r0) / cells
    return r * np.exp(-(np.arange(cells) + 0.5) * width), width


def reifenberg_integral(mu, x, r, k, r0, refine=1, delta=None):
    """
    Return sum_{y in B_r(x)} w_y int_{r0}^r beta^k_2(y, s)^2 ds / s, with
    the s-integral taken as a midpoint sum over log-cells (one per octave
    when refine = 1), and the ratio value / r^k compared with delta.
    """
    n_dim = mu.points.shape[1]
    _check_k(k, n_dim)
    scales, width = log_scales(r, r0, refine)
    centers, center_weights = _restrict(mu, x, r)
    value = 0.0
    if len(centers):
        tree = cKDTree(mu.points)
        for y, w_y in zip(centers, center_weights):
            if w_y == 0:
                continue
            for s in scales:
                index = tree.query_ball_point(y, s * (1 + BALL_SLACK))
                value += w_y * width * _beta_sq(mu.points[index], mu.weights[index], s, k)
    ratio = value / r ** k
    below = None if delta is None else bool(ratio <= delta)
    return reifenberg_result(value, ratio, below, scales)
