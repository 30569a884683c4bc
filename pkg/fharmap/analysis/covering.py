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
from collections import namedtuple
import numpy as np
from scipy.spatial import cKDTree
from ..functional.errors import InternalError
from ..functional.utilities import loglog_slope
from .jones import greedy_span, jones_beta
from .symmetry import symmetry_defect

BALL_SLACK = 1e-9
DROP_FRACTION = 0.1

cover_ball = namedtuple("cover_ball", "center radius label kind stage")
CoverReport = namedtuple("CoverReport", "balls sum_rk minkowski stages E levels")
minkowski_table = namedtuple("minkowski_table", "radii volumes normalized k")
l2_result = namedtuple("l2_result", "lhs rhs applicable ratio defect_zero defect_next")


def max_stages(r0, rho, root_radius=1.0):
    return int(np.ceil(np.log(r0 / root_radius) / np.log(rho))) + 2


def _greedy_net(points, radius):
    """Return net centers and, per point, the index of the first center within radius."""
    centers = []
    owner = np.full(len(points), -1)
    for i, y in enumerate(points):
        if owner[i] >= 0:
            continue
        centers.append(y)
        close = np.linalg.norm(points - y, axis=1) <= radius * (1 + BALL_SLACK)
        owner[close & (owner < 0)] = len(centers) - 1
    return np.array(centers), owner


def _plane_net(points, plane, radius, margin):
    """
    Centers on plane over the box spanned by the projected points, spaced at
    most 2 (radius - margin) / sqrt(j) along each of the j plane directions,
    so that radius-balls cover the margin-neighborhood of the box. Points
    farther than radius from every center get a greedy net of their own.
    Return (centers, owner) as _greedy_net does.
    """
    dimension = len(plane.basis)
    if dimension == 0:
        lattice = plane.point[None]
    else:
        coords = (points - plane.point) @ plane.basis.T
        low = coords.min(axis=0)
        extent = coords.max(axis=0) - low
        spacing = 2 * (radius - margin) / np.sqrt(dimension)
        counts = np.maximum(np.ceil(extent / spacing - 1e-9).astype(int), 1)
        axes = [low[i] + (np.arange(counts[i]) + 0.5) * extent[i] / counts[i] for i in range(dimension)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dimension)
        lattice = plane.point + grid @ plane.basis
    distance, nearest = cKDTree(lattice).query(points)
    near = distance <= radius * (1 + BALL_SLACK)
    used = np.unique(nearest[near])
    centers = list(lattice[used])
    owner = np.full(len(points), -1)
    owner[near] = np.searchsorted(used, nearest[near])
    if not np.all(near):
        far = np.flatnonzero(~near)
        far_centers, far_owner = _greedy_net(points[far], radius)
        owner[far] = far_owner + len(centers)
        centers += list(far_centers)
    return np.array(centers), owner


def covering_refine(singular, theta_bar_fn, k, rho, r0, delta_pinch, E=None,
                    root_center=None, root_radius=1.0, domain=None, minkowski_radii=None):
    """
    Cover the singular points in the root ball by balls that either reached
    radius r0 or show an energy drop, Theta_bar(y, R / 10) <= E - delta for
    every singular y in the doubled ball. Every other ball of radius R is
    refined into balls of radius max(rho R, r0). Its high-pinch set
    H = {y in B_2R : Theta_bar(y, rho R / 10) > E - delta} either
    rho R / 10-effectively spans a (k + 1)-plane, and the owned points get a
    greedy net ("full"), or lies within rho R / 5 of a plane V of dimension
    at most k, and the new centers sit on V ("plane").

    Without E, each stage measures E as the largest Theta_bar over the
    singular points at the scale being compared, so that both sides of a
    test carry the same grid deficit.
    """
    singular = np.atleast_2d(np.asarray(singular, dtype=float))
    n_dim = singular.shape[1] if singular.size else (domain.n_dim if domain is not None else 3)
    if root_center is None:
        root_center = np.zeros(n_dim)
    root_center = np.asarray(root_center, dtype=float)
    if singular.size:
        inside = np.linalg.norm(singular - root_center, axis=1) <= root_radius * (1 + BALL_SLACK)
        singular = singular[inside]
    else:
        singular = np.zeros((0, n_dim))
    minkowski = None
    if domain is not None and minkowski_radii is not None:
        minkowski = minkowski_content(singular, minkowski_radii, domain, k)
    if len(singular) == 0:
        return CoverReport([], 0.0, minkowski, 0, E, [])

    def level(r):
        if E is not None:
            return E
        return max(theta_bar_fn(y, r) for y in singular)

    tree = cKDTree(singular)
    limit = max_stages(r0, rho, root_radius)
    final = []
    levels = []
    active = [(root_center, root_radius, "root", np.arange(len(singular)))]
    stage = 0
    while active:
        stage += 1
        if stage > limit:
            raise InternalError("Covering did not terminate after %i stages." % limit)
        radius = active[0][1]
        drop_level = level(DROP_FRACTION * radius)
        pinch_level = level(DROP_FRACTION * rho * radius)
        levels.append((radius, drop_level, pinch_level))
        sub_radius = max(rho * radius, r0)
        margin = rho * radius / 5
        children = []
        for center, _, kind, owned in active:
            if radius <= r0 * (1 + BALL_SLACK):
                final.append(cover_ball(center, radius, "r0-ball", kind, stage))
                continue
            doubled = tree.query_ball_point(center, 2 * radius * (1 + BALL_SLACK))
            if all(theta_bar_fn(singular[i], DROP_FRACTION * radius) <= drop_level - delta_pinch for i in doubled):
                final.append(cover_ball(center, radius, "drop-ball", kind, stage))
                continue
            pinched = [i for i in doubled if theta_bar_fn(singular[i], DROP_FRACTION * rho * radius) > pinch_level - delta_pinch]
            spans, plane = greedy_span(singular[pinched], margin / 2, k + 1)
            if spans or plane is None:
                centers, owner = _greedy_net(singular[owned], sub_radius)
                child_kind = "full" if spans else "plane"
            else:
                centers, owner = _plane_net(singular[owned], plane, sub_radius, margin)
                child_kind = "plane"
            children += [
                (centers[j], sub_radius, child_kind, owned[owner == j]) for j in range(len(centers))
            ]
        active = children
        logging.debug("Covering stage %i: %i balls of radius %s", stage, len(active), sub_radius)
    sum_rk = float(sum(ball.radius ** k for ball in final))
    logging.info("Covering with %i balls after %i stages, sum r^%i = %s", len(final), stage, k, sum_rk)
    return CoverReport(final, sum_rk, minkowski, stage, levels[0][1], levels)


def minkowski_content(singular, radii, domain, k):
    """
    Return h^n times the number of cells of B_1(center) within distance r of
    the singular points, and the curve volume / r^(n - k).
    """
    radii = np.asarray(radii, dtype=float)
    n_dim = domain.n_dim
    cells = domain.coordinates()
    inside = domain.mask() & (np.linalg.norm(cells - domain.center, axis=-1) < 1)
    cells = cells[inside]
    singular = np.asarray(singular, dtype=float).reshape(-1, n_dim)
    volumes = np.zeros(len(radii))
    if len(singular):
        distance = cKDTree(singular).query(cells)[0]
        volumes = np.array([np.sum(distance <= r) for r in radii]) * domain.cell_volume
    return minkowski_table(radii, volumes, volumes / radii ** (n_dim - k), k)


def minkowski_dimension(table, n_dim):
    """Return n minus the log-log slope of the Minkowski volumes against r."""
    positive = table.volumes > 0
    if np.sum(positive) < 2:
        return float("nan")
    fit = loglog_slope(table.radii[positive], table.volumes[positive])
    return n_dim - fit.slope


def l2_approx_check(u, mu, x, r, k, thresholds, theta_bar_fn,
                    n_directions=512, refine_iters=20):
    """
    Compare beta^k_2(x, r)^2 with r^-k sum_y W_r(y) w_y over the atoms of mu
    in B_r(x), W_r = Theta_bar(y, 8r) - Theta_bar(y, r) clamped at 0. The
    check applies when B_8r(x) is (0, delta)-symmetric but not
    (k + 1, eps)-symmetric.
    """
    x = np.asarray(x, dtype=float)
    defect_zero = float("nan")
    defect_next = float("nan")
    applicable = False
    if u.domain.contains_ball(x, 8 * r):
        defect_zero = symmetry_defect(u, x, 8 * r, 0, n_directions, refine_iters).defect
        defect_next = symmetry_defect(u, x, 8 * r, k + 1, n_directions, refine_iters).defect
        applicable = defect_zero <= thresholds["delta_pinch"] and defect_next > thresholds["eps_strat"]
    lhs = jones_beta(mu, x, r, k) ** 2
    rhs = 0.0
    for y, w_y in zip(mu.points, mu.weights):
        if np.linalg.norm(y - x) > r * (1 + BALL_SLACK) or w_y == 0:
            continue
        rhs += w_y * max(theta_bar_fn(y, 8 * r) - theta_bar_fn(y, r), 0.0)
    rhs *= r ** (-k)
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0 else float("inf")
    return l2_result(lhs, rhs, bool(applicable), ratio, defect_zero, defect_next)
