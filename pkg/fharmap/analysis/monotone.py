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
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve
from scipy.special import gamma
from ..functional.errors import DomainError, RangeError, ResolutionError
from ..functional.fields import (
    ball_kernel,
    ball_weights,
    energy_density,
    grid_gradient,
    normalize,
    sample_array,
    sample_map,
)
from ..functional.integrand import correction_h
from ..functional.utilities import partition
from .jones import effective_span

MIN_RADIUS_CELLS = 4
EPS_MOLLIFIER = 0.1
FLUX_DIRECTIONS = 1024
TOL_MONO_FACTOR = 1e-3
QUADRATURE_NODES = 512
MIN_SMOOTH_SAMPLES = 16
RANGE_SLACK = 1e-9

MonotoneProfile = namedtuple(
    "MonotoneProfile",
    "center radii theta h_vals theta_bar theta_smooth pinch flux mollifier_mass",
)
MonotonicityReport = namedtuple(
    "MonotonicityReport",
    "profiles tol lambda_max violations max_violation flux_violations max_flux_gap per_center",
)


def sphere_area(n_dim):
    """Area of the unit sphere in R^n."""
    return 2 * np.pi ** (n_dim / 2.0) / gamma(n_dim / 2.0)


def _check_radius(domain, x, r):
    if r < MIN_RADIUS_CELLS * domain.spacing * (1 - RANGE_SLACK):
        raise ResolutionError(
            "Radius %s is below %i grid cells." % (r, MIN_RADIUS_CELLS)
        )
    if not domain.contains_ball(x, r):
        raise DomainError("Ball of radius %s about %s leaves the domain." % (r, list(x)))


def theta(u, model, x, r, density=None):
    """
    Return theta(x, r) = r^(2-n) int_{B_r(x)} F, with boundary cells
    weighted by the fraction of their volume inside the ball.
    """
    domain = u.domain
    x = np.asarray(x, dtype=float)
    _check_radius(domain, x, r)
    if density is None:
        density = energy_density(u, model).density
    slices, weights = ball_weights(domain, x, r)
    weights = weights * domain.mask()[slices]
    integral = np.sum(density[slices] * weights) * domain.cell_volume
    return float(integral * r ** (2 - domain.n_dim))


def theta_field(u, model, r, density=None):
    """
    Return theta(x, r) at every cell center; cells whose ball leaves the
    domain are NaN.
    """
    domain = u.domain
    if r < MIN_RADIUS_CELLS * domain.spacing * (1 - RANGE_SLACK):
        raise ResolutionError("Radius %s is below %i grid cells." % (r, MIN_RADIUS_CELLS))
    if density is None:
        density = energy_density(u, model).density
    kernel = ball_kernel(domain.n_dim, domain.spacing, r)
    masked = np.where(domain.mask(), density, 0.0)
    integral = fftconvolve(masked, kernel, mode="same") * domain.cell_volume
    field = np.clip(integral, 0, None) * r ** (2 - domain.n_dim)
    points = domain.coordinates()
    if domain.shape == "ball":
        room = domain.radius - np.linalg.norm(points - domain.center, axis=-1)
    else:
        upper = domain.origin + domain.spacing * np.array(domain.dims, dtype=float)
        room = np.minimum(np.min(points - domain.origin, axis=-1), np.min(upper - points, axis=-1))
    return np.where(room >= r * (1 - 1e-12), field, np.nan)


def theta_bar(model, radii, thetas):
    """
    Return (theta_bar, h_vals) with theta_bar = exp(vartheta r / c_e) theta + h(r).
    """
    radii = np.asarray(radii, dtype=float)
    h_vals = np.array([correction_h(model, r) for r in radii])
    factor = np.exp(model.vartheta * radii / model.c_e)
    return factor * np.asarray(thetas, dtype=float) + h_vals, h_vals


def _smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(s, 0, 1)
    inner = (s > 0) & (s < 1)
    out = (s >= 1).astype(float)
    safe = np.where(inner, s, 0.5)
    left = np.exp(-1 / safe)
    right = np.exp(-1 / (1 - safe))
    return np.where(inner, left / (left + right), out)


def mollifier(t, eps):
    """psi(t): 1 on [eps, 1 - eps], supported in [0, 1]."""
    t = np.asarray(t, dtype=float)
    return _smoothstep(t / eps) * _smoothstep((1 - t) / eps)


def mollifier_mass(eps):
    """int_0^1 psi(t) dt; each symmetric transition contributes eps / 2."""
    if not 0 < eps < 0.5:
        raise DomainError("Mollifier width must lie in (0, 0.5), got %s." % eps)
    return 1.0 - eps


def theta_smoothed(radii, theta_bar_values, eps=EPS_MOLLIFIER):
    """
    Return Theta~(r) = int_0^1 Theta_bar(r t) psi(t) dt at every sampled
    radius. Radii with fewer than MIN_SMOOTH_SAMPLES samples at or below
    them are NaN; Theta_bar is held at its first value below radii[0].
    """
    radii = np.asarray(radii, dtype=float)
    theta_bar_values = np.asarray(theta_bar_values, dtype=float)
    mollifier_mass(eps)
    if len(radii) < MIN_SMOOTH_SAMPLES:
        raise ResolutionError(
            "Smoothing needs %i radial samples, got %i." % (MIN_SMOOTH_SAMPLES, len(radii))
        )
    nodes, weights = leggauss(QUADRATURE_NODES)
    nodes = 0.5 * (nodes + 1)
    weights = 0.5 * weights * mollifier(nodes, eps)
    smooth = np.full(len(radii), np.nan)
    for i, r in enumerate(radii):
        if i + 1 < MIN_SMOOTH_SAMPLES:
            continue
        smooth[i] = np.sum(weights * np.interp(r * nodes, radii, theta_bar_values))
    return smooth


def _interp_checked(radii, values, r):
    if r < radii[0] * (1 - RANGE_SLACK) or r > radii[-1] * (1 + RANGE_SLACK):
        raise RangeError(
            "Radius %s lies outside the profile range [%s, %s]." % (r, radii[0], radii[-1])
        )
    return float(np.interp(r, radii, values))


def _pinch_value(radii, theta_bar_values, r):
    raw = _interp_checked(radii, theta_bar_values, 8 * r) - _interp_checked(radii, theta_bar_values, r)
    if raw < 0:
        logging.debug("Negative pinch %s at r=%s clamped to 0", raw, r)
        return 0.0
    return raw


def pinch(profile, r):
    """Return W_r = Theta_bar(8r) - Theta_bar(r), clamped at 0."""
    return _pinch_value(profile.radii, profile.theta_bar, r)


def boundary_flux(u, model, x, r, directions=FLUX_DIRECTIONS, seed=0, gradient=None):
    """
    Return int_{dB_r(x)} F_p |du/dr|^2 by Monte-Carlo over random
    directions with trilinear sampling of u and its gradient.
    """
    domain = u.domain
    n_dim = domain.n_dim
    q_dim = u.q_dim
    rng = np.random.default_rng(seed)
    omega = normalize(rng.standard_normal((directions, n_dim)))
    points = np.asarray(x, dtype=float) + r * omega
    if gradient is None:
        gradient = grid_gradient(u.values, domain.spacing, n_dim)
    stacked = np.moveaxis(gradient, 0, -2).reshape(domain.dims + (n_dim * q_dim,))
    du = sample_array(stacked, domain, points).reshape(directions, n_dim, q_dim)
    values = sample_map(u, points)
    radial = np.einsum("di,diq->dq", omega, du)
    gradsq = np.sum(du ** 2, axis=(1, 2))
    fp_value = model.evaluate(points, values, gradsq)[1]
    area = sphere_area(n_dim) * r ** (n_dim - 1)
    return float(area * np.mean(fp_value * np.sum(radial ** 2, axis=-1)))


def monotone_profile(u, model, center, radii, eps_mollifier=EPS_MOLLIFIER,
                     flux_directions=FLUX_DIRECTIONS, seed=0, density=None, gradient=None):
    """Return the MonotoneProfile of u about center at the given radii."""
    center = np.asarray(center, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise DomainError("Profile radii must be strictly increasing.")
    if density is None:
        density = energy_density(u, model).density
    if gradient is None:
        gradient = grid_gradient(u.values, u.domain.spacing, u.n_dim)
    thetas = np.array([theta(u, model, center, r, density) for r in radii])
    bar, h_vals = theta_bar(model, radii, thetas)
    if len(radii) >= MIN_SMOOTH_SAMPLES:
        smooth = theta_smoothed(radii, bar, eps_mollifier)
    else:
        smooth = np.full(len(radii), np.nan)
    pinches = np.full(len(radii), np.nan)
    for i, r in enumerate(radii):
        if 8 * r <= radii[-1] * (1 + RANGE_SLACK):
            pinches[i] = _pinch_value(radii, bar, r)
    rng = np.random.default_rng(seed)
    flux = np.array([
        boundary_flux(u, model, center, r, flux_directions, rng.integers(2 ** 32), gradient)
        for r in radii
    ])
    return MonotoneProfile(
        center, radii, thetas, h_vals, bar, smooth, pinches, flux, mollifier_mass(eps_mollifier)
    )


def _profiles_for_centers(indexed_centers, u, model, radii, eps_mollifier, flux_directions, seed):
    density = energy_density(u, model).density
    gradient = grid_gradient(u.values, u.domain.spacing, u.n_dim)
    return [
        (i, monotone_profile(u, model, center, radii, eps_mollifier, flux_directions,
                             [seed, i], density, gradient))
        for i, center in indexed_centers
    ]


def profiles(u, model, centers, radii, eps_mollifier=EPS_MOLLIFIER,
             flux_directions=FLUX_DIRECTIONS, threads=1, seed=0):
    """Return one profile per center, in order; centers are split over threads."""
    indexed_centers = list(enumerate(np.asarray(centers, dtype=float)))
    if threads == 1 or len(indexed_centers) < 2:
        result = _profiles_for_centers(
            indexed_centers, u, model, radii, eps_mollifier, flux_directions, seed
        )
    else:
        get_profiles = partial(
            _profiles_for_centers, u=u, model=model, radii=radii,
            eps_mollifier=eps_mollifier, flux_directions=flux_directions, seed=seed,
        )
        center_groups = [a for a in partition(indexed_centers, threads) if a]
        pool = mp.Pool(threads)
        grouped = pool.map(get_profiles, center_groups)
        pool.close()
        result = [a for group in grouped for a in group]
    return [profile for _, profile in sorted(result, key=lambda a: a[0])]


def monotonicity_report(u, model, centers, radii, eps_mollifier=EPS_MOLLIFIER,
                        flux_directions=FLUX_DIRECTIONS, threads=1, seed=0):
    """
    Count drops of Theta_bar between consecutive radii below -tol, where
    tol = TOL_MONO_FACTOR * max Theta_bar, and compare each increase with
    the boundary flux term int_r^r' 2 s^(2-n) flux(s) ds.
    """
    profile_list = profiles(u, model, centers, radii, eps_mollifier, flux_directions, threads, seed)
    n_dim = u.n_dim
    lambda_max = max([float(np.max(np.abs(p.theta_bar))) for p in profile_list] + [0.0])
    tol = TOL_MONO_FACTOR * lambda_max
    violations = 0
    max_violation = 0.0
    flux_violations = 0
    max_flux_gap = 0.0
    per_center = []
    for profile in profile_list:
        increase = np.diff(profile.theta_bar)
        flux_term = 2 * profile.radii ** (2 - n_dim) * profile.flux
        flux_increase = 0.5 * (flux_term[1:] + flux_term[:-1]) * np.diff(profile.radii)
        drops = increase < -tol
        flux_gaps = increase < flux_increase - tol
        violations += int(np.sum(drops))
        flux_violations += int(np.sum(flux_gaps))
        if np.any(drops):
            max_violation = max(max_violation, float(-np.min(increase)))
        if np.any(flux_gaps):
            max_flux_gap = max(max_flux_gap, float(np.max(flux_increase - increase)))
        per_center.append({
            "center": profile.center.tolist(),
            "violations": int(np.sum(drops)),
            "flux_violations": int(np.sum(flux_gaps)),
            "min_increase": float(np.min(increase)) if increase.size else 0.0,
        })
    if violations:
        logging.warning("Theta_bar drops below -%s at %i radius pairs", tol, violations)
    return MonotonicityReport(
        profile_list, tol, lambda_max, violations, max_violation,
        flux_violations, max_flux_gap, per_center,
    )


def rigidity_pinched(profile, r, delta):
    """True when Theta_bar(r) - Theta_bar(r / 2) < delta."""
    radii = profile.radii
    drop = _interp_checked(radii, profile.theta_bar, r) - _interp_checked(radii, profile.theta_bar, r / 2)
    return drop < delta


def dimension_reduction_set(theta_bar_fn, points, delta, rho, radius=1.0):
    """Return the points y with Theta_bar(y, R) - Theta_bar(y, rho R) < delta."""
    points = np.asarray(points, dtype=float)
    keep = [
        theta_bar_fn(y, radius) - theta_bar_fn(y, rho * radius) < delta for y in points
    ]
    return points[np.array(keep, dtype=bool)] if len(points) else points


def pinched_drop_set(theta_bar_fn, points, energy_bound, delta, rho, radius=1.0):
    """Return the points y with Theta_bar(y, rho R) < E - delta."""
    points = np.asarray(points, dtype=float)
    keep = [theta_bar_fn(y, rho * radius) < energy_bound - delta for y in points]
    return points[np.array(keep, dtype=bool)] if len(points) else points


def cone_splitting_candidates(theta_bar_fn, points, k, delta, rho, radius=1.0):
    """
    Return (spans, pinched, plane): the pinched points of
    dimension_reduction_set and whether k + 1 of them rho R-effectively
    span a k-plane.
    """
    pinched = dimension_reduction_set(theta_bar_fn, points, delta, rho, radius)
    if len(pinched) < k + 1:
        return False, pinched, None
    spans, plane = effective_span(pinched, rho * radius, k)
    return spans, pinched, plane


class ThetaBarOracle:
    """
    Theta_bar(y, r) of a fixed map, with r clamped to
    [4h, dist(y, boundary)] and values cached per (y, r).
    """
    def __init__(self, u, model, density=None):
        self.u = u
        self.model = model
        if density is None:
            density = energy_density(u, model).density
        self.density = density
        self._cache = {}
        self._h_cache = {}

    def clamp(self, y, r):
        domain = self.u.domain
        return min(max(r, MIN_RADIUS_CELLS * domain.spacing), domain.distance_to_boundary(y))

    def correction(self, r):
        key = round(r, 12)
        if key not in self._h_cache:
            self._h_cache[key] = correction_h(self.model, r)
        return self._h_cache[key]

    def __call__(self, y, r):
        y = np.asarray(y, dtype=float)
        r = self.clamp(y, r)
        key = (tuple(np.round(y, 12)), round(r, 12))
        if key not in self._cache:
            value = theta(self.u, self.model, y, r, self.density)
            factor = np.exp(self.model.vartheta * r / self.model.c_e)
            self._cache[key] = float(factor * value + self.correction(r))
        return self._cache[key]
