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


import datetime
import logging
from collections import namedtuple
import numpy as np
from .errors import DomainError, NumericError, ResolutionError, StallError
from .fields import grid_gradient, hedgehog_values, normalize

STALL_STEP = 1e-14
RESIDUAL_TRIALS = 16
MIN_BUMP_CELLS = 4
BUMP_FRACTION = (0.1, 0.3)
LOG_EVERY = 50
RESIDUAL_EVERY = 25
MAX_STEP_RATIO = 1e3

SolveConfig = namedtuple(
    "SolveConfig",
    "max_iters step0 backtrack_factor energy_tol residual_tol trials boundary",
)
SolveConfig.__new__.__defaults__ = (500, None, 0.5, 1e-8, 1e-2, RESIDUAL_TRIALS, "trace")

SolveReport = namedtuple(
    "SolveReport",
    "iters final_energy energy_history el_residual stat_residual converged",
)


def _check_config(cfg):
    if cfg.max_iters < 0:
        raise DomainError("max_iters must be >= 0, got %s." % cfg.max_iters)
    if cfg.step0 is not None and cfg.step0 <= 0:
        raise DomainError("step0 must be > 0, got %s." % cfg.step0)
    if not 0 < cfg.backtrack_factor < 1:
        raise DomainError("backtrack_factor must lie in (0, 1), got %s." % cfg.backtrack_factor)
    if cfg.energy_tol <= 0:
        raise DomainError("energy_tol must be > 0, got %s." % cfg.energy_tol)
    if cfg.boundary not in ["trace", "hedgehog"]:
        raise DomainError("Boundary condition %s is not recognized." % cfg.boundary)


def _gradient_adjoint(field, spacing, axis):
    """Apply the transpose of np.gradient (edge_order=1) along axis."""
    field = np.moveaxis(field, axis, 0)
    out = np.zeros_like(field)
    out[2:] += field[1:-1] / (2 * spacing)
    out[:-2] -= field[1:-1] / (2 * spacing)
    out[0] -= field[0] / spacing
    out[1] += field[0] / spacing
    out[-1] += field[-1] / spacing
    out[-2] -= field[-1] / spacing
    return np.moveaxis(out, 0, axis)


def discrete_energy(values, domain, model):
    """Return E_h = sum over domain cells of F(x, u, |grad_h u|^2) h^n."""
    gradient = grid_gradient(values, domain.spacing, domain.n_dim)
    gradsq = np.sum(gradient ** 2, axis=(0, -1))
    density = model.evaluate(domain.coordinates(), values, gradsq)[0]
    return float(np.sum(density[domain.mask()]) * domain.cell_volume)


def energy_gradient(values, domain, model):
    """Return the exact gradient of discrete_energy with respect to values."""
    n_dim = domain.n_dim
    spacing = domain.spacing
    points = domain.coordinates()
    mask = domain.mask()[..., None]
    gradient = grid_gradient(values, spacing, n_dim)
    gradsq = np.sum(gradient ** 2, axis=(0, -1))
    fp_value = model.evaluate(points, values, gradsq)[1][..., None]
    _, f_z = model.xz_derivatives(points, values, gradsq)
    out = mask * f_z
    for axis in range(n_dim):
        out += _gradient_adjoint(2 * mask * fp_value * gradient[axis], spacing, axis)
    return out * domain.cell_volume


def tangent_part(vectors, values):
    """Remove the component of vectors along the unit field values."""
    return vectors - np.sum(vectors * values, axis=-1, keepdims=True) * values


def default_step(domain, model):
    fp_max = 2 * model.ellipticity_B / (model.n_dim * model.q_dim)
    return domain.spacing ** (2 - domain.n_dim) / (4 * domain.n_dim * fp_max)


def _bb_step(step_change, gradient_change, step0):
    """Barzilai-Borwein step <s, s> / <s, y>, capped at MAX_STEP_RATIO * step0."""
    curvature = np.sum(step_change * gradient_change)
    if curvature <= 0:
        return step0
    return min(np.sum(step_change ** 2) / curvature, MAX_STEP_RATIO * step0)


def minimize(u0, model, cfg=None):
    """
    Projected gradient descent u <- P(u - tau grad E_h(u)) with frozen
    boundary cells. tau starts from a Barzilai-Borwein estimate and is
    multiplied by backtrack_factor until the energy decreases. Once the
    relative decrease falls below energy_tol the residuals are checked
    every RESIDUAL_EVERY iterations; the run converges when both are below
    residual_tol. Returns (SphereMap, SolveReport).
    """
    if cfg is None:
        cfg = SolveConfig()
    _check_config(cfg)
    domain = u0.domain
    frozen = u0.boundary_mask
    values = u0.values.copy()
    if cfg.boundary == "hedgehog":
        trace = hedgehog_values(domain.coordinates(), domain.center)
        values[frozen] = trace[frozen]
    step0 = cfg.step0 if cfg.step0 is not None else default_step(domain, model)
    step = step0
    energy = discrete_energy(values, domain, model)
    history = [energy]
    iters = 0
    converged = False
    el_value = None
    stat_value = None
    last_check = None
    previous = None
    logging.info("Minimizing from energy %s at %s", energy, datetime.datetime.now())
    while iters < cfg.max_iters:
        direction = energy_gradient(values, domain, model)
        if not np.all(np.isfinite(direction)):
            raise NumericError("Energy gradient is not finite at iteration %i." % iters)
        direction = tangent_part(direction, values)
        direction[frozen] = 0
        if not np.any(direction):
            converged = True
            break
        if previous is not None:
            step = _bb_step(values - previous[0], direction - previous[1], step0)
        stalled = False
        while True:
            trial = normalize(values - step * direction)
            trial[frozen] = values[frozen]
            trial_energy = discrete_energy(trial, domain, model)
            if np.isnan(trial_energy):
                raise NumericError("Energy is NaN at iteration %i." % iters)
            if trial_energy < energy:
                break
            step *= cfg.backtrack_factor
            if step < STALL_STEP:
                stalled = True
                break
        if stalled:
            if last_check is None:
                raise StallError(
                    "No energy decrease at step %s after %i iterations." % (step, iters)
                )
            # at a discrete critical point to round-off
            logging.warning("No energy decrease at step %s after %i iterations", step, iters)
            break
        decrease = energy - trial_energy
        previous = (values, direction)
        values = trial
        energy = trial_energy
        history.append(energy)
        iters += 1
        if iters % LOG_EVERY == 0:
            logging.info("Iteration %i energy %s", iters, energy)
        if decrease >= cfg.energy_tol * max(abs(energy), np.finfo(float).tiny):
            continue
        if last_check is not None and iters - last_check < RESIDUAL_EVERY:
            continue
        last_check = iters
        u = u0.with_values(values)
        el_value = el_residual(u, model, cfg.trials)
        stat_value = stationarity_residual(u, model, cfg.trials)
        logging.debug("Iteration %i residuals %s %s", iters, el_value, stat_value)
        if el_value < cfg.residual_tol and stat_value < cfg.residual_tol:
            converged = True
            break
    u = u0.with_values(values)
    if last_check != iters:
        el_value = el_residual(u, model, cfg.trials)
        stat_value = stationarity_residual(u, model, cfg.trials)
    if not converged:
        logging.warning(
            "Minimizer stopped at max_iters=%i, energy %s, residuals %s %s",
            cfg.max_iters, energy, el_value, stat_value,
        )
    report = SolveReport(iters, energy, history, el_value, stat_value, converged)
    logging.info("Minimized to energy %s in %i iterations", energy, iters)
    return u, report


def _interior_radius(domain):
    if domain.shape == "ball":
        return domain.radius
    return 0.5 * domain.spacing * min(domain.dims)


def _bump(domain, center, radius):
    """Tensor bump prod_i (1 - s_i^2)^3 with s = (x - center) / radius."""
    scaled = (domain.coordinates() - center) / radius
    factors = np.where(np.abs(scaled) < 1, (1 - scaled ** 2) ** 3, 0.0)
    return np.prod(factors, axis=-1)


def _test_bumps(domain, trials, seed, radius_fraction):
    """
    Yield (rng, bump) pairs supported well inside the domain. Bump radii
    are drawn from radius_fraction times the domain radius and kept at
    least MIN_BUMP_CELLS cells wide.
    """
    if trials < 1:
        raise DomainError("Residual checks need trials >= 1, got %s." % trials)
    rng = np.random.default_rng(seed)
    big_r = _interior_radius(domain)
    n_dim = domain.n_dim
    floor = MIN_BUMP_CELLS * domain.spacing
    low = max(radius_fraction[0] * big_r, floor)
    high = max(radius_fraction[1] * big_r, floor)
    if 0.9 * big_r - high * np.sqrt(n_dim) <= 0:
        raise ResolutionError("Grid is too coarse for residual test fields.")
    for _ in range(trials):
        radius = rng.uniform(low, high)
        reach = 0.9 * big_r - radius * np.sqrt(n_dim)
        while True:
            offset = rng.uniform(-reach, reach, n_dim)
            if np.linalg.norm(offset) < reach:
                break
        yield rng, _bump(domain, domain.center + offset, radius)


def _dual_ratio(pairing, fluxes, tests):
    """
    Return |pairing| / (||fluxes|| ||tests||). Each pairing term is the
    integral of a flux against a test array, so the ratio lies in [0, 1].
    """
    flux_norm = np.sqrt(sum(np.sum(flux ** 2) for flux in fluxes))
    test_norm = np.sqrt(sum(np.sum(test ** 2) for test in tests))
    if flux_norm == 0 or test_norm == 0:
        return 0.0
    return float(abs(pairing) / (flux_norm * test_norm))


def el_residual(u, model, trials=RESIDUAL_TRIALS, seed=0, radius_fraction=BUMP_FRACTION):
    """
    Return the largest weak Euler-Lagrange pairing
    |int F_z.zeta + 2 F_p grad u : grad zeta| / (||zeta||_H1 Lambda) over
    random bump test fields zeta tangent to the sphere along u, where
    Lambda is the L2 norm of (F_z, 2 F_p grad u) on the support of zeta.
    """
    domain = u.domain
    points = domain.coordinates()
    mask = domain.mask()
    gradient = grid_gradient(u.values, domain.spacing, domain.n_dim)
    gradsq = np.sum(gradient ** 2, axis=(0, -1))
    fp_value = model.evaluate(points, u.values, gradsq)[1]
    _, f_z = model.xz_derivatives(points, u.values, gradsq)
    stress = 2 * fp_value[..., None] * gradient
    worst = 0.0
    for rng, bump in _test_bumps(domain, trials, seed, radius_fraction):
        direction = rng.standard_normal(u.q_dim)
        direction /= np.linalg.norm(direction)
        zeta = bump[..., None] * tangent_part(np.broadcast_to(direction, u.values.shape), u.values)
        zeta_gradient = grid_gradient(zeta, domain.spacing, domain.n_dim)
        support = mask & (bump > 0)
        pairing = np.sum(np.sum(f_z * zeta, axis=-1)[mask]) + np.sum(
            np.sum(stress * zeta_gradient, axis=(0, -1))[mask]
        )
        fluxes = [f_z[support], stress[:, support]]
        tests = [zeta[mask], zeta_gradient[:, mask]]
        worst = max(worst, _dual_ratio(pairing, fluxes, tests))
    return worst


def stationarity_residual(u, model, trials=RESIDUAL_TRIALS, seed=0, radius_fraction=BUMP_FRACTION):
    """
    Return the largest inner-variation pairing
    |int T : grad X + F_x . X| / (||X||_H1 Lambda) over random bump vector
    fields X, with T_ab = F delta_ab - 2 F_p (du_a . du_b) and Lambda the
    L2 norm of (T, F_x) on the support of X.
    """
    domain = u.domain
    n_dim = domain.n_dim
    points = domain.coordinates()
    mask = domain.mask()
    gradient = grid_gradient(u.values, domain.spacing, n_dim)
    gradsq = np.sum(gradient ** 2, axis=(0, -1))
    f_value, fp_value, _ = model.evaluate(points, u.values, gradsq)
    f_x, _ = model.xz_derivatives(points, u.values, gradsq)
    # energy-momentum tensor T[a, b]
    tensor = -2 * fp_value * np.einsum("a...k,b...k->ab...", gradient, gradient)
    for a in range(n_dim):
        tensor[a, a] += f_value
    worst = 0.0
    for rng, bump in _test_bumps(domain, trials, seed, radius_fraction):
        direction = rng.standard_normal(n_dim)
        direction /= np.linalg.norm(direction)
        field = bump[..., None] * direction
        # field_gradient[a][..., b] = d_a X^b
        field_gradient = np.moveaxis(grid_gradient(field, domain.spacing, n_dim), -1, 1)
        support = mask & (bump > 0)
        pairing = np.sum(np.sum(tensor * field_gradient, axis=(0, 1))[mask]) + np.sum(
            np.sum(f_x * field, axis=-1)[mask]
        )
        fluxes = [tensor[:, :, support], f_x[support]]
        tests = [field[mask], field_gradient[:, :, mask]]
        worst = max(worst, _dual_ratio(pairing, fluxes, tests))
    return worst
