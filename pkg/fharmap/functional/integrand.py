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


import os
import copy
import logging
from collections import namedtuple
import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.stats import qmc
from .errors import (
    DomainError,
    DimensionError,
    ExtrapolationError,
    IntegrabilityError,
    StateError,
    ConfigError,
)
from .utilities import parse_table_file, loglog_slope

TAIL_TOL = 1e-10
EPS_CAL = 0.1
LHS_SAMPLES = 256
MAX_DOUBLINGS = 200
A_SEARCH_LIMIT = 2.0 ** 64
TAIL_FIT_SAMPLES = 16
TAIL_FLOOR = 1e-9
# relative slack for the sampled sandwich and sign checks
CHECK_SLACK = 1e-12

tail_integral = namedtuple("tail_integral", "value cutoff tail")
assumption_report = namedtuple(
    "assumption_report",
    "ellipticity derived_bound xz_bound convexity integrability passed "
    "expr_min expr_max fp_min fp_max min_fpp integrability_C integrability_D "
    "tail_C tail_D p_max_checked skipped_samples sample_bound",
)


def _power_law_tail(func, cutoff):
    """Tail of the integral of func beyond cutoff, assuming power-law decay."""
    f_end = func(cutoff)
    if f_end <= 0:
        return 0.0
    f_half = func(cutoff / 2)
    if f_half <= f_end:
        return np.inf
    decay = np.log2(f_half / f_end)
    if decay <= 1:
        return np.inf
    return f_end * cutoff / (decay - 1)


def _quad_log(func, lower, upper):
    """Integrate func over [lower, upper] with lower > 0 in log space."""
    if upper <= lower:
        return 0.0
    value = quad(
        lambda s: func(np.exp(s)) * np.exp(s),
        np.log(lower),
        np.log(upper),
        limit=400,
        epsabs=1e-14,
        epsrel=1e-11,
    )[0]
    return value


def integrate_to_infinity(func, lower, cutoff=None, tol=TAIL_TOL, scale=1.0):
    """
    Return the integral of a non-negative func over [lower, inf).
    Without a cutoff the upper limit is doubled from max(2 * lower, 2) until
    scale times the power-law tail estimate falls below tol.
    """
    raw_func = func

    def func(t):
        return float(raw_func(t))

    if cutoff is None:
        cutoff = max(2.0 * lower, 2.0)
        tail = _power_law_tail(func, cutoff)
        doublings = 0
        while scale * tail > tol:
            doublings += 1
            if doublings > MAX_DOUBLINGS:
                raise IntegrabilityError(
                    "Tail integral beyond %s does not converge." % lower
                )
            cutoff *= 2.0
            tail = _power_law_tail(func, cutoff)
        logging.debug("Tail cutoff %s after %i doublings", cutoff, doublings)
    else:
        tail = _power_law_tail(func, cutoff)
        if scale * tail > tol:
            raise IntegrabilityError(
                "Tail estimate %s at cutoff %s is above tolerance." % (tail, cutoff)
            )
    value = 0.0
    start = lower
    if lower < 1.0:
        split = min(1.0, cutoff)
        value += quad(func, lower, split, limit=400, epsabs=1e-14, epsrel=1e-11)[0]
        start = split
    value += _quad_log(func, start, cutoff)
    return tail_integral(value, cutoff, tail)


def jensen_transform(gprime, x, cutoff=None, g=None):
    """
    Return J_g(x) = g(x) + x * int_x^inf g'(t) / t dt for a non-negative
    derivative gprime. g is a value or a callable; when missing it is
    recovered as the integral of gprime from 0 (so g(0) = 0).
    """
    if x < 0:
        raise DomainError("Jensen transform needs x >= 0, got %s." % x)
    if g is None:
        g_value = quad(gprime, 0, x, limit=200)[0] if x > 0 else 0.0
    elif callable(g):
        g_value = float(g(x))
    else:
        g_value = float(g)
    if x == 0:
        return g_value
    tail = integrate_to_infinity(
        lambda t: gprime(t) / t,
        x,
        cutoff=cutoff,
        tol=TAIL_TOL * max(1.0, abs(g_value)),
        scale=x,
    )
    return g_value + x * tail.value


def default_p_samples(p_max=1e6, count=241):
    """Return 0 followed by log-uniform samples up to p_max."""
    return np.concatenate(([0.0], np.logspace(-6, np.log10(p_max), count)))


class IntegrandModel:
    """
    An admissible integrand F(x, z, p) = s^2 m(c + s x, z) F0(p / s^2),
    where F0 is the base kind, m = 1 + modulation * sin(x_1 + z_1) and
    (s, c) record the rescalings applied so far.
    """
    def __init__(
        self,
        kind="dirichlet",
        n_dim=3,
        q_dim=3,
        ellipticity_B=None,
        vartheta=0.0,
        beta=0.5,
        table=None,
        modulation=0.0,
    ):
        self.kind = None
        self.n_dim = None
        self.q_dim = None
        self.ellipticity_B = None
        self.vartheta = None
        self.beta = None
        self.modulation = 0.0
        self.scale = 1.0
        self.center = None
        self.A_constant = None
        self.integrability_C = None
        self.integrability_D = None
        self.xz_sample = None
        self.modulation_sup = 1.0
        self.modulation_inf = 1.0
        self._spline = None
        self._spline_d1 = None
        self._spline_d2 = None
        self._p_range = None
        self._tail_c = 0.0
        self._tail_a = np.inf
        self._set_par(kind, n_dim, q_dim, ellipticity_B, vartheta, beta, table, modulation)

    def _set_par(self, kind, n_dim, q_dim, ellipticity_B, vartheta, beta, table, modulation):
        if kind not in ["dirichlet", "saturating", "tabulated"]:
            raise DomainError("Integrand kind %s is not recognized." % kind)
        if n_dim < 1 or q_dim < 1:
            raise DomainError("Dimensions must be positive, got n=%s q=%s." % (n_dim, q_dim))
        if ellipticity_B is None:
            ellipticity_B = n_dim * q_dim / 2.0 + 1
        if ellipticity_B <= 1:
            raise DomainError("Ellipticity constant must exceed 1, got %s." % ellipticity_B)
        if vartheta < 0:
            raise DomainError("vartheta must be >= 0, got %s." % vartheta)
        if kind == "saturating" and not 0 < beta <= 1:
            raise DomainError("Saturating integrand needs 0 < beta <= 1, got %s." % beta)
        self.kind = kind
        self.n_dim = int(n_dim)
        self.q_dim = int(q_dim)
        self.ellipticity_B = float(ellipticity_B)
        self.vartheta = float(vartheta)
        self.beta = float(beta)
        self.modulation = float(modulation)
        self.center = np.zeros(self.n_dim)
        if kind == "tabulated":
            if table is None:
                raise StateError("Tabulated integrand needs (p, F) samples.")
            self._set_table(table[0], table[1])
        self._set_modulation_bounds()

    def set_model_par(self, dpar_tmp, model_id, table_dir=None):
        """Set the integrand from a parsed model parameter file."""
        if model_id not in dpar_tmp:
            raise ConfigError("model.preset", "model id %s is not recognized" % model_id)
        model_parameter = dpar_tmp[model_id]
        kind = model_parameter["kind"][0]
        n_dim = int(model_parameter["dimensions"][0])
        q_dim = int(model_parameter["dimensions"][1])
        ellipticity_B = float(model_parameter["ellipticity"][0])
        vartheta = float(model_parameter.get("vartheta", ["0"])[0])
        beta = float(model_parameter.get("beta", ["0.5"])[0])
        modulation = float(model_parameter.get("modulation", ["0"])[0])
        table = None
        if kind == "tabulated":
            table_file = model_parameter["table"][0]
            if table_dir is not None:
                table_file = os.path.join(table_dir, table_file)
            table = parse_table_file(table_file)
        self._set_par(kind, n_dim, q_dim, ellipticity_B, vartheta, beta, table, modulation)

    @property
    def c_e(self):
        return self.n_dim * self.q_dim * self.ellipticity_B / 2.0

    def _set_table(self, p_values, f_values):
        p_values = np.asarray(p_values, dtype=float)
        f_values = np.asarray(f_values, dtype=float)
        self._spline = PchipInterpolator(p_values, f_values, extrapolate=False)
        self._spline_d1 = self._spline.derivative(1)
        self._spline_d2 = self._spline.derivative(2)
        self._p_range = (p_values[0], p_values[-1])
        # F'' beyond the table is continued as c * p^-a, fitted on the last octave
        p_hi = p_values[-1]
        fit_points = np.logspace(np.log10(p_hi / 2), np.log10(p_hi * (1 - 1e-9)), TAIL_FIT_SAMPLES)
        fpp_values = self._spline_d2(fit_points)
        # curvature below round-off of F'/p counts as none
        positive = fpp_values > TAIL_FLOOR * np.abs(self._spline_d1(fit_points)) / fit_points
        if np.sum(positive) < 2:
            self._tail_c = 0.0
            self._tail_a = np.inf
        else:
            fit = loglog_slope(fit_points[positive], fpp_values[positive])
            self._tail_c = float(np.exp(fit.intercept))
            self._tail_a = -fit.slope
        logging.debug("Table tail F'' ~ %s * p^-%s", self._tail_c, self._tail_a)

    def _set_modulation_bounds(self):
        sampler = qmc.LatinHypercube(d=self.n_dim + self.q_dim, seed=0)
        sample = 2 * sampler.random(LHS_SAMPLES) - 1
        self.xz_sample = (sample[:, : self.n_dim], sample[:, self.n_dim:])
        if self.modulation == 0:
            self.modulation_sup = 1.0
            self.modulation_inf = 1.0
        else:
            m_values = 1 + self.modulation * np.sin(self.xz_sample[0][:, 0] + self.xz_sample[1][:, 0])
            self.modulation_sup = float(np.max(m_values))
            self.modulation_inf = float(np.min(m_values))

    def _base(self, q):
        """Return F0, F0' and F0'' at q = p / s^2."""
        if self.kind == "dirichlet":
            return q.copy(), np.ones_like(q), np.zeros_like(q)
        if self.kind == "saturating":
            beta = self.beta
            base = (q + 1) ** (-beta)
            f0 = q * (2 - base)
            f1 = 2 - base + beta * q * (q + 1) ** (-beta - 1)
            f2 = beta * (q + 1) ** (-beta - 2) * ((1 - beta) * q + 2)
            return f0, f1, f2
        p_lo, p_hi = self._p_range
        if np.any(q < p_lo * (1 - CHECK_SLACK)) or np.any(q > p_hi * (1 + CHECK_SLACK)):
            raise ExtrapolationError(
                "Tabulated integrand queried outside [%s, %s]." % (p_lo, p_hi)
            )
        q = np.clip(q, p_lo, p_hi)
        return self._spline(q), self._spline_d1(q), self._spline_d2(q)

    def _modulation(self, x, z):
        if self.modulation == 0:
            return None, None
        if x is None or z is None:
            raise DomainError("x and z are required for a modulated integrand.")
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if x.shape[-1] != self.n_dim or z.shape[-1] != self.q_dim:
            raise DimensionError(
                "Expected x in R^%i and z in R^%i." % (self.n_dim, self.q_dim)
            )
        phase = self.center[0] + self.scale * x[..., 0] + z[..., 0]
        return 1 + self.modulation * np.sin(phase), self.modulation * np.cos(phase)

    def evaluate(self, x, z, p):
        """Return (F, F_p, F_pp) at (x, z, p); arrays broadcast."""
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise DomainError("Integrand needs p >= 0.")
        if x is not None and np.asarray(x).shape[-1] != self.n_dim:
            raise DimensionError("Expected x in R^%i." % self.n_dim)
        if z is not None and np.asarray(z).shape[-1] != self.q_dim:
            raise DimensionError("Expected z in R^%i." % self.q_dim)
        s2 = self.scale ** 2
        f0, f1, f2 = self._base(p / s2)
        m_value, _ = self._modulation(x, z)
        if m_value is None:
            return s2 * f0, f1, f2 / s2
        return s2 * m_value * f0, m_value * f1, m_value * f2 / s2

    def xz_derivatives(self, x, z, p):
        """Return (F_x, F_z) with trailing axes of length n and q."""
        p = np.asarray(p, dtype=float)
        shape = np.broadcast(p, p).shape
        f_x = np.zeros(shape + (self.n_dim,))
        f_z = np.zeros(shape + (self.q_dim,))
        if self.modulation == 0:
            return f_x, f_z
        s2 = self.scale ** 2
        f0 = self._base(p / s2)[0]
        _, dm_value = self._modulation(x, z)
        f_z[..., 0] = s2 * dm_value * f0
        f_x[..., 0] = self.scale * f_z[..., 0]
        return f_x, f_z

    def error_term(self, x, z, p):
        """Return e = F_p p - F."""
        f_value, fp_value, _ = self.evaluate(x, z, p)
        return fp_value * np.asarray(p, dtype=float) - f_value

    # Bounds over (x, z); for modulated models these are sample bounds.
    def _base_extended(self, q):
        """Return e0 and F0'' at q, continuing a table past its last sample."""
        q = np.asarray(q, dtype=float)
        if self.kind != "tabulated":
            f0, f1, f2 = self._base(q)
            return f1 * q - f0, f2
        p_hi = self._p_range[1]
        inside = np.minimum(q, p_hi)
        f0, f1, f2 = self._base(inside)
        e0 = f1 * inside - f0
        over = q > p_hi
        if np.any(over) and self._tail_c > 0:
            c_tail = self._tail_c
            a_tail = self._tail_a
            q_over = q[over] if q.ndim else q
            if abs(a_tail - 2) < 1e-12:
                extra = c_tail * np.log(q_over / p_hi)
            else:
                extra = c_tail * (q_over ** (2 - a_tail) - p_hi ** (2 - a_tail)) / (2 - a_tail)
            fpp_over = c_tail * q_over ** (-a_tail)
            if q.ndim:
                e0[over] += extra
                f2[over] = fpp_over
            else:
                e0 = e0 + extra
                f2 = fpp_over
        elif np.any(over):
            f2 = np.where(over, 0.0, f2)
        return e0, f2

    def sup_error(self, p):
        """Sample bound of e over (x, z)."""
        s2 = self.scale ** 2
        return s2 * self.modulation_sup * self._base_extended(np.asarray(p, dtype=float) / s2)[0]

    def sup_error_derivative(self, p):
        """Sample bound of e_p over (x, z)."""
        s2 = self.scale ** 2
        q = np.asarray(p, dtype=float) / s2
        return self.modulation_sup * q * self._base_extended(q)[1]

    def sup_fpp(self, p):
        s2 = self.scale ** 2
        return self.modulation_sup * self._base_extended(np.asarray(p, dtype=float) / s2)[1] / s2

    def jensen_error(self, y):
        """Return J_e(y) for the error-term bounds of this model."""
        y = np.asarray(y, dtype=float)
        if self.kind == "dirichlet":
            return np.zeros_like(y)
        s2 = self.scale ** 2
        if self.kind == "saturating":
            q = y / s2
            # e0(q) + q (2 - F0'(q)) simplifies to q (q + 1)^-beta
            return s2 * self.modulation_sup * q * (q + 1) ** (-self.beta)
        values = [
            jensen_transform(self.sup_error_derivative, float(a), g=self.sup_error)
            for a in np.atleast_1d(y).ravel()
        ]
        return np.array(values).reshape(y.shape)

    def describe(self):
        """Return a JSON friendly summary."""
        return {
            "kind": self.kind,
            "beta": self.beta if self.kind == "saturating" else None,
            "B": self.ellipticity_B,
            "vartheta": self.vartheta,
            "n": self.n_dim,
            "q": self.q_dim,
            "c_e": self.c_e,
            "modulation": self.modulation,
            "scale": self.scale,
            "A": self.A_constant,
            "integrability_C": self.integrability_C,
            "integrability_D": self.integrability_D,
        }


def _correction_integral(model, a_constant, r):
    if r == 0 or model.kind == "dirichlet":
        return 0.0
    const = 2 * model.c_e * a_constant ** 2
    value = quad(
        lambda t: 2 * t * float(model.jensen_error(const / t ** 2)),
        0,
        r,
        limit=200,
        epsabs=1e-14,
        epsrel=1e-10,
    )[0]
    return value


def correction_h(model, r):
    """Return the monotonicity correction h(r) = 2 int_0^r t J_e(2 c_e A^2 / t^2) dt."""
    if r < 0:
        raise DomainError("Correction needs r >= 0, got %s." % r)
    if model.A_constant is None:
        raise StateError("Constant A is not set. Run calibrate_A first.")
    return _correction_integral(model, model.A_constant, r)


def calibrate_A(model, energy_at_scale_one, a_start=1.0, eps_cal=EPS_CAL):
    """
    Return the first A in a_start * 2^j with A^2 >= energy_at_scale_one and
    h(1) <= eps_cal * A^2, and store it in the model.
    """
    if energy_at_scale_one < 0:
        raise DomainError("Energy must be >= 0, got %s." % energy_at_scale_one)
    a_constant = a_start
    while True:
        if a_constant > A_SEARCH_LIMIT * a_start:
            raise IntegrabilityError(
                "Calibration of A exceeded %s; the error term is not integrable." % a_constant
            )
        if a_constant ** 2 >= energy_at_scale_one:
            h_one = _correction_integral(model, a_constant, 1.0)
            if h_one <= eps_cal * a_constant ** 2:
                break
        a_constant *= 2
    model.A_constant = a_constant
    logging.info("Calibrated A = %s for %s integrand", a_constant, model.kind)
    return a_constant


def rescale_model(model, lam, center=None):
    """Return the model of F^lam(x, z, p) = lam^2 F(center + lam x, z, p / lam^2)."""
    if not 0 < lam <= 1:
        raise DomainError("Rescaling needs lambda in (0, 1], got %s." % lam)
    rescaled = copy.copy(model)
    if center is not None:
        center = np.asarray(center, dtype=float)
        if center.shape != (model.n_dim,):
            raise DimensionError("Center must lie in R^%i." % model.n_dim)
        rescaled.center = model.center + model.scale * center
    else:
        rescaled.center = model.center.copy()
    rescaled.scale = model.scale * lam
    rescaled.integrability_C = None
    rescaled.integrability_D = None
    return rescaled


def compute_integrability(model):
    """Return and store the integrability constants C and D."""
    constant_c = integrate_to_infinity(
        lambda p: float(model.sup_fpp(p)) * np.log(p), 1.0
    )
    constant_d = integrate_to_infinity(
        lambda y: 0.5 * float(model.sup_error(y)) / y ** 2, 1.0
    )
    model.integrability_C = constant_c.value
    model.integrability_D = constant_d.value
    return constant_c, constant_d


def table_min_fpp(model):
    """
    Return the smallest F'' of a tabulated model over its whole table.
    The cubic interpolant has F'' linear on each interval, so its one-sided
    values at the knots bound it.
    """
    knots = model._spline.x
    width = np.diff(knots)
    left = knots[:-1] + CHECK_SLACK * width
    right = knots[1:] - CHECK_SLACK * width
    points = np.concatenate([left, right])
    fpp_values = model._spline_d2(points)
    # curvature below round-off of F'/p counts as none
    floor = TAIL_FLOOR * np.abs(model._spline_d1(points)) / points
    lowest = float(np.min(np.where(np.abs(fpp_values) <= floor, 0.0, fpp_values)))
    factor = model.modulation_inf if lowest >= 0 else model.modulation_sup
    return lowest * factor / model.scale ** 2


def verify_assumptions(model, p_samples=None):
    """
    Check ellipticity, the (x, z) bound, convexity and integrability of a
    model on sampled p (and on the Latin hypercube (x, z) sample when the
    integrand is modulated). Failures are reported, never raised.
    """
    if p_samples is None:
        p_samples = default_p_samples()
    p_samples = np.asarray(p_samples, dtype=float)
    skipped = 0
    if model.kind == "tabulated":
        s2 = model.scale ** 2
        p_lo, p_hi = model._p_range
        keep = (p_samples / s2 >= p_lo) & (p_samples / s2 <= p_hi)
        skipped = int(np.sum(~keep))
        p_samples = p_samples[keep]
    if model.modulation != 0:
        x_sample, z_sample = model.xz_sample
        x_grid = x_sample[:, None, :]
        z_grid = z_sample[:, None, :]
        p_grid = np.broadcast_to(p_samples[None, :], (len(x_sample), len(p_samples)))
    else:
        x_grid = None
        z_grid = None
        p_grid = p_samples
    f_value, fp_value, fpp_value = model.evaluate(x_grid, z_grid, p_grid)
    nq = model.n_dim * model.q_dim
    bound = model.ellipticity_B
    expr = fpp_value * p_grid + nq / 2.0 * fp_value
    slack = CHECK_SLACK * max(1.0, bound)
    ellipticity = bool(np.all(expr >= 1 / bound - slack) and np.all(expr <= bound + slack))
    derived = bool(
        np.all(fp_value >= 2 / (bound * nq) - slack) and np.all(fp_value <= 2 * bound / nq + slack)
    )
    f_x, f_z = model.xz_derivatives(x_grid, z_grid, p_grid)
    limit = model.vartheta * p_grid + CHECK_SLACK
    xz_bound = bool(
        np.all(np.linalg.norm(f_x, axis=-1) <= limit) and np.all(np.linalg.norm(f_z, axis=-1) <= limit)
    )
    min_fpp = float(np.min(fpp_value)) if fpp_value.size else 0.0
    if model.kind == "tabulated":
        min_fpp = min(min_fpp, table_min_fpp(model))
    convexity = min_fpp >= -CHECK_SLACK
    try:
        constant_c, constant_d = compute_integrability(model)
        integrability = bool(np.isfinite(constant_c.value) and np.isfinite(constant_d.value))
        values = (constant_c.value, constant_d.value, constant_c.tail, constant_d.tail)
    except IntegrabilityError as error:
        logging.warning("Integrability check failed: %s", error)
        integrability = False
        values = (np.inf, np.inf, np.inf, np.inf)
    passed = ellipticity and derived and xz_bound and convexity and integrability
    return assumption_report(
        ellipticity,
        derived,
        xz_bound,
        convexity,
        integrability,
        passed,
        float(np.min(expr)) if expr.size else None,
        float(np.max(expr)) if expr.size else None,
        float(np.min(fp_value)) if fp_value.size else None,
        float(np.max(fp_value)) if fp_value.size else None,
        min_fpp,
        values[0],
        values[1],
        values[2],
        values[3],
        float(np.max(p_samples)) if p_samples.size else 0.0,
        skipped,
        model.modulation != 0,
    )
