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
import datetime
from collections import namedtuple
import numpy as np
from ..functional.errors import StateError
from ..functional.fields import energy_density, total_energy
from ..functional.integrand import calibrate_A
from ..functional.utilities import fibonacci_sphere
from .covering import covering_refine, l2_approx_check, minkowski_dimension
from .jones import discrete_measure, jones_beta, reifenberg_integral
from .monotone import ThetaBarOracle, monotonicity_report
from .symmetry import (
    default_eps0,
    regularity_consistency,
    singular_cores,
    singular_detect,
    stratum_report,
)

MIN_SINGULAR_RADII = 2
BETA_REFINE = 1


class MapAnalyzer:
    """
    Density, strata and covering analysis of one map under one integrand
    """
    analysis_call = namedtuple(
        "analysis_call",
        "A_constant monotonicity eps0 singular cores strata consistency beta cover dimension",
    )
    beta_row = namedtuple("beta_row", "center r k beta reifenberg ratio below lhs rhs applicable l2_ratio")

    def __init__(self):
        self.u = None
        self.model = None
        self.analysis = None
        self.strata = None
        self.threads = 1
        self.seed = 0
        self.density = None
        self.oracle = None
        self.monotonicity = None
        self.eps0 = None
        self.singular = None
        self.cores = None
        self.stratum = None
        self.consistency = None
        self.beta = None
        self.cover = None
        self.dimension = None

    def set_par(self, u, model, config, threads=1, seed=0):
        """Establish parameter values"""
        self.u = u
        self.model = model
        self.analysis = config["analysis"]
        self.strata = config["strata"]
        self.threads = threads
        self.seed = seed
        self.density = energy_density(u, model).density
        self.oracle = ThetaBarOracle(u, model, self.density)

    def calibrate(self):
        """Fix A from the energy of the map, leaving out core_cells cells about the center."""
        if self.model.A_constant is not None:
            return self.model.A_constant
        domain = self.u.domain
        exclude = None
        if self.analysis["core_cells"] > 0:
            exclude = [(domain.center, self.analysis["core_cells"] * domain.spacing)]
        energy = total_energy(self.u, self.model, exclude)
        return calibrate_A(self.model, energy)

    def analysis_centers(self):
        """Configured centers, or the domain center and a Fibonacci shell about it."""
        domain = self.u.domain
        r_max = self.analysis["r_max"]
        if self.analysis["centers"] is not None:
            centers = np.array(self.analysis["centers"], dtype=float)
        else:
            shell = fibonacci_sphere(max(self.analysis["n_centers"] - 1, 1), domain.n_dim)
            centers = np.vstack([domain.center, domain.center + self.analysis["center_radius"] * shell])
            centers = centers[: self.analysis["n_centers"]]
        fits = np.array([domain.contains_ball(c, r_max) for c in centers])
        if not np.all(fits):
            logging.warning("Dropping %i centers whose ball of radius %s leaves the domain",
                            int(np.sum(~fits)), r_max)
        return centers[fits]

    def analysis_radii(self):
        return np.geomspace(self.analysis["r_min"], self.analysis["r_max"], self.analysis["n_radii"])

    def strata_radii(self):
        """Configured defect radii, or r0, 2 r0, ... up to r_max."""
        if self.strata["defect_radii"] is not None:
            return np.array(self.strata["defect_radii"], dtype=float)
        r0 = self.strata["r0"]
        count = max(int(np.floor(np.log2(self.analysis["r_max"] / r0) + 1e-9)) + 1, MIN_SINGULAR_RADII)
        return r0 * 2.0 ** np.arange(count)

    def analyze(self):
        """Profiles and monotonicity statistics at the analysis centers"""
        self.calibrate()
        self.monotonicity = monotonicity_report(
            self.u,
            self.model,
            self.analysis_centers(),
            self.analysis_radii(),
            self.analysis["eps_mollifier"],
            self.analysis["flux_directions"],
            self.threads,
            self.seed,
        )
        return self.monotonicity

    def detect_singular(self):
        """Singular cells and their ridge"""
        self.calibrate()
        self.eps0 = self.strata["eps0"]
        if self.eps0 is None:
            self.eps0 = default_eps0(self.model)
        radii = [r for r in self.strata_radii() if r <= self.analysis["r_max"] * (1 + 1e-9)]
        self.singular = singular_detect(self.u, self.model, radii, self.eps0, self.density)
        self.cores = singular_cores(self.singular, self.u.domain.spacing)
        logging.info("Singular ridge has %i points at %s", len(self.cores), datetime.datetime.now())
        return self.cores

    def stratify(self):
        """Symmetry defects and strata at the ridge points and analysis centers"""
        if self.cores is None:
            self.detect_singular()
        points = np.vstack([self.cores, self.analysis_centers()])[: self.strata["max_points"]]
        singular = np.arange(len(points)) < len(self.cores)
        self.stratum = stratum_report(
            self.u,
            points,
            self.strata_radii(),
            self.strata["eps_strat"],
            alpha=self.strata["alpha"],
            singular=singular,
            n_directions=self.strata["n_directions"],
            threads=self.threads,
            seed=self.seed,
        )
        self.consistency = regularity_consistency(self.stratum, self.strata["eps_strat"])
        return self.stratum

    def measure(self):
        """mu = omega_k r0^k on the singular ridge"""
        if self.cores is None:
            self.detect_singular()
        k = self.strata["k"]
        return discrete_measure(self.cores, np.full(len(self.cores), self.strata["r0"]), k, self.u.n_dim)

    def compute_beta(self):
        """Jones numbers, Reifenberg sums and L2-approximation ratios on the ridge"""
        mu = self.measure()
        k = self.strata["k"]
        r0 = self.strata["r0"]
        self.beta = []
        for x in self.cores:
            for r in self.strata_radii():
                if r < r0 * (1 - 1e-9):
                    continue
                reifenberg = reifenberg_integral(
                    mu, x, r, k, r0, BETA_REFINE, self.strata["reifenberg_delta"]
                )
                l2_check = l2_approx_check(
                    self.u, mu, x, r, k, self.strata, self.oracle,
                    self.strata["n_directions"],
                )
                self.beta.append(self.beta_row(
                    x.tolist(), float(r), k, jones_beta(mu, x, r, k), reifenberg.value,
                    reifenberg.ratio, reifenberg.below, l2_check.lhs, l2_check.rhs,
                    l2_check.applicable, l2_check.ratio,
                ))
        return self.beta

    def compute_cover(self, minkowski_radii=None):
        """Covering refinement of the ridge and its Minkowski content"""
        if self.cores is None:
            self.detect_singular()
        domain = self.u.domain
        if minkowski_radii is None:
            minkowski_radii = self.strata_radii()
        root_radius = min(1.0, domain.distance_to_boundary(domain.center))
        self.cover = covering_refine(
            self.cores,
            self.oracle,
            self.strata["k"],
            self.strata["rho"],
            self.strata["r0"],
            self.strata["delta_pinch"],
            root_center=domain.center,
            root_radius=root_radius,
            domain=domain,
            minkowski_radii=minkowski_radii,
        )
        self.dimension = minkowski_dimension(self.cover.minkowski, domain.n_dim)
        return self.cover

    def call(self, stages):
        """Run the requested analysis stages"""
        if self.u is None:
            raise StateError("MapAnalyzer needs set_par before call.")
        if "analyze" in stages:
            logging.info("Analyzing densities at %s", datetime.datetime.now())
            self.analyze()
        if "stratify" in stages:
            logging.info("Stratifying at %s", datetime.datetime.now())
            self.stratify()
        if "beta" in stages:
            logging.info("Computing Jones numbers at %s", datetime.datetime.now())
            self.compute_beta()
        if "cover" in stages:
            logging.info("Covering the singular set at %s", datetime.datetime.now())
            self.compute_cover()
        return self.analysis_call(
            self.model.A_constant,
            self.monotonicity,
            self.eps0,
            self.singular,
            self.cores,
            self.stratum,
            self.consistency,
            self.beta,
            self.cover,
            self.dimension,
        )
