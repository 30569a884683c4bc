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



from types import SimpleNamespace

import pytest
import numpy as np
from hypothesis import given, settings, strategies as st

from ..symmetry import (
    default_eps0,
    membership_decided,
    orbit_defect,
    regularity_consistency,
    regularity_scale,
    singular_cores,
    singular_detect,
    stratum_membership,
    stratum_membership_all_scales,
    stratum_report,
    symmetry_defect,
)
from ...functional.errors import DomainError, ResolutionError
from ...functional.fields import ball_domain, make_map
from ...functional.integrand import IntegrandModel
from ...functional.utilities import fibonacci_sphere

ORIGIN = np.zeros(3)


def dirichlet():
    model = IntegrandModel(kind="dirichlet", n_dim=3, q_dim=3, ellipticity_B=5.5)
    model.A_constant = 1.0
    return model


def lattice_violations(report, ks, epsilons, radii):
    """
    Count failures of S^k'_{eps',r'} subset S^k_{eps,r} for k' <= k,
    eps' >= eps, r' <= r, over the (k, r) where membership is decided.
    """
    violations = 0
    for row in report.defects:
        for k_small in ks:
            for k_large in [a for a in ks if a >= k_small]:
                for eps_large in epsilons:
                    for eps_small in [a for a in epsilons if a <= eps_large]:
                        for r_small in radii:
                            for r_large in [a for a in radii if a >= r_small]:
                                inner = stratum_membership(row, report.radii, k_small, eps_large, r_small)
                                if not membership_decided(row, report.radii, k_large, r_large):
                                    continue
                                outer = stratum_membership(row, report.radii, k_large, eps_small, r_large)
                                violations += int(inner and not outer)
    return violations


class TestSymmetryDefect(object):
    def test_hedgehog_is_homogeneous(self):
        u = make_map(ball_domain(3, 32), "hedgehog")
        zero = symmetry_defect(u, ORIGIN, 0.75, 0)
        one = symmetry_defect(u, ORIGIN, 0.75, 1, n_directions=64)
        assert zero.defect < 1e-3
        assert zero.defect <= zero.projected
        assert one.defect > 1e-2
        assert one.defect > 10 * zero.defect

    def test_hedgehog_axis_search(self):
        u = make_map(ball_domain(3, 32), "hedgehog")
        found = symmetry_defect(u, ORIGIN, 0.75, 1, n_directions=64)
        brute = min(
            orbit_defect(u, ORIGIN, 0.75, axis[None])[0]
            for axis in fibonacci_sphere(128, 3, hemisphere=True)
        )
        assert found.defect == pytest.approx(brute, rel=0.1)

    def test_cylinder(self):
        u = make_map(ball_domain(3, 32), "cylinder")
        one = symmetry_defect(u, ORIGIN, 0.75, 1, n_directions=64)
        two = symmetry_defect(u, ORIGIN, 0.75, 2, n_directions=64)
        assert one.defect < 1e-3
        assert abs(abs(one.plane[0, 2]) - 1) < 1e-2
        assert two.defect > 1e-2

    def test_constant_map(self):
        u = make_map(ball_domain(3, 16), "constant")
        for k in range(4):
            assert symmetry_defect(u, ORIGIN, 0.5, k, n_directions=16).defect < 1e-20

    def test_errors(self):
        u = make_map(ball_domain(3, 16), "hedgehog")
        with pytest.raises(ResolutionError):
            orbit_defect(u, ORIGIN, 0.1, np.zeros((0, 3)))
        with pytest.raises(DomainError):
            orbit_defect(u, [0.7, 0.0, 0.0], 0.5, np.zeros((0, 3)))
        with pytest.raises(DomainError):
            symmetry_defect(u, ORIGIN, 0.5, 4)


class TestStrata(object):
    def test_report_order(self):
        u = make_map(ball_domain(3, 32), "hedgehog")
        report = stratum_report(u, [ORIGIN, [0.3, 0.0, 0.0]], [0.25, 0.5], 0.01, n_directions=32)
        assert report.raw.shape == (2, 4, 2)
        assert np.all(np.diff(report.defects, axis=1) >= 0)
        assert np.all(report.defects >= report.raw)
        # at the center the plane search recovers the exact order
        assert np.all(np.diff(report.raw[0], axis=0) >= -1e-12)
        # no ball about the hedgehog center is (1, eps)-symmetric
        assert report.membership[0, 0, 0]
        assert stratum_membership_all_scales(report.defects[0], report.radii, 0, 0.01)
        assert lattice_violations(report, [0, 1, 2], [0.005, 0.01, 0.05], [0.25, 0.5]) == 0

    def test_constant_not_member(self):
        u = make_map(ball_domain(3, 16), "constant")
        report = stratum_report(u, [ORIGIN], [0.5], 0.01, alpha=0.5, n_directions=16)
        assert not np.any(report.membership)
        consistency = regularity_consistency(report, 0.01)
        assert consistency.applicable == 1
        assert consistency.holds == 1
        assert consistency.violations == []

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_containment(self, seed):
        rng = np.random.default_rng(seed)
        radii = np.sort(rng.uniform(0.1, 1.0, size=4))
        raw = rng.uniform(0, 0.2, size=(4, 4, len(radii)))
        # balls leaving the domain at the largest scales
        for row, first_outside in zip(raw, rng.integers(1, len(radii) + 1, size=4)):
            row[:, first_outside:] = np.nan
        rows = SimpleNamespace(defects=np.maximum.accumulate(raw, axis=1), radii=radii)
        epsilons = list(np.sort(rng.uniform(0, 0.2, size=3)))
        assert lattice_violations(rows, [0, 1, 2], epsilons, list(radii)) == 0

    def test_membership_rule(self):
        radii = np.array([0.1, 0.2, 0.4])
        row = np.zeros((4, 3))
        row[1] = [0.05, 0.2, 0.3]
        assert stratum_membership(row, radii, 0, 0.1, 0.2)
        assert not stratum_membership(row, radii, 0, 0.1, 0.1)
        # no sampled scale at or above r
        assert not membership_decided(row, radii, 0, 0.5)
        assert not stratum_membership(row, radii, 0, 0.1, 0.5)
        # balls of radius 0.4 leave the domain
        row[:, 2] = np.nan
        assert not membership_decided(row, radii, 0, 0.3)
        assert not stratum_membership(row, radii, 0, 0.1, 0.3)
        assert stratum_membership(row, radii, 0, 0.1, 0.2)
        assert not stratum_membership_all_scales(row, radii, 0, 0.1)
        row[1, 0] = 0.15
        assert stratum_membership_all_scales(row, radii, 0, 0.1)
        assert not stratum_membership_all_scales(np.full((4, 3), np.nan), radii, 0, 0.1)


class TestSingular(object):
    def test_default_eps0(self):
        assert default_eps0(dirichlet()) == pytest.approx(0.8 * np.pi, rel=1e-8)
        saturating = IntegrandModel(kind="saturating", beta=0.5, ellipticity_B=10)
        expected = 0.4 * np.pi * (4 - 2 * (np.sqrt(3) - np.sqrt(2)))
        assert default_eps0(saturating) == pytest.approx(expected, rel=1e-6)
        planar = IntegrandModel(kind="dirichlet", n_dim=2, q_dim=2, ellipticity_B=3)
        assert default_eps0(planar) == pytest.approx(0.2 * np.pi)

    def test_hedgehog(self):
        u = make_map(ball_domain(3, 32), "hedgehog")
        model = dirichlet()
        detected = singular_detect(u, model, [0.25, 0.5], default_eps0(model))
        distance = np.linalg.norm(detected.points, axis=1)
        assert len(detected.points) > 0
        assert np.max(distance) <= 0.5 + 1e-12
        assert np.min(distance) < u.domain.spacing
        cores = singular_cores(detected, u.domain.spacing)
        assert len(cores) == 1
        assert np.linalg.norm(cores[0]) < 1e-9

    def test_cylinder_ridge(self):
        u = make_map(ball_domain(3, 32), "cylinder")
        model = dirichlet()
        detected = singular_detect(u, model, [0.25, 0.5], default_eps0(model))
        cores = singular_cores(detected, u.domain.spacing)
        assert len(cores) > 1
        assert np.max(np.linalg.norm(cores[:, :2], axis=1)) < 1e-9
        assert np.ptp(cores[:, 2]) > 0.5

    def test_empty(self):
        model = dirichlet()
        constant = make_map(ball_domain(3, 16), "constant")
        assert len(singular_detect(constant, model, [0.5], 0.1).points) == 0
        hedgehog = make_map(ball_domain(3, 16), "hedgehog")
        detected = singular_detect(hedgehog, model, [0.5], 1e3)
        assert len(detected.points) == 0
        assert len(singular_cores(detected, 0.125)) == 0


class TestRegularityScale(object):
    def test_constant(self):
        u = make_map(ball_domain(3, 16), "constant")
        assert regularity_scale(u, ORIGIN, 0.5) == pytest.approx(1.0)

    def test_hedgehog_center(self):
        u = make_map(ball_domain(3, 32), "hedgehog")
        assert regularity_scale(u, ORIGIN, 0.5) == pytest.approx(u.domain.spacing)

    def test_hedgehog_smooth_point(self):
        u = make_map(ball_domain(3, 32), "hedgehog")
        value = regularity_scale(u, [0.5, 0.0, 0.0], 0.5)
        assert 0.1 < value <= 0.5

    def test_bad_exponent(self):
        u = make_map(ball_domain(3, 16), "constant")
        with pytest.raises(DomainError):
            regularity_scale(u, ORIGIN, 1.5)
