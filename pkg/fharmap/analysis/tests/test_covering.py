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



import pytest
import numpy as np

from .. import covering
from ..covering import (
    covering_refine,
    l2_approx_check,
    max_stages,
    minkowski_content,
    minkowski_dimension,
)
from ..jones import Plane, measure_cloud
from ..monotone import ThetaBarOracle
from ..symmetry import default_eps0, singular_cores, singular_detect
from ...functional.fields import ball_domain, make_map
from ...functional.integrand import IntegrandModel

THRESHOLDS = {"delta_pinch": 0.05, "eps_strat": 0.01}


def dirichlet():
    model = IntegrandModel(kind="dirichlet", n_dim=3, q_dim=3, ellipticity_B=5.5)
    model.A_constant = 1.0
    return model


def no_drop(y, r):
    return 1.0


def segment(length=1.0, count=401):
    t = np.linspace(-length / 2, length / 2, count)
    return np.stack([t, np.zeros(count), np.zeros(count)], axis=1)


def covered(points, balls):
    return all(
        any(np.linalg.norm(y - ball.center) <= ball.radius * (1 + 1e-9) for ball in balls)
        for y in points
    )


class TestCovering(object):
    def test_max_stages(self):
        assert max_stages(0.01, 0.5) == 9

    def test_single_point(self):
        counts = []
        for r0 in [0.1, 0.05, 0.025]:
            report = covering_refine([[0.0, 0.0, 0.0]], no_drop, 0, 0.5, r0, 0.1)
            counts.append(len(report.balls))
            assert report.sum_rk == pytest.approx(1.0)
            assert report.balls[0].label == "r0-ball"
        assert counts == [1, 1, 1]

    def test_energy_drop(self):
        report = covering_refine([[0.0, 0.0, 0.0]], lambda y, r: r, 0, 0.5, 0.01, 0.1, E=1.0)
        assert len(report.balls) == 1
        assert report.balls[0].label == "drop-ball"
        assert report.balls[0].kind == "root"
        assert report.E == 1.0

    def test_empty(self):
        report = covering_refine(np.zeros((0, 3)), no_drop, 1, 0.5, 0.05, 0.1)
        assert report.balls == []
        assert report.sum_rk == 0.0

    def test_outside_root(self):
        report = covering_refine([[2.0, 0.0, 0.0]], no_drop, 0, 0.5, 0.05, 0.1)
        assert report.balls == []

    def test_segment(self):
        points = segment()
        sums = []
        for r0 in [0.04, 0.02, 0.01]:
            report = covering_refine(points, no_drop, 1, 0.5, r0, 0.1)
            sums.append(report.sum_rk)
            assert report.sum_rk <= 3.0
            assert covered(points, report.balls)
            assert {ball.kind for ball in report.balls} <= {"root", "plane"}
        assert max(sums) / min(sums) < 1.5

    def test_square_spans_plane(self):
        grid = np.linspace(-0.4, 0.4, 21)
        points = np.array([[a, b, 0.0] for a in grid for b in grid])
        report = covering_refine(points, no_drop, 1, 0.5, 0.1, 0.1)
        assert covered(points, report.balls)
        assert "full" in {ball.kind for ball in report.balls}

    def test_drop_branch(self):
        points = np.array([[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]])
        report = covering_refine(points, lambda y, r: 10.0 if y[0] < 0 else 5.0, 0, 0.5, 0.05, 0.5)
        assert covered(points, report.balls)
        drops = [ball for ball in report.balls if ball.label == "drop-ball"]
        assert len(drops) == 1
        assert np.allclose(drops[0].center, points[1])
        assert drops[0].radius == pytest.approx(0.25)
        rest = [ball for ball in report.balls if ball.label != "drop-ball"]
        assert [ball.label for ball in rest] == ["r0-ball"]
        assert rest[0].radius == pytest.approx(0.05)
        assert [level[1] for level in report.levels] == [10.0] * report.stages

    def test_dimension_decides_branch(self):
        points = segment()
        line = covering_refine(points, no_drop, 1, 0.5, 0.05, 0.1)
        net = covering_refine(points, no_drop, 0, 0.5, 0.05, 0.1)
        assert {ball.kind for ball in line.balls} == {"plane"}
        assert {ball.kind for ball in net.balls} == {"full"}
        assert covered(points, line.balls) and covered(points, net.balls)
        # plane centers sit on the segment's line, net centers on the points
        for ball in line.balls:
            assert np.linalg.norm(ball.center[1:]) < 1e-12
        for ball in net.balls:
            assert np.min(np.linalg.norm(points - ball.center, axis=1)) < 1e-12

    def test_span_verdict_changes_cover(self, monkeypatch):
        grid = np.linspace(-0.4, 0.4, 21)
        points = np.array([[a, b, 0.0] for a in grid for b in grid])
        axis = Plane(np.zeros(3), np.array([[1.0, 0.0, 0.0]]))
        covers = {}
        for spans in [True, False]:
            monkeypatch.setattr(covering, "greedy_span", lambda pts, rho, k, spans=spans: (spans, axis))
            report = covering_refine(points, no_drop, 1, 0.5, 0.05, 0.1)
            assert covered(points, report.balls)
            covers[spans] = {tuple(np.round(ball.center, 9)) for ball in report.balls}
        assert covers[True] != covers[False]


class TestPresetCover(object):
    def test_hedgehog(self):
        u = make_map(ball_domain(3, 32), "hedgehog")
        model = dirichlet()
        cores = singular_cores(singular_detect(u, model, [0.25, 0.5], default_eps0(model)), u.domain.spacing)
        oracle = ThetaBarOracle(u, model)
        for r0 in [0.1, 0.05]:
            report = covering_refine(cores, oracle, 0, 0.25, r0, 0.5)
            assert [ball.label for ball in report.balls] == ["r0-ball"]
            assert report.balls[0].radius == pytest.approx(r0)
            assert report.sum_rk == 1.0

    def test_cylinder(self):
        u = make_map(ball_domain(3, 32), "cylinder")
        model = dirichlet()
        cores = singular_cores(singular_detect(u, model, [0.25, 0.5], default_eps0(model)), u.domain.spacing)
        oracle = ThetaBarOracle(u, model)
        sums = []
        for r0 in [0.1, 0.05]:
            report = covering_refine(cores, oracle, 1, 0.25, r0, 0.5)
            assert covered(cores, report.balls)
            assert len(report.balls) > 1
            assert {ball.label for ball in report.balls} == {"r0-ball"}
            assert {ball.kind for ball in report.balls} == {"plane"}
            for ball in report.balls:
                assert ball.radius == pytest.approx(r0)
                assert np.linalg.norm(ball.center[:2]) < 1e-6
            sums.append(report.sum_rk)
        assert sums[1] <= 2 * sums[0]


class TestMinkowski(object):
    def test_point(self):
        domain = ball_domain(3, 64)
        radii = np.linspace(8 * domain.spacing, 0.4, 5)
        table = minkowski_content([[0.0, 0.0, 0.0]], radii, domain, 0)
        assert np.allclose(table.volumes, 4 * np.pi / 3 * radii ** 3, rtol=5e-2)
        assert np.allclose(table.normalized, 4 * np.pi / 3, rtol=5e-2)
        assert np.all(np.diff(table.volumes) >= 0)
        assert abs(minkowski_dimension(table, 3)) < 0.15

    def test_tube(self):
        domain = ball_domain(3, 64)
        points = segment(count=513)[:, [1, 2, 0]]
        radii = np.linspace(6 * domain.spacing, 0.25, 3)
        table = minkowski_content(points, radii, domain, 1)
        expected = np.pi * radii ** 2 + 4 * np.pi / 3 * radii ** 3
        assert np.allclose(table.volumes, expected, rtol=5e-2)
        assert 0.6 < minkowski_dimension(table, 3) < 1.1

    def test_empty(self):
        domain = ball_domain(3, 16)
        table = minkowski_content(np.zeros((0, 3)), [0.25, 0.5], domain, 1)
        assert np.all(table.volumes == 0)
        assert np.isnan(minkowski_dimension(table, 3))


class TestL2Approx(object):
    def test_flat_measure(self):
        u = make_map(ball_domain(3, 16), "constant")
        mu = measure_cloud(segment(0.2, 21))
        result = l2_approx_check(u, mu, np.zeros(3), 0.1, 1, THRESHOLDS,
                                 lambda y, r: r, n_directions=16)
        assert result.lhs < 1e-20
        assert result.rhs == pytest.approx(21 * 0.7 / 0.1)
        assert result.ratio < 1e-20
        assert not result.applicable
        assert result.defect_zero < 1e-20

    def test_no_drop(self):
        u = make_map(ball_domain(3, 16), "constant")
        mu = measure_cloud([[0.05, 0.0, 0.0], [0.0, 0.05, 0.0], [-0.05, 0.0, 0.0]])
        result = l2_approx_check(u, mu, np.zeros(3), 0.1, 1, THRESHOLDS, no_drop,
                                 n_directions=16)
        assert result.lhs > 0
        assert result.rhs == 0
        assert result.ratio == float("inf")

    def test_ball_too_large(self):
        u = make_map(ball_domain(3, 16), "constant")
        mu = measure_cloud(segment(0.2, 5))
        result = l2_approx_check(u, mu, np.zeros(3), 0.2, 1, THRESHOLDS, no_drop)
        assert not result.applicable
        assert np.isnan(result.defect_zero)
