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
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from ..jones import (
    discrete_measure,
    distance_to_plane,
    effective_span,
    greedy_span,
    jones_beta,
    log_scales,
    measure_cloud,
    reifenberg_integral,
)
from ...functional.errors import DomainError


def random_cloud(seed, count=20, n_dim=3):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(count, n_dim))
    points *= 0.9 * rng.uniform(size=(count, 1)) ** (1.0 / n_dim) / np.linalg.norm(points, axis=1, keepdims=True)
    return measure_cloud(points, rng.uniform(0.1, 1.0, size=count))


def brute_force_beta(mu, r, k, starts=6, seed=0):
    """Nelder-Mead over affine k-planes (point and k spanning vectors)."""
    n_dim = mu.points.shape[1]
    rng = np.random.default_rng(seed)

    def objective(params):
        point = params[:n_dim]
        if k == 0:
            distance_sq = np.sum((mu.points - point) ** 2, axis=1)
        else:
            basis = np.linalg.qr(params[n_dim:].reshape(n_dim, k))[0]
            offset = mu.points - point
            distance_sq = np.sum(offset ** 2, axis=1) - np.sum((offset @ basis) ** 2, axis=1)
        return np.sum(mu.weights * distance_sq) * r ** (-2.0 - k)

    best = np.inf
    for _ in range(starts):
        start = np.concatenate([rng.normal(scale=0.3, size=n_dim), rng.normal(size=n_dim * k)])
        for _ in range(2):
            fit = minimize(objective, start, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 40000, "maxfev": 40000})
            start = fit.x
        best = min(best, fit.fun)
    return np.sqrt(max(best, 0.0))


class TestJonesBeta(object):
    def test_plane_supported(self):
        rng = np.random.default_rng(3)
        rotation = Rotation.random(random_state=5).as_matrix()
        for k in [1, 2]:
            local = np.zeros((20, 3))
            local[:, :k] = rng.uniform(-0.5, 0.5, size=(20, k))
            points = local @ rotation.T + np.array([0.1, -0.2, 0.05])
            mu = measure_cloud(points, rng.uniform(0.1, 1, size=20))
            assert jones_beta(mu, [0.0, 0.0, 0.0], 1.0, k) <= 1e-12

    def test_two_masses(self):
        r = 0.8
        mu = measure_cloud([[r / 2, 0, 0], [-r / 2, 0, 0]])
        assert jones_beta(mu, [0.0, 0.0, 0.0], r, 0) == pytest.approx(np.sqrt(0.5), rel=1e-12)

    def test_empty_ball(self):
        mu = measure_cloud([[5.0, 0.0, 0.0]])
        assert jones_beta(mu, [0.0, 0.0, 0.0], 1.0, 1) == 0
        assert jones_beta(measure_cloud([]), [0.0, 0.0, 0.0], 1.0, 1) == 0

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_brute_force(self, k):
        for seed in range(3):
            mu = random_cloud(seed)
            value = jones_beta(mu, [0.0, 0.0, 0.0], 1.0, k)
            oracle = brute_force_beta(mu, 1.0, k, seed=seed)
            assert value <= oracle + 1e-10
            assert value == pytest.approx(oracle, abs=1e-4)

    def test_errors(self):
        mu = random_cloud(0)
        with pytest.raises(DomainError):
            jones_beta(mu, [0.0, 0.0, 0.0], 1.0, 3)
        with pytest.raises(DomainError):
            measure_cloud([[0.0, 0.0, 0.0]], [-1.0])

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 10 ** 6),
        k=st.integers(0, 2),
        shift=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    )
    def test_rigid_motion_invariance(self, seed, k, shift):
        mu = random_cloud(seed)
        rotation = Rotation.random(random_state=seed).as_matrix()
        moved = measure_cloud(mu.points @ rotation.T + np.array(shift), mu.weights)
        original = jones_beta(mu, [0.0, 0.0, 0.0], 1.0, k)
        value = jones_beta(moved, np.array(shift), 1.0, k)
        assert value == pytest.approx(original, abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10 ** 6), k=st.integers(0, 2), lam=st.floats(0.1, 10))
    def test_scaling_invariance(self, seed, k, lam):
        mu = random_cloud(seed)
        scaled = measure_cloud(lam * mu.points, lam ** k * mu.weights)
        original = jones_beta(mu, [0.0, 0.0, 0.0], 1.0, k)
        assert jones_beta(scaled, [0.0, 0.0, 0.0], lam, k) == pytest.approx(original, rel=1e-8, abs=1e-12)


class TestEffectiveSpan(object):
    def test_spread_points(self):
        points = np.array([[0.0, 0, 0], [3, 0, 0], [0, 4, 0], [1, 1, 0]])
        spans, plane = effective_span(points, 0.5, 2)
        assert spans
        assert np.allclose(plane.basis @ plane.basis.T, np.eye(2))
        assert np.max(distance_to_plane(points, plane)) < 1e-12

    def test_tube(self):
        rng = np.random.default_rng(1)
        points = np.zeros((30, 3))
        points[:, 0] = rng.uniform(-5, 5, 30)
        points[:, 1:] = rng.uniform(-0.2, 0.2, (30, 2))
        assert not effective_span(points, 0.5, 2)[0]
        assert effective_span(points, 0.5, 1)[0]

    @pytest.mark.parametrize("offset,expected", [(1.9, False), (2.1, True)])
    def test_margin(self, offset, expected):
        points = np.array([[0.0, 0, 0], [10, 0, 0], [5, offset, 0]])
        assert effective_span(points, 1.0, 2)[0] is expected

    def test_single_point(self):
        spans, plane = effective_span([[1.0, 2.0, 3.0]], 0.1, 0)
        assert spans
        assert np.array_equal(plane.point, [1.0, 2.0, 3.0])
        assert not effective_span([[1.0, 2.0, 3.0]], 0.1, 1)[0]

    def test_failed_span_returns_plane(self):
        rng = np.random.default_rng(1)
        points = np.zeros((30, 3))
        points[:, 0] = rng.uniform(-5, 5, 30)
        points[:, 1:] = rng.uniform(-0.2, 0.2, (30, 2))
        spans, plane = greedy_span(points, 0.5, 2)
        assert not spans
        assert plane.basis.shape == (1, 3)
        assert np.max(distance_to_plane(points, plane)) < 1.0
        assert greedy_span(np.zeros((0, 3)), 0.5, 1) == (False, None)


class TestReifenberg(object):
    def test_discrete_measure(self):
        mu = discrete_measure([[0.0, 0, 0], [1, 0, 0]], [0.5, 0.25], 2)
        assert np.allclose(mu.weights, np.pi * np.array([0.25, 0.0625]))
        assert discrete_measure([[0.0, 0, 0]], [0.5], 0).weights[0] == 1

    def test_log_scales(self):
        scales, width = log_scales(1.0, 1.0 / 8)
        assert width == pytest.approx(np.log(2))
        assert np.allclose(scales, 2.0 ** -(np.arange(3) + 0.5))
        assert len(log_scales(1.0, 1.0 / 8, refine=4)[0]) == 12

    def test_line(self):
        points = np.zeros((50, 2))
        points[:, 0] = np.linspace(-1, 1, 50)
        mu = measure_cloud(points, np.full(50, 0.04))
        result = reifenberg_integral(mu, [0.0, 0.0], 0.5, 1, 0.05)
        assert result.value < 1e-20

    def test_single_atom(self):
        mu = measure_cloud([[0.0, 0.0, 0.0]])
        result = reifenberg_integral(mu, [0.0, 0.0, 0.0], 0.5, 0, 0.01, delta=0.1)
        assert result.value == 0
        assert result.below

    def test_arc_refinement(self):
        angles = np.linspace(-1, 1, 1001)
        points = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        mu = measure_cloud(points, np.full(len(angles), angles[1] - angles[0]))
        r = 0.2
        dyadic = reifenberg_integral(mu, [1.0, 0.0], r, 1, r / 64)
        fine = reifenberg_integral(mu, [1.0, 0.0], r, 1, r / 64, refine=16)
        assert fine.value > 0
        assert dyadic.value == pytest.approx(fine.value, rel=0.1)
        assert dyadic.ratio == pytest.approx(dyadic.value / r)
