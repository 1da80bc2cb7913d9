import math

import numpy as np
import pytest

from congestion_flow.approximators import DegreeApproximator
from congestion_flow.exceptions import DimensionMismatchError
from congestion_flow.graph import Graph
from congestion_flow.smoothing import (
    grad_lmax,
    gradient_and_potentials,
    lmax,
    lmax_and_grad,
    potential,
    potential_gradient,
)


@pytest.fixture
def square() -> Graph:
    return Graph.from_edges(
        4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 3.0), (0, 2, 1.5)]
    )


class TestLmax:
    def test_zero(self):
        # Two copies of each of the d coordinates, all exp(0) = 1
        assert lmax(np.zeros(4)) == pytest.approx(math.log(8))
        assert grad_lmax(np.zeros(4)).tolist() == [0.0, 0.0, 0.0, 0.0]

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bounds(self, seed):
        x = np.random.default_rng(seed).normal(scale=5.0, size=7)
        norm = float(np.max(np.abs(x)))
        assert norm <= lmax(x) <= norm + math.log(14) + 1e-12

    def test_overflow_safe(self):
        x = np.array([1000.0, -2000.0, 3.0])
        value, grad = lmax_and_grad(x)
        assert value == pytest.approx(2000.0)
        assert np.all(np.isfinite(grad))
        assert grad[1] == pytest.approx(-1.0)

    def test_gradient_l1_norm(self):
        x = np.random.default_rng(4).normal(size=10)
        assert np.abs(grad_lmax(x)).sum() <= 1.0 + 1e-12

    def test_gradient_matches_finite_differences(self):
        x = np.random.default_rng(5).normal(size=5)
        grad = grad_lmax(x)
        h = 1e-6
        for i in range(x.size):
            step = np.zeros_like(x)
            step[i] = h
            numeric = (lmax(x + step) - lmax(x - step)) / (2 * h)
            assert grad[i] == pytest.approx(numeric, abs=1e-6)

    @pytest.mark.parametrize("scale", [1e-3, 0.5, 20.0])
    @pytest.mark.parametrize("seed", range(4))
    def test_gradient_lipschitz(self, seed, scale):
        rng = np.random.default_rng(seed)
        x = rng.normal(scale=3.0, size=12)
        y = x + rng.normal(scale=scale, size=12)
        change = np.abs(grad_lmax(x) - grad_lmax(y)).sum()
        assert change <= np.max(np.abs(x - y)) + 1e-12

    @pytest.mark.parametrize("seed", range(4))
    def test_gradient_against_point(self, seed):
        x = np.random.default_rng(seed).normal(scale=4.0, size=9)
        # Convexity at the origin, where lmax is log(2d)
        assert grad_lmax(x) @ x >= lmax(x) - math.log(18) - 1e-12

    def test_empty(self):
        with pytest.raises(DimensionMismatchError):
            lmax(np.zeros(0))

    def test_not_finite(self):
        with pytest.raises(ValueError):
            lmax(np.array([1.0, np.inf]))


class TestPotential:
    def test_zero_flow(self, square: Graph):
        R = DegreeApproximator(square, alpha=2.0)
        b = np.array([-1.0, 0.0, 1.0, 0.0])
        parts = potential(square, R, 2.0, b, np.zeros(square.m))
        np.testing.assert_array_equal(parts.residual, b)
        np.testing.assert_allclose(parts.x2, 4.0 * b / square.degrees)
        assert parts.phi == pytest.approx(
            math.log(2 * square.m) + lmax(4.0 * b / square.degrees)
        )

    def test_scale(self, square: Graph):
        R = DegreeApproximator(square, alpha=1.5)
        b = np.array([-1.0, 0.5, 0.0, 0.5])
        f = np.array([0.2, -0.1, 0.3, 0.0, 0.4])
        parts = potential(square, R, 1.5, b, f, scale=3.0)
        np.testing.assert_allclose(parts.x1, 3.0 * f / square.capacities)
        assert parts.objective == pytest.approx(
            np.max(np.abs(parts.x1)) + np.max(np.abs(parts.x2))
        )

    def test_gradient_matches_finite_differences(self, square: Graph):
        alpha, scale = 1.5, 2.0
        R = DegreeApproximator(square, alpha=alpha)
        b = np.array([-1.0, 0.5, 0.0, 0.5])
        f = np.array([0.2, -0.1, 0.3, 0.0, 0.4])
        parts = potential(square, R, alpha, b, f, scale)
        grad = potential_gradient(parts, square, R, alpha)
        # The gradient is taken with respect to the scaled flow scale·f
        h = 1e-6
        for e in range(square.m):
            step = np.zeros(square.m)
            step[e] = h / scale
            up = potential(square, R, alpha, b, f + step, scale).phi
            down = potential(square, R, alpha, b, f - step, scale).phi
            assert grad[e] == pytest.approx((up - down) / (2 * h), abs=1e-5)

    def test_potentials(self, square: Graph):
        R = DegreeApproximator(square, alpha=1.0)
        b = np.array([-1.0, 0.0, 1.0, 0.0])
        parts = potential(square, R, 1.0, b, np.zeros(square.m))
        _, v = gradient_and_potentials(parts, square, R, 1.0)
        np.testing.assert_allclose(v, parts.p2 / square.degrees)
