"""Tests for the built-in learners."""

import math

import numpy as np
import pytest

from app.models.learners import LeastSquares, SoftmaxRegression, build_model
from app.models.schemas import Dataset, ModelKind


def directional_fd(model, theta, x, y, v, h=1e-6) -> float:
    return (model.loss(theta + h * v, x, y) - model.loss(theta - h * v, x, y)) / (2 * h)


def check_gradient(model, x, y, rng, points=100):
    for _ in range(points):
        theta = rng.standard_normal(model.dimension)
        v = rng.standard_normal(model.dimension)
        v /= np.linalg.norm(v)
        analytic = float(model.grad(theta, x, y) @ v)
        numeric = directional_fd(model, theta, x, y, v)
        assert abs(analytic - numeric) <= 1e-5 * max(1.0, abs(analytic))


class TestLeastSquares:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((30, 6))
        y = rng.standard_normal(30)
        check_gradient(LeastSquares(6, l2=0.1), x, y, rng)

    def test_zero_gradient_at_solution(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((50, 4))
        y = x @ rng.standard_normal(4) + 0.1 * rng.standard_normal(50)
        model = LeastSquares(4, l2=0.05)
        theta = model.solve(x, y)
        np.testing.assert_allclose(model.grad(theta, x, y), np.zeros(4), atol=1e-12)

    def test_curvature_bounds(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((200, 5))
        mu, L = LeastSquares(5, l2=0.3).curvature(x)
        assert 0.3 < mu <= L
        eigs = np.linalg.eigvalsh(x.T @ x / 200)
        assert mu == pytest.approx(eigs[0] + 0.3)
        assert L == pytest.approx(eigs[-1] + 0.3)

    def test_evaluate_is_objective(self):
        data = Dataset(features=np.eye(2), labels=np.array([1.0, 1.0]))
        model = LeastSquares(2)
        assert model.evaluate(np.zeros(2), data) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        model = LeastSquares(3)
        with pytest.raises(ValueError):
            model.loss(np.zeros(4), np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValueError):
            model.grad(np.zeros(3), np.ones((2, 4)), np.ones(2))


class TestSoftmax:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((25, 4))
        y = rng.integers(0, 3, 25)
        check_gradient(SoftmaxRegression(4, 3, l2=0.01), x, y, rng)

    def test_uniform_logits_loss(self):
        model = SoftmaxRegression(5, 10)
        x = np.random.default_rng(4).standard_normal((8, 5))
        y = np.arange(8) % 10
        assert model.loss(np.zeros(model.dimension), x, y) == pytest.approx(math.log(10), rel=1e-12)

    def test_dimension(self):
        assert SoftmaxRegression(784, 10).dimension == 7850

    def test_accuracy(self):
        model = SoftmaxRegression(2, 2)
        # Class score = feature value: predicts the larger feature
        theta = np.concatenate([np.eye(2).ravel(), np.zeros(2)])
        data = Dataset(
            features=np.array([[2.0, 0.0], [0.0, 3.0], [1.0, 0.0], [5.0, 1.0]]),
            labels=np.array([0, 1, 1, 0]),
            num_classes=2,
        )
        assert model.evaluate(theta, data) == pytest.approx(0.75)

    def test_invalid_shape(self):
        with pytest.raises(ValueError):
            SoftmaxRegression(3, 1)


class TestBuildModel:
    def test_builds_each_kind(self):
        assert isinstance(build_model(ModelKind.LEAST_SQUARES, 4), LeastSquares)
        model = build_model(ModelKind.SOFTMAX, 4, 3)
        assert isinstance(model, SoftmaxRegression)
        assert model.dimension == 15

    def test_init_params_are_zero(self):
        np.testing.assert_array_equal(build_model(ModelKind.LEAST_SQUARES, 3).init_params(), np.zeros(3))
