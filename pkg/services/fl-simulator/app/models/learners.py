"""
Differentiable learners trained by the devices.

A learner works on a flat parameter vector so the same vector can be
compressed, broadcast and aggregated without reshaping.
"""

from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from app.core.logging_config import get_logger
from app.models.schemas import Dataset, ModelKind

logger = get_logger(__name__)


class LearnerModel(ABC):
    """Loss and gradient of f(theta, u) averaged over a batch."""

    name: str = "learner"
    num_features: int = 0

    @property
    @abstractmethod
    def dimension(self) -> int:
        """Length d of the parameter vector."""

    @abstractmethod
    def loss(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
        """Mean loss over the batch."""

    @abstractmethod
    def grad(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Gradient of loss() with respect to theta."""

    @abstractmethod
    def evaluate(self, theta: np.ndarray, data: Dataset) -> float:
        """Held-out metric reported in the trace."""

    def init_params(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def _check(self, theta: np.ndarray, features: np.ndarray) -> None:
        if theta.shape != (self.dimension,):
            raise ValueError(f"{self.name}: theta has shape {theta.shape}, expected ({self.dimension},)")
        if features.ndim != 2 or features.shape[1] != self.num_features:
            raise ValueError(
                f"{self.name}: features have shape {features.shape}, expected (*, {self.num_features})"
            )


class LeastSquares(LearnerModel):
    """
    f(theta, (a, b)) = (a.theta - b)^2 / 2 + l2 ||theta||^2 / 2

    Strongly convex whenever the sample covariance is full rank or l2 > 0;
    curvature() gives the exact (mu, L) for a dataset.
    """

    name = "least_squares"

    def __init__(self, num_features: int, l2: float = 0.0):
        if num_features < 1:
            raise ValueError(f"num_features must be >= 1, got {num_features}")
        self.num_features = num_features
        self.l2 = l2

    @property
    def dimension(self) -> int:
        return self.num_features

    def loss(self, theta, features, labels):
        self._check(theta, features)
        residual = features @ theta - labels
        return float(0.5 * np.mean(residual ** 2) + 0.5 * self.l2 * theta @ theta)

    def grad(self, theta, features, labels):
        self._check(theta, features)
        residual = features @ theta - labels
        return features.T @ residual / len(labels) + self.l2 * theta

    def evaluate(self, theta, data):
        return self.loss(theta, data.features, data.labels)

    def curvature(self, features: np.ndarray) -> Tuple[float, float]:
        """(mu, L): extreme eigenvalues of the Hessian X^T X / n + l2 I."""
        eigs = np.linalg.eigvalsh(features.T @ features / len(features))
        return float(eigs[0] + self.l2), float(eigs[-1] + self.l2)

    def solve(self, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Exact minimizer over the given samples."""
        n = len(labels)
        hessian = features.T @ features / n + self.l2 * np.eye(self.num_features)
        return np.linalg.solve(hessian, features.T @ labels / n)


class SoftmaxRegression(LearnerModel):
    """
    Multinomial logistic regression with a bias per class.

    theta stacks the (features x classes) weight matrix row-major, then the
    class biases.
    """

    name = "softmax"

    def __init__(self, num_features: int, num_classes: int, l2: float = 0.0):
        if num_features < 1 or num_classes < 2:
            raise ValueError(f"need num_features >= 1 and num_classes >= 2, got {num_features}, {num_classes}")
        self.num_features = num_features
        self.num_classes = num_classes
        self.l2 = l2

    @property
    def dimension(self) -> int:
        return (self.num_features + 1) * self.num_classes

    def _unpack(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        split = self.num_features * self.num_classes
        return theta[:split].reshape(self.num_features, self.num_classes), theta[split:]

    def logits(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        weights, bias = self._unpack(theta)
        return features @ weights + bias

    def loss(self, theta, features, labels):
        self._check(theta, features)
        z = self.logits(theta, features)
        picked = z[np.arange(len(labels)), labels.astype(np.int64)]
        weights, _ = self._unpack(theta)
        return float(np.mean(logsumexp(z, axis=1) - picked) + 0.5 * self.l2 * np.sum(weights ** 2))

    def grad(self, theta, features, labels):
        self._check(theta, features)
        probs = softmax(self.logits(theta, features), axis=1)
        probs[np.arange(len(labels)), labels.astype(np.int64)] -= 1.0
        probs /= len(labels)
        weights, _ = self._unpack(theta)
        grad_w = features.T @ probs + self.l2 * weights
        return np.concatenate([grad_w.ravel(), probs.sum(axis=0)])

    def evaluate(self, theta, data):
        """Top-1 accuracy."""
        predictions = np.argmax(self.logits(theta, data.features), axis=1)
        return float(np.mean(predictions == data.labels.astype(np.int64)))


def build_model(kind: ModelKind, num_features: int, num_classes: int = 0, l2: float = 0.0) -> LearnerModel:
    """Construct a built-in learner for a dataset shape."""
    if kind == ModelKind.LEAST_SQUARES:
        return LeastSquares(num_features, l2)
    if kind == ModelKind.SOFTMAX:
        return SoftmaxRegression(num_features, num_classes, l2)
    raise ValueError(f"Unsupported model: {kind}")
