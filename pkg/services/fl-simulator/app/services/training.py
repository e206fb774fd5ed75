"""
Local training on the devices and the global objective.
"""

from typing import Callable, Optional, Sequence

import numpy as np

from app.core.logging_config import get_logger
from app.models.learners import LearnerModel
from app.models.schemas import Dataset, Partition, SgdSchedule

logger = get_logger(__name__)

StepHook = Callable[[int, np.ndarray], None]


def sample_batch(num_local: int, batch_size: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    """
    Positions into a shard for one SGD step, drawn uniformly with replacement.

    Returns None for a full-shard step (batch_size 0 or at least the shard size).
    """
    if batch_size == 0 or batch_size >= num_local:
        return None
    return rng.integers(0, num_local, size=batch_size)


def local_sgd(
    theta_start: np.ndarray,
    model: LearnerModel,
    data: Dataset,
    indices: Sequence[int],
    sched: SgdSchedule,
    t: int,
    rng: np.random.Generator,
    on_step: Optional[StepHook] = None,
) -> np.ndarray:
    """
    Run tau SGD steps from theta_start on one device's shard.

    The iterate after i steps is theta_start - eta(t) * (sum of the first i
    gradients), so the returned update is exactly -eta(t) times the summed
    stochastic gradients.

    Args:
        theta_start: The device's downlink estimate
        model: Learner
        data: Full training set
        indices: The device's shard
        sched: tau, batch size and eta schedule
        t: Global round, selects eta(t)
        rng: The device's SGD stream for this round
        on_step: Called as on_step(i, grad) after each gradient

    Returns:
        Delta theta_m
    """
    if len(indices) == 0:
        raise ValueError("local_sgd needs a non-empty shard")
    shard = data.subset(np.asarray(indices, dtype=np.int64))
    eta = sched.eta(t)

    theta = np.array(theta_start, dtype=float, copy=True)
    grad_sum = np.zeros_like(theta)
    for i in range(sched.tau):
        batch = sample_batch(len(shard), sched.batch_size, rng)
        if batch is None:
            x, y = shard.features, shard.labels
        else:
            x, y = shard.features[batch], shard.labels[batch]
        g = model.grad(theta, x, y)
        if on_step is not None:
            on_step(i, g)
        grad_sum += g
        theta = theta_start - eta * grad_sum
    return -eta * grad_sum


def global_loss(model: LearnerModel, theta: np.ndarray, data: Dataset, partition: Partition) -> float:
    """F(theta) = sum_m (B_m / B) F_m(theta)."""
    weights = partition.weights()
    total = 0.0
    for w, shard in zip(weights, partition.shards):
        if shard:
            sub = data.subset(np.asarray(shard, dtype=np.int64))
            total += w * model.loss(theta, sub.features, sub.labels)
    return float(total)


def evaluate(model: LearnerModel, theta: np.ndarray, test: Dataset) -> float:
    """Held-out metric: accuracy for classifiers, objective value for regression."""
    return model.evaluate(theta, test)


def centralized_gd(
    model: LearnerModel, theta0: np.ndarray, data: Dataset, sched: SgdSchedule, rounds: int
) -> np.ndarray:
    """
    Full-batch gradient descent on the pooled data, one step per round.

    Returns:
        (rounds + 1, d) array of iterates starting at theta0
    """
    path = [np.array(theta0, dtype=float, copy=True)]
    for t in range(rounds):
        theta = path[-1]
        path.append(theta - sched.eta(t) * model.grad(theta, data.features, data.labels))
    return np.stack(path)
