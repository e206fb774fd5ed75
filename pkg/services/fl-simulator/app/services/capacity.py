"""
Common-rate upper bound of the fading broadcast channel.

Each device's power variables appear only in its own rate term, so the
max-min problem splits into one water-filling problem per device followed by
a min over devices.
"""

from typing import List

import numpy as np

from app.core.config import settings
from app.core.logging_config import get_logger
from app.models.schemas import GainProfile, WaterfillResult

logger = get_logger(__name__)


def waterfill(gains: np.ndarray, power: float) -> WaterfillResult:
    """
    Water-filling over parallel unit-noise channels.

    Performs the exact sorted breakpoint scan: with the k strongest channels
    active the water level is nu_k = (P + sum 1/g_i) / k, and the largest k
    whose weakest active channel still gets positive power is optimal.

    Args:
        gains: Squared channel magnitudes |h_i|^2
        power: Total power to spend

    Returns:
        WaterfillResult with per-channel power (original order), rate in
        bits and the water level; empty allocation and rate 0 when every
        gain is zero
    """
    gains = np.asarray(gains, dtype=float)
    if power <= 0 or not np.isfinite(power):
        raise ValueError(f"power must be positive and finite, got {power}")
    if gains.ndim != 1 or gains.size == 0:
        raise ValueError("gains must be a non-empty 1-D vector")
    if np.any(gains < 0):
        raise ValueError("gains must be non-negative")
    if not np.any(gains > 0):
        return WaterfillResult(allocation=np.empty(0), rate=0.0, water_level=0.0)

    order = np.argsort(gains, kind="stable")[::-1]
    positive = gains[order] > 0
    inv = np.full(gains.size, np.inf)
    inv[positive] = 1.0 / gains[order][positive]

    # nu_k for k = 1..n_pos; the first breakpoint is always feasible
    n_pos = int(positive.sum())
    levels = (power + np.cumsum(inv[:n_pos])) / np.arange(1, n_pos + 1)
    feasible = levels > inv[:n_pos]
    k = int(np.nonzero(feasible)[0][-1]) + 1
    nu = float(levels[k - 1])

    allocation = np.zeros(gains.size)
    allocation[order[:k]] = nu - inv[:k]
    active = order[:k]
    _check_kkt(allocation, inv[:k], active, nu, power)
    rate = float(np.sum(np.log2(1.0 + allocation[active] * gains[active])))
    return WaterfillResult(allocation=allocation, rate=rate, water_level=nu)


def _check_kkt(allocation: np.ndarray, inv_active: np.ndarray, active: np.ndarray, nu: float, power: float) -> None:
    # Budget spent and every active channel filled to the same level
    budget_gap = abs(float(allocation.sum()) - power) / max(1.0, power)
    level_gap = float(np.max(np.abs(allocation[active] + inv_active - nu))) / max(1.0, nu)
    if max(budget_gap, level_gap) > settings.KKT_TOL:
        logger.warning(
            f"Water-filling KKT residual above {settings.KKT_TOL:g}: "
            f"budget {budget_gap:.3g}, level {level_gap:.3g}"
        )


def device_rates(profile: GainProfile) -> List[WaterfillResult]:
    """Water-filled result for every device of the profile."""
    return [waterfill(row, profile.power) for row in profile.gains]


def common_rate(profile: GainProfile) -> float:
    """
    C^dl: the largest rate every device can decode, min over per-device optima.

    Returns:
        Bits per realization; 0 if some device has all-zero gains
    """
    results = device_rates(profile)
    rate = min(r.rate for r in results)
    logger.debug(f"Common rate {rate:.4f} bits over {len(results)} devices")
    return rate
