"""
PS -> devices broadcast: digital (compressed, common rate) and analog
(uncoded, channel inversion at the devices).
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import ChannelError
from app.core.logging_config import get_logger
from app.models.schemas import (
    ChannelRealization,
    DeviceEstimate,
    DigitalRoundInfo,
    GainProfile,
    PsState,
)
from app.services.capacity import common_rate
from app.services.channel import apply_broadcast, slot_views
from app.services.compression import bit_cost, compress, decompress, max_q_for_budget

logger = get_logger(__name__)


def split_real_imag(v: np.ndarray, pad: bool = False) -> np.ndarray:
    """
    Pack a real vector into complex symbols: first half real, second half imaginary.

    Args:
        v: Real vector of length d
        pad: Append one zero when d is odd

    Returns:
        complex128 vector of length ceil(d/2)
    """
    v = np.asarray(v, dtype=float)
    if len(v) % 2:
        if not pad:
            raise ValueError(f"odd length {len(v)} needs pad=True")
        v = np.append(v, 0.0)
    half = len(v) // 2
    return v[:half] + 1j * v[half:]


def merge_real_imag(c: np.ndarray, d: Optional[int] = None) -> np.ndarray:
    """Inverse of split_real_imag; `d` strips the padding entry."""
    out = np.concatenate([np.real(c), np.imag(c)])
    return out if d is None else out[:d]


def digital_broadcast(
    ps: PsState,
    profile: GainProfile,
    s: int,
    rng: np.random.Generator,
) -> Tuple[DeviceEstimate, DigitalRoundInfo, np.ndarray]:
    """
    Broadcast S(theta(t) - theta_hat(t-1)) at the common rate.

    All devices decode the same bits, so they share one estimate. The PS
    advances its mirror ps.theta_hat by the same decompressed update. When no
    q >= 1 fits the capacity the update is empty and the estimate stays put.

    Args:
        ps: PS state; theta_hat is updated in place
        profile: This round's squared downlink gains and P^dl
        s: Sparsity level
        rng: Generator for the quantization stream

    Returns:
        (common estimate, trace fields, decompressed update); devices apply
        the same update to their copy of theta_hat, zero when frozen
    """
    d = len(ps.theta)
    if not 1 <= s <= d:
        raise ValueError(f"s must be in [1, {d}], got {s}")

    capacity = common_rate(profile)
    q = max_q_for_budget(d, s, capacity)
    if q is None:
        logger.warning(
            f"Round {ps.round}: capacity {capacity:.2f} bits below bit_cost(q=1)="
            f"{bit_cost(d, s, 1):.2f}; estimate frozen"
        )
        info = DigitalRoundInfo(capacity_bits=capacity, feasible=False)
        update = np.zeros(d)
    else:
        drift = ps.theta - ps.theta_hat
        update = decompress(compress(drift, s, q, rng))
        ps.theta_hat = ps.theta_hat + update
        info = DigitalRoundInfo(capacity_bits=capacity, q=q, bit_cost=bit_cost(d, s, q))

    estimate = DeviceEstimate(
        theta_hat_m=ps.theta_hat.copy(),
        mse=float(np.sum((ps.theta_hat - ps.theta) ** 2)),
    )
    return estimate, info, update


def _slot_scales(symbols: np.ndarray, power: float, n_dl: int, norm_floor: float) -> List[float]:
    # One alpha per time slot, each slot spending the full budget
    return [
        math.sqrt(power / max(float(np.sum(np.abs(chunk) ** 2)), norm_floor))
        for chunk in slot_views(symbols, n_dl)
    ]


def analog_transmit_power(theta: np.ndarray, power: float, n_dl: int,
                          norm_floor: Optional[float] = None) -> List[float]:
    """||x^dl||^2 of every time slot for the given model."""
    floor = settings.NORM_FLOOR if norm_floor is None else norm_floor
    symbols = split_real_imag(theta, pad=True)
    scales = _slot_scales(symbols, power, n_dl, floor)
    return [
        float(np.sum(np.abs(alpha * chunk) ** 2))
        for alpha, chunk in zip(scales, slot_views(symbols, n_dl))
    ]


def analog_broadcast(
    theta: np.ndarray,
    power: float,
    realizations: Sequence[ChannelRealization],
    n_dl: Optional[int] = None,
    norm_floor: Optional[float] = None,
) -> List[DeviceEstimate]:
    """
    Uncoded broadcast of theta; each device inverts its own channel.

    The PS sends x = alpha * (theta_re + j theta_im) with alpha meeting the
    power budget exactly (per time slot when n_dl < ceil(d/2)). Device m
    computes y_m / (alpha h_m) and stacks real and imaginary parts, so its
    estimate is theta plus z_m / (alpha h_m).

    Args:
        theta: Global model, any length (odd d is zero-padded)
        power: P^dl, per slot
        realizations: One (gains, noise) pair per device, length ceil(d/2)
        n_dl: Subchannels per slot; defaults to one slot
        norm_floor: Lower bound on the slot energy used for alpha

    Returns:
        One DeviceEstimate per device, in device order
    """
    if power <= 0:
        raise ValueError(f"power must be positive, got {power}")
    d = len(theta)
    symbols = split_real_imag(theta, pad=True)
    n_dl = n_dl or len(symbols)
    floor = settings.NORM_FLOOR if norm_floor is None else norm_floor
    scales = np.repeat(
        _slot_scales(symbols, power, n_dl, floor),
        [len(c) for c in slot_views(symbols, n_dl)],
    )
    x = scales * symbols

    estimates = []
    for m, real in enumerate(realizations):
        if real.gains.shape != symbols.shape:
            raise ChannelError(
                f"device {m}: realization length {real.gains.shape[0]} != {symbols.shape[0]} symbols"
            )
        y = apply_broadcast(x, real.gains, real.noise)
        y_hat = y / (scales * real.gains)
        theta_hat_m = merge_real_imag(y_hat, d)
        estimates.append(DeviceEstimate(
            theta_hat_m=theta_hat_m,
            mse=float(np.sum((theta_hat_m - theta) ** 2)),
        ))
    return estimates


def errorfree_broadcast(theta: np.ndarray, num_devices: int) -> List[DeviceEstimate]:
    """Perfect downlink: every device gets theta exactly."""
    return [DeviceEstimate(theta_hat_m=np.array(theta, dtype=float, copy=True), mse=0.0)
            for _ in range(num_devices)]
