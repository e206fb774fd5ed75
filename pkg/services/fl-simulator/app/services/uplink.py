"""
Analog over-the-air aggregation of local updates over the fading MAC.

Each device inverts its passing subchannels (|h| >= threshold) and scales by
a common gamma_m that spends its whole power budget. The PS normalizes each
received entry by gamma_bar * |M_i|, the number of devices that passed there.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ChannelError
from app.core.logging_config import get_logger
from app.models.schemas import UplinkConfig, UplinkRoundResult
from app.services.channel import apply_mac, num_slots
from app.services.downlink import merge_real_imag, split_real_imag

logger = get_logger(__name__)


def device_precode(delta: np.ndarray, h_ul: np.ndarray, cfg: UplinkConfig) -> Tuple[np.ndarray, float]:
    """
    Channel-inverting precoder of one device.

    Args:
        delta: Local model update, length d (odd d is zero-padded)
        h_ul: Uplink gains, length ceil(d/2)
        cfg: Power, threshold

    Returns:
        (x, gamma): transmitted symbols with ||x||^2 = P^ul, and the scale;
        all-zero x and gamma 0 when nothing passes or nothing is left to send
    """
    packed = split_real_imag(delta, pad=True)
    if packed.shape != h_ul.shape:
        raise ChannelError(f"update packs to {packed.shape[0]} symbols but h has {h_ul.shape[0]}")

    passing = np.abs(h_ul) >= cfg.threshold
    x = np.zeros_like(packed)
    if not np.any(passing):
        return x, 0.0
    energy = float(np.sum(np.abs(packed[passing]) ** 2 / np.abs(h_ul[passing]) ** 2))
    if energy <= 0.0:
        return x, 0.0

    gamma = float(np.sqrt(cfg.power / energy))
    x[passing] = gamma * packed[passing] / h_ul[passing]
    return x, gamma


def active_mask(h_uls: Sequence[np.ndarray], threshold: float) -> np.ndarray:
    """(M, K) boolean: device m passes the threshold on subchannel i."""
    return np.stack([np.abs(h) >= threshold for h in h_uls])


def ps_decode(y: np.ndarray, gammas: Sequence[float], active: np.ndarray, d: Optional[int] = None) -> np.ndarray:
    """
    Recover the average update from the MAC output.

    Args:
        y: Received symbols, length K
        gammas: gamma_m of every device (silent devices contribute 0)
        active: (M, K) mask of devices that passed on each subchannel
        d: Model length, strips padding

    Returns:
        Delta theta hat; zero where no device passed
    """
    gammas = np.asarray(gammas, dtype=float)
    if active.ndim != 2 or active.shape != (len(gammas), len(y)):
        raise ChannelError(f"active mask shape {active.shape} != ({len(gammas)}, {len(y)})")
    counts = active.sum(axis=0)
    gamma_bar = float(gammas.mean())
    symbols = np.zeros_like(y, dtype=complex)
    if gamma_bar > 0:
        hit = counts > 0
        symbols[hit] = y[hit] / (gamma_bar * counts[hit])
    return merge_real_imag(symbols, d)


def aggregate_errorfree(deltas: Sequence[np.ndarray], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Error-free uplink: sum_m (B_m / B) Delta theta_m.

    Args:
        deltas: Local updates
        weights: B_m / B per device; equal weights when omitted
    """
    if len(deltas) == 0:
        raise ChannelError("need at least one device update")
    stacked = np.stack([np.asarray(d, dtype=float) for d in deltas])
    if weights is None:
        return stacked.mean(axis=0)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(deltas),):
        raise ChannelError(f"{len(weights)} weights for {len(deltas)} devices")
    return weights @ stacked


def aggregate_round(
    deltas: Sequence[np.ndarray],
    h_uls: Sequence[np.ndarray],
    noise: np.ndarray,
    cfg: UplinkConfig,
    weights: Optional[Sequence[float]] = None,
) -> Tuple[UplinkRoundResult, float]:
    """
    One analog uplink round: precode every device, superpose, decode.

    With n_ul < ceil(d/2) the symbols go out over several slots; gamma_m is
    computed once over all of them, so slotting only reindexes the symbols.

    Args:
        deltas: Local updates, all of length d
        h_uls: Per-device uplink gains, length ceil(d/2)
        noise: PS noise, length ceil(d/2)
        cfg: Uplink settings
        weights: B_m / B, used only for the weight-gap diagnostic

    Returns:
        (result, weight_gap) where weight_gap is the squared distance between
        the decoded update and the data-weighted average of the true updates
    """
    if len(deltas) == 0 or len(deltas) != len(h_uls):
        raise ChannelError(f"{len(deltas)} updates for {len(h_uls)} channel vectors")
    d = len(deltas[0])
    if any(len(delta) != d for delta in deltas):
        raise ChannelError("all updates must have the same length")

    xs: List[np.ndarray] = []
    gammas: List[float] = []
    for delta, h in zip(deltas, h_uls):
        x, gamma = device_precode(delta, h, cfg)
        xs.append(x)
        gammas.append(gamma)

    y = apply_mac(xs, list(h_uls), noise)
    active = active_mask(h_uls, cfg.threshold)
    delta_hat = ps_decode(y, gammas, active, d)

    gamma_arr = np.asarray(gammas)
    silent = bool(gamma_arr.mean() == 0.0)
    if silent:
        logger.warning("All devices silent this round; uplink update is zero")
    slots = num_slots(len(noise), cfg.n_ul)
    if slots > 1:
        logger.debug(f"Uplink spans {slots} slots of {cfg.n_ul} subchannels")

    target = aggregate_errorfree(deltas, weights)
    weight_gap = float(np.sum((delta_hat - target) ** 2))
    result = UplinkRoundResult(
        delta_hat=delta_hat,
        gammas=gamma_arr,
        gamma_bar=float(gamma_arr.mean()),
        active_counts=active.sum(axis=0),
        silent=silent,
    )
    return result, weight_gap
