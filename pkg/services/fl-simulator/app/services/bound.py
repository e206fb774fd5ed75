"""
Convergence bound of the analog downlink with an error-free uplink.

The expected squared distance to the optimum obeys

    u(t+1) <= A(t) u(t) + B(t),    u(0) = ||theta(0) - theta*||^2

and the loss gap is bounded by (L/2) u(t). Trajectories are computed with
the forward recursion; product_sum_trajectory evaluates the unrolled form
directly and serves as a cross-check.
"""

from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.core.config import settings
from app.core.exceptions import BoundError
from app.core.logging_config import get_logger
from app.models.schemas import BoundParams

logger = get_logger(__name__)

# Relative slack on the step-size check; eta_max itself is allowed
_ETA_SLACK = 1e-12

# CLI spelling -> BoundParams field
SWEEP_PARAMS: Dict[str, str] = {
    "tau": "tau",
    "Pdl": "P_dl",
    "P_dl": "P_dl",
    "M": "M",
    "mu": "mu",
    "L": "L",
    "G2": "G2",
    "Gamma": "Gamma",
    "Z2": "Z2",
    "sigma_dl": "sigma_dl",
    "init_gap": "init_gap",
}
_INT_PARAMS = {"tau", "M"}


def eta_schedule(mu: float, tau: int, decay: float = 1e-3) -> Callable[[int], float]:
    """eta(t) = min{mu/(mu+1), 1/(mu*tau)} / (decay * t + 1)."""
    eta0 = min(mu / (mu + 1.0), 1.0 / (mu * tau))
    return lambda t: eta0 / (decay * t + 1.0)


def _checked_eta(p: BoundParams, i: int) -> float:
    eta = p.eta(i)
    limit = p.eta_max
    if not 0.0 < eta <= limit * (1.0 + _ETA_SLACK):
        raise BoundError(
            f"eta({i})={eta:.6g} outside (0, min{{mu/(mu+1), 1/(mu*tau)}}] = (0, {limit:.6g}]"
        )
    return eta


def coeff_A(p: BoundParams, i: int) -> float:
    """A(i) = 1 - mu eta (tau - eta (tau - 1 + 1/mu)); lies in (0, 1]."""
    eta = _checked_eta(p, i)
    a = 1.0 - p.mu * eta * (p.tau - eta * (p.tau - 1 + 1.0 / p.mu))
    if not 0.0 < a <= 1.0:
        raise BoundError(f"A({i})={a:.6g} outside (0, 1] with eta={eta:.6g}")
    return a


def coeff_B(p: BoundParams, i: int) -> float:
    """Additive error B(i): downlink noise, local drift and heterogeneity terms."""
    eta = _checked_eta(p, i)
    tau, mu, g2 = p.tau, p.mu, p.G2
    noise = p.Z2 / (p.M * p.sigma_dl * p.P_dl)
    drift = (1.0 + mu * (1.0 - eta)) * eta ** 2 * g2 * tau * (tau - 1) * (2 * tau - 1) / 6.0
    spread = (tau - 1 + eta ** 2 * (tau ** 2 + tau - 1)) * g2
    hetero = 2.0 * eta * (tau - 1) * p.Gamma
    return noise + drift + spread + hetero


def stationary_B(p: BoundParams) -> float:
    """lim B(t) as eta(t) -> 0: Z^2 / (M sigma P) + (tau - 1) G^2."""
    return p.Z2 / (p.M * p.sigma_dl * p.P_dl) + (p.tau - 1) * p.G2


def bound_trajectory(p: BoundParams, T: int) -> np.ndarray:
    """
    Upper bound on E||theta(t) - theta*||^2 for t = 1..T.

    Raises:
        BoundError: step size out of range, or the recursion overflowed
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    out = np.empty(T)
    u = float(p.init_gap)
    for t in range(T):
        u = coeff_A(p, t) * u + coeff_B(p, t)
        if not np.isfinite(u):
            raise BoundError(f"bound overflowed at t={t + 1}")
        out[t] = u
    return out


def product_sum_trajectory(p: BoundParams, T: int) -> np.ndarray:
    """
    The unrolled bound, evaluated term by term:

        u(t) = prod_{i<t} A(i) u(0) + sum_{i<t} B(i) prod_{i<j<t} A(j)
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    a = np.array([coeff_A(p, i) for i in range(T)])
    b = np.array([coeff_B(p, i) for i in range(T)])
    out = np.empty(T)
    for t in range(1, T + 1):
        total = float(np.prod(a[:t])) * p.init_gap
        for i in range(t):
            total += b[i] * float(np.prod(a[i + 1:t]))
        out[t - 1] = total
    return out


def loss_bound(p: BoundParams, T: int) -> np.ndarray:
    """E[F(theta(t))] - F* <= (L/2) E||theta(t) - theta*||^2, t = 1..T."""
    return 0.5 * p.L * bound_trajectory(p, T)


def has_plateaued(trajectory: Sequence[float], window: Optional[float] = None, tol: Optional[float] = None) -> bool:
    """Relative change over the trailing `window` fraction of rounds is below `tol`."""
    window = settings.PLATEAU_WINDOW if window is None else window
    tol = settings.PLATEAU_TOL if tol is None else tol
    traj = np.asarray(trajectory, dtype=float)
    if traj.size < 2:
        return False
    start = traj[max(0, int(np.floor(traj.size * (1.0 - window))) - 1)]
    end = traj[-1]
    return bool(abs(end - start) <= tol * max(abs(start), np.finfo(float).tiny))


def with_param(template: BoundParams, name: str, value: float) -> BoundParams:
    """Copy of template with one parameter replaced (CLI spelling accepted)."""
    if name not in SWEEP_PARAMS:
        raise BoundError(f"Unknown bound parameter: {name}. Choose from {', '.join(sorted(SWEEP_PARAMS))}")
    field = SWEEP_PARAMS[name]
    if field in _INT_PARAMS:
        if float(value) != int(value):
            raise BoundError(f"{name} must be an integer, got {value}")
        value = int(value)
    # Round-trip through validation so the new value is range-checked
    return BoundParams(**{**template.model_dump(), field: value})


def best_tau(template: BoundParams, taus: Sequence[int], T: int) -> int:
    """tau with the lowest loss bound at round T; ties go to the smaller tau."""
    if not taus:
        raise ValueError("taus must be non-empty")
    finals = [(float(loss_bound(with_param(template, "tau", tau), T)[-1]), tau) for tau in sorted(taus)]
    return min(finals)[1]


def reference_regime(iid: bool, P_dl: float, tau: int = 1, eta_decay: float = 1e-3) -> BoundParams:
    """
    Reference regime for the bound sweeps: mu=0.2, L=10, M=40, sigma=1,
    initial gap 5e3, Z^2=2e4, and (G^2, Gamma) = (10, 5) iid or (100, 50) non-iid.
    eta0 is left to its maximal value for each tau.
    """
    g2, gamma = (10.0, 5.0) if iid else (100.0, 50.0)
    return BoundParams(
        mu=0.2, L=10.0, tau=tau, G2=g2, Gamma=gamma, Z2=2e4, M=40,
        sigma_dl=1.0, P_dl=P_dl, init_gap=5e3, eta_decay=eta_decay,
    )


def sweep(template: BoundParams, vary: str, values: Sequence[float], T: int) -> List[Dict[str, float]]:
    """
    Loss-bound trajectories for each value of one parameter.

    Returns:
        Rows with keys t, tau, P_dl, bound, plus `value` when the varied
        parameter is neither tau nor P_dl; empty for an empty value list
    """
    if vary not in SWEEP_PARAMS:
        raise BoundError(f"Unknown bound parameter: {vary}. Choose from {', '.join(sorted(SWEEP_PARAMS))}")
    extra = SWEEP_PARAMS[vary] not in ("tau", "P_dl")
    rows: List[Dict[str, float]] = []
    for value in values:
        p = with_param(template, vary, value)
        traj = loss_bound(p, T)
        if not has_plateaued(traj):
            logger.info(f"{vary}={value}: bound still moving at T={T}")
        for t, bound in enumerate(traj, start=1):
            row = {"t": t, "tau": p.tau, "P_dl": p.P_dl, "bound": float(bound)}
            if extra:
                row["value"] = value
            rows.append(row)
    logger.info(f"Bound sweep over {vary}: {len(values)} values, T={T}")
    return rows
