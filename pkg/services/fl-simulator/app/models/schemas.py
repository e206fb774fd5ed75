"""
Data models and schemas for the FL simulator
"""
import math
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings


# ============================================
# Modes
# ============================================

class DownlinkMode(str, Enum):
    """PS -> devices transmission scheme"""
    DIGITAL = "digital"
    ANALOG = "analog"
    ERRORFREE = "errorfree"


class UplinkMode(str, Enum):
    """Devices -> PS aggregation scheme"""
    ANALOG = "analog"
    ERRORFREE = "errorfree"


class PartitionKind(str, Enum):
    """How training samples are spread over devices"""
    IID = "iid"
    NONIID = "noniid"


class ModelKind(str, Enum):
    """Built-in learners"""
    LEAST_SQUARES = "least_squares"
    SOFTMAX = "softmax"


class ArrayModel(BaseModel):
    """Base for schemas carrying numpy arrays"""
    model_config = ConfigDict(arbitrary_types_allowed=True)


# ============================================
# Wireless channel
# ============================================

class ChannelParams(BaseModel):
    """Fading statistics and subchannel counts of both links"""
    sigma_dl: float = Field(default=1.0, gt=0, description="Downlink gain variance")
    sigma_ul: float = Field(default=1.0, gt=0, description="Uplink gain variance")
    n_dl: int = Field(default=1, ge=1, description="Downlink subchannels")
    n_ul: int = Field(default=1, ge=1, description="Uplink subchannels")

    @field_validator("sigma_dl", "sigma_ul")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("variance must be finite")
        return v


class ChannelRealization(ArrayModel):
    """Gains and noise of one link in one round"""
    gains: np.ndarray
    noise: np.ndarray

    @model_validator(mode="after")
    def _same_shape(self) -> "ChannelRealization":
        if self.gains.shape != self.noise.shape:
            raise ValueError(f"gain shape {self.gains.shape} != noise shape {self.noise.shape}")
        return self


# ============================================
# Compression
# ============================================

class CompressedUpdate(ArrayModel):
    """Digital downlink payload: support, signs, levels and the magnitude range"""
    support: np.ndarray = Field(description="Strictly increasing indices into [d]")
    signs: np.ndarray = Field(description="True where the entry is negative")
    levels: np.ndarray = Field(description="Quantization levels in {0..q}")
    x_min: float = Field(ge=0)
    x_max: float = Field(ge=0)
    q: int = Field(ge=1)
    d: int = Field(ge=1)

    @model_validator(mode="after")
    def _check(self) -> "CompressedUpdate":
        s = len(self.support)
        if s < 1:
            raise ValueError("support must hold at least one index")
        if s > self.d:
            raise ValueError(f"support size {s} exceeds d={self.d}")
        if len(self.signs) != s or len(self.levels) != s:
            raise ValueError("support, signs and levels must have the same length")
        if np.any(np.diff(self.support) <= 0):
            raise ValueError("support indices must be strictly increasing")
        if self.support[0] < 0 or self.support[-1] >= self.d:
            raise ValueError(f"support index out of range for d={self.d}")
        if np.any(self.levels < 0) or np.any(self.levels > self.q):
            raise ValueError(f"levels must lie in [0, {self.q}]")
        if self.x_min > self.x_max:
            raise ValueError(f"x_min={self.x_min} exceeds x_max={self.x_max}")
        return self

    @property
    def s(self) -> int:
        return len(self.support)


# ============================================
# Capacity
# ============================================

class WaterfillResult(ArrayModel):
    """Water-filling outcome for one device"""
    allocation: np.ndarray
    rate: float = Field(ge=0, description="Bits per channel use over all subchannels")
    water_level: float = 0.0

    @property
    def is_zero_capacity(self) -> bool:
        return self.allocation.size == 0


class GainProfile(ArrayModel):
    """Squared downlink gain magnitudes per device and subchannel"""
    gains: np.ndarray = Field(description="Shape (M, n)")
    power: float = Field(gt=0)

    @model_validator(mode="after")
    def _check(self) -> "GainProfile":
        if self.gains.ndim != 2 or self.gains.shape[0] < 1 or self.gains.shape[1] < 1:
            raise ValueError(f"gains must have shape (M>=1, n>=1), got {self.gains.shape}")
        if np.any(self.gains < 0) or not np.all(np.isfinite(self.gains)):
            raise ValueError("gains must be finite and non-negative")
        if not math.isfinite(self.power):
            raise ValueError("power must be finite")
        return self


# ============================================
# Downlink
# ============================================

class PsState(ArrayModel):
    """Global model and the devices' common estimate kept at the PS"""
    theta: np.ndarray
    theta_hat: np.ndarray
    round: int = 0

    @classmethod
    def initial(cls, theta0: np.ndarray) -> "PsState":
        theta0 = np.asarray(theta0, dtype=float)
        return cls(theta=theta0.copy(), theta_hat=theta0.copy(), round=0)

    @model_validator(mode="after")
    def _check(self) -> "PsState":
        if self.theta.shape != self.theta_hat.shape:
            raise ValueError("theta and theta_hat must have the same length")
        return self


class DeviceEstimate(ArrayModel):
    """A device's estimate of the global model"""
    theta_hat_m: np.ndarray
    mse: float = Field(ge=0)


class DigitalRoundInfo(BaseModel):
    """Trace fields produced by one digital broadcast"""
    capacity_bits: float
    q: Optional[int] = None
    bit_cost: Optional[float] = None
    feasible: bool = True


# ============================================
# Uplink
# ============================================

class UplinkConfig(BaseModel):
    """Device transmit power, truncation threshold and subchannel count"""
    power: float = Field(gt=0)
    threshold: float = Field(default_factory=lambda: settings.DEFAULT_THRESHOLD, ge=0)
    n_ul: int = Field(default=1, ge=1)

    @field_validator("power", "threshold")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v


class UplinkRoundResult(ArrayModel):
    """PS-side outcome of one over-the-air aggregation"""
    delta_hat: np.ndarray
    gammas: np.ndarray
    gamma_bar: float
    active_counts: np.ndarray
    silent: bool = False

    @property
    def active_fraction(self) -> float:
        m = max(len(self.gammas), 1)
        return float(np.mean(self.active_counts) / m) if self.active_counts.size else 1.0


# ============================================
# Learner
# ============================================

class Dataset(ArrayModel):
    """Feature matrix plus labels (class ids, or targets when num_classes == 0)"""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "Dataset":
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ValueError("dataset must be a non-empty 2-D feature matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must have one entry per sample")
        return self

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
        )


class Partition(BaseModel):
    """Disjoint per-device index lists into a dataset"""
    shards: List[List[int]]

    @property
    def sizes(self) -> List[int]:
        return [len(s) for s in self.shards]

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def weights(self) -> np.ndarray:
        """B_m / B per device"""
        sizes = np.asarray(self.sizes, dtype=float)
        return sizes / sizes.sum()


class SgdSchedule(BaseModel):
    """Local SGD settings: tau steps with eta(t) = eta0 / (decay * t + 1)"""
    tau: int = Field(ge=1)
    batch_size: int = Field(default=0, ge=0, description="0 means full shard")
    eta0: float = Field(gt=0)
    decay: float = Field(default=1e-3, ge=0)

    def eta(self, t: int) -> float:
        return self.eta0 / (self.decay * t + 1.0)


# ============================================
# Convergence bound
# ============================================

class BoundParams(BaseModel):
    """Inputs of the analog-downlink convergence recursion"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mu: float = Field(gt=0)
    L: float = Field(gt=0)
    tau: int = Field(ge=1)
    G2: float = Field(ge=0)
    Gamma: float = Field(ge=0)
    Z2: float = Field(ge=0)
    M: int = Field(ge=1)
    sigma_dl: float = Field(gt=0)
    P_dl: float = Field(gt=0)
    init_gap: float = Field(ge=0)
    eta0: Optional[float] = Field(default=None, gt=0)
    eta_decay: float = Field(default=1e-3, ge=0)
    eta_fn: Optional[Callable[[int], float]] = None

    @property
    def eta_max(self) -> float:
        """Largest step size for which the recursion holds"""
        return min(self.mu / (self.mu + 1.0), 1.0 / (self.mu * self.tau))

    def eta(self, t: int) -> float:
        if self.eta_fn is not None:
            return float(self.eta_fn(t))
        eta0 = self.eta0 if self.eta0 is not None else self.eta_max
        return eta0 / (self.eta_decay * t + 1.0)


# ============================================
# Experiment
# ============================================

class RoundTrace(BaseModel):
    """One row of the simulation trace"""
    t: int
    train_loss: float
    test_metric: float
    capacity_bits: Optional[float] = None
    q: Optional[int] = None
    bit_cost: Optional[float] = None
    mean_mse: Optional[float] = None
    active_fraction: Optional[float] = None
    gamma_bar: Optional[float] = None
    uplink_silent: Optional[bool] = None
    weight_gap: Optional[float] = None

    @classmethod
    def columns(cls) -> List[str]:
        return list(cls.model_fields.keys())


class SimConfig(BaseModel):
    """One experiment: links, learner, data and seed"""
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    downlink: DownlinkMode = DownlinkMode.ANALOG
    uplink: UplinkMode = UplinkMode.ANALOG
    num_devices: int = Field(default=10, ge=1)
    rounds: int = Field(default=100, ge=1)
    tau: int = Field(default=1, ge=1)
    batch_size: int = Field(default=0, ge=0)
    eta0: Optional[float] = Field(default=None, gt=0)
    eta_decay: float = Field(default=1e-3, ge=0)
    mu: float = Field(default=0.2, gt=0)
    p_dl: float = Field(default=100.0, gt=0)
    p_ul: float = Field(default=10.0, gt=0)
    sigma_dl: float = Field(default=1.0, gt=0)
    sigma_ul: float = Field(default=1.0, gt=0)
    n_dl: int = Field(default=0, ge=0, description="0 means ceil(d/2)")
    n_ul: int = Field(default=0, ge=0, description="0 means ceil(d/2)")
    threshold: float = Field(default_factory=lambda: settings.DEFAULT_THRESHOLD, ge=0)
    sparsity: Optional[int] = Field(default=None, ge=0, description="0 means max(1, d // 50)")
    partition: PartitionKind = PartitionKind.IID
    model: ModelKind = ModelKind.LEAST_SQUARES
    dataset: str = "synthetic"
    samples: int = Field(default=1000, ge=1)
    test_samples: int = Field(default=200, ge=0)
    dimension: int = Field(default=10, ge=1, description="Least-squares feature dimension")
    features: int = Field(default=20, ge=1, description="Softmax feature dimension")
    classes: int = Field(default=10, ge=2)
    noise_std: float = Field(default=0.1, ge=0)
    l2: float = Field(default=0.0, ge=0)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    log_every: int = Field(default_factory=lambda: settings.LOG_EVERY, ge=1)

    # Bound-mode keys, checked by `validate` only
    bound_L: Optional[float] = Field(default=None, gt=0)
    bound_G2: Optional[float] = Field(default=None, ge=0)
    bound_Gamma: Optional[float] = Field(default=None, ge=0)
    bound_Z2: Optional[float] = Field(default=None, ge=0)
    bound_init_gap: Optional[float] = Field(default=None, ge=0)

    @property
    def has_bound_keys(self) -> bool:
        return self.bound_L is not None

    def default_eta0(self) -> float:
        return min(self.mu / (self.mu + 1.0), 1.0 / (self.mu * self.tau))

    def sgd_schedule(self) -> SgdSchedule:
        eta0 = self.eta0 if self.eta0 is not None else self.default_eta0()
        return SgdSchedule(tau=self.tau, batch_size=self.batch_size, eta0=eta0, decay=self.eta_decay)

    def cross_checks(self) -> Tuple[List[Tuple[str, str]], List[Tuple[str, str]]]:
        """
        Checks spanning several keys.

        Returns:
            (errors, warnings), each a list of (key, message)
        """
        errors: List[Tuple[str, str]] = []
        warnings: List[Tuple[str, str]] = []

        if self.downlink == DownlinkMode.DIGITAL and self.sparsity is None:
            errors.append(("sparsity", "digital downlink requires sparsity (0 selects max(1, d // 50))"))

        if self.partition == PartitionKind.NONIID:
            if self.num_devices % 5 != 0:
                errors.append((
                    "num_devices",
                    f"noniid partition splits each class into M/5 shards; "
                    f"M={self.num_devices} is not divisible by 5",
                ))
            if self.model != ModelKind.SOFTMAX:
                errors.append(("partition", "noniid partition needs a labelled (softmax) dataset"))
            elif self.classes % 2 != 0 or (2 * self.num_devices) % self.classes != 0:
                errors.append((
                    "classes",
                    f"noniid needs an even class count dividing 2M={2 * self.num_devices}",
                ))

        if self.has_bound_keys:
            eta0 = self.eta0 if self.eta0 is not None else self.default_eta0()
            if eta0 > self.default_eta0():
                warnings.append((
                    "eta0",
                    f"eta0={eta0} violates the step-size precondition of the convergence bound "
                    f"0 < eta(t) <= min{{mu/(mu+1), 1/(mu*tau)}} = {self.default_eta0():.6g}",
                ))
        return errors, warnings
