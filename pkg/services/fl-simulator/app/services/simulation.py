"""
Federated Learning Round Orchestrator
Runs one experiment: downlink -> local SGD -> uplink -> global update, per round
"""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.exceptions import SimulatorError
from app.core.logging_config import get_logger
from app.core.rng import SeededRng
from app.models.learners import LearnerModel, build_model
from app.models.schemas import (
    ChannelParams,
    Dataset,
    DeviceEstimate,
    DownlinkMode,
    GainProfile,
    ModelKind,
    Partition,
    PartitionKind,
    PsState,
    RoundTrace,
    SimConfig,
    UplinkConfig,
    UplinkMode,
)
from app.services.channel import draw_fading, draw_noise, draw_realization
from app.services.compression import default_sparsity
from app.services.datasets import (
    load_dataset,
    make_classification,
    make_regression,
    partition_iid,
    partition_noniid,
    train_test_split,
)
from app.services.downlink import analog_broadcast, digital_broadcast, errorfree_broadcast
from app.services.training import evaluate, global_loss, local_sgd
from app.services.uplink import aggregate_errorfree, aggregate_round
from app.utils.trace_writer import write_csv_atomic

logger = get_logger(__name__)


def build_data(config: SimConfig, rng: SeededRng) -> Tuple[Dataset, Dataset]:
    """
    Training and held-out sets for a config.

    With test_samples = 0 the training set doubles as the test set.
    """
    data_rng = rng.generator_for("data")
    total = config.samples + config.test_samples
    if config.dataset == "synthetic":
        if config.model == ModelKind.LEAST_SQUARES:
            data, _ = make_regression(total, config.dimension, data_rng, config.noise_std)
        else:
            data = make_classification(total, config.features, config.classes, data_rng)
    else:
        data = load_dataset(config.dataset)

    if config.test_samples == 0:
        return data, data
    return train_test_split(data, config.test_samples, rng.generator_for("split"))


def build_partition(config: SimConfig, train: Dataset, rng: SeededRng) -> Partition:
    part_rng = rng.generator_for("partition")
    if config.partition == PartitionKind.NONIID:
        return partition_noniid(train, config.num_devices, part_rng)
    return partition_iid(train, config.num_devices, part_rng)


class FederatedSimulation:
    """
    One experiment over T global rounds.

    Holds the PS state and, for the digital downlink, the devices' copy of
    theta_hat. Every random draw comes from a (purpose, round, device) stream
    of the config seed, so results do not depend on the worker count.
    """

    def __init__(
        self,
        config: SimConfig,
        num_workers: Optional[int] = None,
        train: Optional[Dataset] = None,
        test: Optional[Dataset] = None,
    ):
        """
        Initialize simulation

        Args:
            config: Validated experiment config
            num_workers: Threads for the per-device loops (settings.NUM_WORKERS)
            train: Training set override; built from config when omitted
            test: Held-out set override
        """
        self.config = config
        self.rng = SeededRng(config.seed)
        self.num_workers = max(1, num_workers or settings.NUM_WORKERS)

        if train is None:
            train, built_test = build_data(config, self.rng)
            test = test if test is not None else built_test
        self.train = train
        self.test = test if test is not None else train

        self.model: LearnerModel = build_model(
            config.model, self.train.num_features, self.train.num_classes or config.classes, config.l2
        )
        self.partition = build_partition(config, self.train, self.rng)
        self.weights = self.partition.weights()
        self.sched = config.sgd_schedule()

        self.d = self.model.dimension
        self.symbols = -(-self.d // 2)
        self.channel = ChannelParams(
            sigma_dl=config.sigma_dl,
            sigma_ul=config.sigma_ul,
            n_dl=config.n_dl or self.symbols,
            n_ul=config.n_ul or self.symbols,
        )
        self.sparsity = None
        if config.downlink == DownlinkMode.DIGITAL:
            self.sparsity = min(config.sparsity or default_sparsity(self.d), self.d)

        self.ps = PsState.initial(self.model.init_params())
        self.device_theta_hat = self.ps.theta_hat.copy()
        self.traces: List[RoundTrace] = []

        logger.info(
            f"FederatedSimulation created: {config.downlink.value} downlink, {config.uplink.value} uplink, "
            f"M={config.num_devices}, d={self.d}, tau={config.tau}, seed={config.seed}"
        )

    def _map_devices(self, fn, items: list) -> list:
        # Results come back in device order whatever the pool size
        if self.num_workers == 1 or len(items) < 2:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.num_workers) as pool:
            return list(pool.map(fn, items))

    def _downlink(self, r: int) -> Tuple[List[np.ndarray], dict]:
        """Device starting points for round r plus downlink trace fields."""
        cfg = self.config
        m_count = cfg.num_devices
        if cfg.downlink == DownlinkMode.DIGITAL:
            gains = np.stack([
                np.abs(draw_fading(self.channel, self.channel.n_dl, self.rng.generator_for("fading_dl", r, m))) ** 2
                for m in range(m_count)
            ])
            profile = GainProfile(gains=gains, power=cfg.p_dl)
            estimate, info, update = digital_broadcast(
                self.ps, profile, self.sparsity, self.rng.generator_for("quant", r)
            )
            self.device_theta_hat = self.device_theta_hat + update
            fields = {
                "capacity_bits": info.capacity_bits,
                "q": info.q,
                "bit_cost": info.bit_cost,
                "mean_mse": estimate.mse,
            }
            return [self.device_theta_hat] * m_count, fields

        if cfg.downlink == DownlinkMode.ANALOG:
            realizations = [
                draw_realization(self.channel, self.symbols, self.rng.generator_for("downlink", r, m), link="dl")
                for m in range(m_count)
            ]
            estimates: List[DeviceEstimate] = analog_broadcast(
                self.ps.theta, cfg.p_dl, realizations, n_dl=self.channel.n_dl
            )
        else:
            estimates = errorfree_broadcast(self.ps.theta, m_count)
        fields = {"mean_mse": float(np.mean([e.mse for e in estimates]))}
        return [e.theta_hat_m for e in estimates], fields

    def _uplink(self, r: int, deltas: List[np.ndarray]) -> Tuple[np.ndarray, dict]:
        cfg = self.config
        if cfg.uplink == UplinkMode.ERRORFREE:
            return aggregate_errorfree(deltas, self.weights), {}

        h_uls = [
            draw_fading(self.channel, self.symbols, self.rng.generator_for("fading_ul", r, m), link="ul")
            for m in range(cfg.num_devices)
        ]
        noise = draw_noise(self.symbols, self.rng.generator_for("noise_ul", r))
        ul_cfg = UplinkConfig(power=cfg.p_ul, threshold=cfg.threshold, n_ul=self.channel.n_ul)
        result, weight_gap = aggregate_round(deltas, h_uls, noise, ul_cfg, self.weights)
        fields = {
            "active_fraction": result.active_fraction,
            "gamma_bar": result.gamma_bar,
            "uplink_silent": result.silent,
            "weight_gap": weight_gap,
        }
        return result.delta_hat, fields

    def step(self) -> RoundTrace:
        """Run one global round and append its trace row."""
        r = self.ps.round
        starts, fields = self._downlink(r)

        def train_device(m: int) -> np.ndarray:
            return local_sgd(
                starts[m], self.model, self.train, self.partition.shards[m],
                self.sched, r, self.rng.generator_for("sgd", r, m),
            )

        deltas = self._map_devices(train_device, list(range(self.config.num_devices)))
        delta_hat, uplink_fields = self._uplink(r, deltas)
        fields.update(uplink_fields)

        if self.config.downlink == DownlinkMode.DIGITAL:
            self.ps.theta = self.ps.theta_hat + delta_hat
        else:
            self.ps.theta = self.ps.theta + delta_hat
        self.ps.round = r + 1

        trace = RoundTrace(
            t=r + 1,
            train_loss=global_loss(self.model, self.ps.theta, self.train, self.partition),
            test_metric=evaluate(self.model, self.ps.theta, self.test),
            **fields,
        )
        self.traces.append(trace)

        if (r + 1) % self.config.log_every == 0 or r + 1 == self.config.rounds:
            logger.info(
                f"Round {r + 1}/{self.config.rounds}: loss={trace.train_loss:.6g}, "
                f"metric={trace.test_metric:.6g}"
            )
        else:
            logger.debug(f"Round {r + 1}: loss={trace.train_loss:.6g}")
        return trace

    def run(self) -> List[RoundTrace]:
        """Run the remaining rounds."""
        while self.ps.round < self.config.rounds:
            self.step()
        if self.config.downlink == DownlinkMode.DIGITAL and not np.array_equal(
            self.device_theta_hat, self.ps.theta_hat
        ):
            raise SimulatorError("Device and PS copies of theta_hat diverged")
        return self.traces


def write_trace(traces: List[RoundTrace], output_path: Union[str, Path]) -> Path:
    """Write trace rows in the fixed column order."""
    return write_csv_atomic(output_path, RoundTrace.columns(), (t.model_dump() for t in traces))


def run(config: SimConfig, output_path: Union[str, Path], num_workers: Optional[int] = None) -> Path:
    """
    Run an experiment and write its trace.

    Args:
        config: Validated config
        output_path: Trace CSV destination
        num_workers: Threads for device loops

    Returns:
        Path: The trace file
    """
    sim = FederatedSimulation(config, num_workers=num_workers)
    traces = sim.run()
    return write_trace(traces, output_path)
