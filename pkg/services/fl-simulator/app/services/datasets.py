"""
Datasets: synthetic generators, the binary dataset file, and the iid /
non-iid device partitioners.

Binary dataset file (little-endian):

    4 bytes  magic b"FLDS"
    uint32   version (1)
    uint32   sample count n
    uint32   feature count f
    uint32   class count (0 = regression targets)
    float32  n * f features, row-major
    float32  n labels
"""

import os
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from app.core.logging_config import get_logger
from app.models.schemas import Dataset, Partition

logger = get_logger(__name__)

MAGIC = b"FLDS"
VERSION = 1
_HEADER = np.dtype([("version", "<u4"), ("n", "<u4"), ("f", "<u4"), ("classes", "<u4")])


def make_regression(
    samples: int, features: int, rng: np.random.Generator, noise_std: float = 0.1
) -> Tuple[Dataset, np.ndarray]:
    """
    Linear-Gaussian regression data.

    Returns:
        (dataset, true parameter vector)
    """
    theta_true = rng.standard_normal(features)
    x = rng.standard_normal((samples, features))
    y = x @ theta_true + noise_std * rng.standard_normal(samples)
    return Dataset(features=x, labels=y, num_classes=0), theta_true


def make_classification(
    samples: int, features: int, classes: int, rng: np.random.Generator, separation: float = 1.0
) -> Dataset:
    """Gaussian class clusters with balanced labels."""
    means = separation * rng.standard_normal((classes, features))
    labels = rng.permutation(np.arange(samples) % classes)
    x = means[labels] + rng.standard_normal((samples, features))
    return Dataset(features=x, labels=labels.astype(np.int64), num_classes=classes)


def train_test_split(data: Dataset, test_samples: int, rng: np.random.Generator) -> Tuple[Dataset, Dataset]:
    """Hold out `test_samples` random rows."""
    if not 0 <= test_samples < len(data):
        raise ValueError(f"test_samples must be in [0, {len(data)}), got {test_samples}")
    order = rng.permutation(len(data))
    return data.subset(np.sort(order[test_samples:])), data.subset(np.sort(order[:test_samples]))


def save_dataset(path: Union[str, Path], data: Dataset) -> None:
    """Write the binary dataset file (see module docstring)."""
    n, f = data.features.shape
    header = np.array([(VERSION, n, f, data.num_classes)], dtype=_HEADER)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.tobytes())
        fh.write(data.features.astype("<f4").tobytes())
        fh.write(data.labels.astype("<f4").tobytes())
    logger.info(f"Saved dataset {path}: {n} samples, {f} features, {data.num_classes} classes")


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Read a binary dataset file."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Dataset file not found: {path}")
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    header = np.frombuffer(blob, dtype=_HEADER, count=1, offset=4)[0]
    if int(header["version"]) != VERSION:
        raise ValueError(f"{path}: unsupported version {int(header['version'])}")
    n, f, classes = int(header["n"]), int(header["f"]), int(header["classes"])
    offset = 4 + _HEADER.itemsize
    expected = offset + 4 * (n * f + n)
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")

    x = np.frombuffer(blob, dtype="<f4", count=n * f, offset=offset).reshape(n, f).astype(float)
    y = np.frombuffer(blob, dtype="<f4", count=n, offset=offset + 4 * n * f).astype(float)
    if classes:
        y = y.astype(np.int64)
    return Dataset(features=x, labels=y, num_classes=classes)


def partition_iid(data: Dataset, num_devices: int, rng: np.random.Generator) -> Partition:
    """Random disjoint split; device sizes differ by at most one."""
    n = len(data)
    if num_devices < 1:
        raise ValueError(f"num_devices must be >= 1, got {num_devices}")
    if num_devices > n:
        raise ValueError(f"cannot split {n} samples over {num_devices} devices")
    blocks = np.array_split(rng.permutation(n), num_devices)
    return Partition(shards=[sorted(int(i) for i in block) for block in blocks])


def partition_noniid(data: Dataset, num_devices: int, rng: np.random.Generator) -> Partition:
    """
    Label-shard split: every device holds two shards from two different classes.

    Each class is cut into 2M / C shards (M/5 for ten classes). Shards are laid
    out class by class in a random class order; device slot m takes shards m
    and m + M, which lie C/2 classes apart. Device slots are then shuffled.
    """
    classes = data.num_classes
    m = num_devices
    if classes < 2:
        raise ValueError("noniid partition needs a labelled dataset")
    if classes % 2 or (2 * m) % classes:
        raise ValueError(
            f"each class is split into 2M/C shards (M/5 for 10 classes); "
            f"M={m} with C={classes} classes does not divide evenly"
        )
    per_class = 2 * m // classes

    shards = []
    for c in rng.permutation(classes):
        members = rng.permutation(np.nonzero(data.labels == c)[0])
        if len(members) < per_class:
            raise ValueError(f"class {c} has {len(members)} samples, fewer than {per_class} shards")
        shards.extend(np.array_split(members, per_class))

    slots = rng.permutation(m)
    assigned = [[] for _ in range(m)]
    for slot in range(m):
        device = int(slots[slot])
        assigned[device] = sorted(int(i) for i in np.concatenate([shards[slot], shards[slot + m]]))
    logger.debug(f"noniid partition: {len(shards)} shards of ~{len(shards[0])} samples")
    return Partition(shards=assigned)
