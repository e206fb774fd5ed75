"""Tests for data generation, the dataset file and the partitioners."""

import numpy as np
import pytest

from app.models.schemas import Dataset
from app.services.datasets import (
    load_dataset,
    make_classification,
    make_regression,
    partition_iid,
    partition_noniid,
    save_dataset,
    train_test_split,
)


def labelled(n: int, classes: int = 10, seed: int = 0) -> Dataset:
    return make_classification(n, 3, classes, np.random.default_rng(seed))


def assert_disjoint_cover(partition, n: int) -> None:
    flat = [i for shard in partition.shards for i in shard]
    assert len(flat) == len(set(flat))
    assert sorted(flat) == list(range(n))
    assert partition.total == n


class TestGenerators:
    def test_regression_shapes(self):
        data, theta = make_regression(50, 4, np.random.default_rng(0), noise_std=0.0)
        assert data.features.shape == (50, 4)
        assert data.num_classes == 0
        np.testing.assert_allclose(data.features @ theta, data.labels)

    def test_classification_balanced(self):
        data = labelled(1000)
        counts = np.bincount(data.labels, minlength=10)
        assert np.all(counts == 100)

    def test_train_test_split(self):
        data = labelled(100)
        train, test = train_test_split(data, 20, np.random.default_rng(1))
        assert len(train) == 80 and len(test) == 20

    def test_split_needs_training_rows(self):
        with pytest.raises(ValueError):
            train_test_split(labelled(10), 10, np.random.default_rng(0))


class TestDatasetFile:
    def test_round_trip(self, tmp_path):
        data = labelled(30, classes=3)
        path = tmp_path / "data.flds"
        save_dataset(path, data)
        back = load_dataset(path)
        assert back.num_classes == 3
        np.testing.assert_array_equal(back.labels, data.labels)
        np.testing.assert_allclose(back.features, data.features.astype(np.float32))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.flds"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(ValueError):
            load_dataset(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "short.flds"
        save_dataset(path, labelled(10, classes=2))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ValueError):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "absent.flds")


class TestIidPartition:
    def test_single_device(self):
        part = partition_iid(labelled(20), 1, np.random.default_rng(0))
        assert part.shards[0] == list(range(20))

    def test_equal_blocks(self):
        part = partition_iid(labelled(100), 4, np.random.default_rng(1))
        assert part.sizes == [25, 25, 25, 25]
        assert_disjoint_cover(part, 100)

    def test_uneven_sizes_differ_by_one(self):
        part = partition_iid(labelled(103), 5, np.random.default_rng(2))
        assert max(part.sizes) - min(part.sizes) <= 1
        assert_disjoint_cover(part, 103)

    def test_class_mix_follows_global(self):
        data = labelled(8000)
        part = partition_iid(data, 4, np.random.default_rng(3))
        for shard in part.shards:
            share = np.bincount(data.labels[shard], minlength=10) / len(shard)
            assert np.all(np.abs(share - 0.1) <= 0.05)

    def test_too_many_devices(self):
        with pytest.raises(ValueError):
            partition_iid(labelled(10), 11, np.random.default_rng(0))


class TestNonIidPartition:
    @pytest.mark.parametrize("devices", [5, 10, 20])
    def test_two_classes_per_device(self, devices):
        data = labelled(1000)
        part = partition_noniid(data, devices, np.random.default_rng(devices))
        assert len(part.shards) == devices
        for shard in part.shards:
            assert len(set(data.labels[shard].tolist())) == 2
        assert_disjoint_cover(part, 1000)

    def test_indivisible_device_count(self):
        with pytest.raises(ValueError, match="M/5"):
            partition_noniid(labelled(1000), 7, np.random.default_rng(0))

    def test_needs_labels(self):
        data, _ = make_regression(100, 2, np.random.default_rng(0))
        with pytest.raises(ValueError):
            partition_noniid(data, 10, np.random.default_rng(0))
