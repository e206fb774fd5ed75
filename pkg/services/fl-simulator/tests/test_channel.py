"""Tests for fading generation, the channel equations and seeded streams."""

import numpy as np
import pytest

from app.core.exceptions import ChannelError
from app.core.rng import SeededRng
from app.models.schemas import ChannelParams
from app.services.channel import (
    apply_broadcast,
    apply_mac,
    complex_gaussian,
    draw_fading,
    draw_realization,
    num_slots,
    slot_views,
)


class TestFading:
    def test_complex_gaussian_variance(self):
        rng = np.random.default_rng(0)
        z = complex_gaussian(2.0, 200_000, rng)
        assert z.dtype == np.complex128
        assert abs(np.mean(np.abs(z) ** 2) - 2.0) < 0.03
        # Real and imaginary parts carry half the variance each
        assert abs(np.var(z.real) - 1.0) < 0.02
        assert abs(np.var(z.imag) - 1.0) < 0.02

    def test_link_selects_variance(self):
        params = ChannelParams(sigma_dl=4.0, sigma_ul=0.25)
        h_dl = draw_fading(params, 100_000, np.random.default_rng(1), link="dl")
        h_ul = draw_fading(params, 100_000, np.random.default_rng(1), link="ul")
        assert abs(np.mean(np.abs(h_dl) ** 2) - 4.0) < 0.1
        assert abs(np.mean(np.abs(h_ul) ** 2) - 0.25) < 0.01

    def test_unknown_link(self):
        with pytest.raises(ValueError):
            draw_fading(ChannelParams(), 4, np.random.default_rng(0), link="sideways")

    def test_realization_shapes(self):
        real = draw_realization(ChannelParams(), 7, np.random.default_rng(2))
        assert real.gains.shape == (7,)
        assert real.noise.shape == (7,)

    def test_zero_length_rejected(self):
        with pytest.raises(ValueError):
            complex_gaussian(1.0, 0, np.random.default_rng(0))


class TestChannelEquations:
    def test_broadcast(self):
        x = np.array([1 + 1j, 2 - 1j])
        h = np.array([0.5j, 2.0])
        z = np.array([0.1, -0.1j])
        np.testing.assert_allclose(apply_broadcast(x, h, z), h * x + z)

    def test_broadcast_length_mismatch(self):
        with pytest.raises(ChannelError):
            apply_broadcast(np.ones(3, complex), np.ones(2, complex), np.zeros(3, complex))

    def test_mac_superposition(self):
        rng = np.random.default_rng(3)
        xs = [complex_gaussian(1.0, 5, rng) for _ in range(3)]
        hs = [complex_gaussian(1.0, 5, rng) for _ in range(3)]
        z = complex_gaussian(1.0, 5, rng)
        expected = z + sum(h * x for h, x in zip(hs, xs))
        np.testing.assert_allclose(apply_mac(xs, hs, z), expected, rtol=1e-14)

    def test_single_device_mac_matches_broadcast(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            k = int(rng.integers(1, 9))
            x, h, z = (complex_gaussian(1.0, k, rng) for _ in range(3))
            np.testing.assert_array_equal(apply_mac([x], [h], z), apply_broadcast(x, h, z))

    def test_mac_does_not_modify_noise(self):
        z = np.zeros(2, complex)
        apply_mac([np.ones(2, complex)], [np.ones(2, complex)], z)
        assert np.all(z == 0)

    def test_mac_device_mismatch(self):
        with pytest.raises(ChannelError):
            apply_mac([np.ones(2, complex)], [], np.zeros(2, complex))
        with pytest.raises(ChannelError):
            apply_mac([np.ones(3, complex)], [np.ones(2, complex)], np.zeros(2, complex))


class TestSlots:
    @pytest.mark.parametrize("symbols,subchannels,expected", [(4, 2, 2), (5, 2, 3), (1, 8, 1), (8, 8, 1)])
    def test_num_slots(self, symbols, subchannels, expected):
        assert num_slots(symbols, subchannels) == expected

    def test_slot_views_cover_vector(self):
        v = np.arange(7)
        chunks = slot_views(v, 3)
        assert [len(c) for c in chunks] == [3, 3, 1]
        np.testing.assert_array_equal(np.concatenate(chunks), v)

    def test_invalid_subchannels(self):
        with pytest.raises(ValueError):
            num_slots(4, 0)


class TestSeededRng:
    def test_same_stream_same_draws(self):
        a = SeededRng(42).generator_for("fading_dl", 3, 1).standard_normal(5)
        b = SeededRng(42).generator_for("fading_dl", 3, 1).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_distinct(self):
        root = SeededRng(42)
        base = root.generator_for("fading_dl", 3, 1).standard_normal(5)
        for other in (
            root.generator_for("fading_dl", 3, 2),
            root.generator_for("fading_dl", 4, 1),
            root.generator_for("noise_dl", 3, 1),
            SeededRng(43).generator_for("fading_dl", 3, 1),
        ):
            assert not np.array_equal(base, other.standard_normal(5))

    def test_negative_ids_rejected(self):
        with pytest.raises(ValueError):
            SeededRng(0).stream("sgd", round=-1)
