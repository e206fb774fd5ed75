"""Tests for the analog-downlink convergence bound."""

from fractions import Fraction

import numpy as np
import pytest

from app.core.config import settings
from app.core.exceptions import BoundError
from app.models.schemas import BoundParams
from app.services.bound import (
    best_tau,
    bound_trajectory,
    coeff_A,
    coeff_B,
    eta_schedule,
    has_plateaued,
    loss_bound,
    product_sum_trajectory,
    reference_regime,
    stationary_B,
    sweep,
    with_param,
)

TAUS = [1, 3, 4, 5, 7, 10]


def random_params(rng: np.random.Generator) -> BoundParams:
    return BoundParams(
        mu=float(rng.uniform(0.05, 1.0)),
        L=float(rng.uniform(1.0, 20.0)),
        tau=int(rng.integers(1, 11)),
        G2=float(rng.uniform(0.0, 100.0)),
        Gamma=float(rng.uniform(0.0, 50.0)),
        Z2=float(rng.uniform(0.0, 1e4)),
        M=int(rng.integers(1, 50)),
        sigma_dl=float(rng.uniform(0.5, 2.0)),
        P_dl=float(rng.uniform(1.0, 1000.0)),
        init_gap=float(rng.uniform(0.0, 1e4)),
        eta_decay=float(rng.uniform(0.0, 1e-2)),
    )


class TestCoefficients:
    def test_A_exact_value(self):
        p = reference_regime(iid=False, P_dl=10.0, tau=4)
        # eta = 1/6, mu = 1/5: A = 1 - (1/30)(4 - 8/6) = 41/45
        assert coeff_A(p, 0) == pytest.approx(float(Fraction(41, 45)), rel=1e-12)

    def test_A_at_single_step(self):
        p = BoundParams(mu=0.5, L=1.0, tau=1, G2=0, Gamma=0, Z2=0, M=1, sigma_dl=1, P_dl=1, init_gap=1, eta0=0.2)
        assert coeff_A(p, 0) == pytest.approx(1 - 0.5 * 0.2 + 0.2 ** 2, rel=1e-12)

    def test_A_tends_to_one(self):
        p = reference_regime(iid=True, P_dl=100.0, tau=3)
        assert coeff_A(p, 10 ** 12) == pytest.approx(1.0, abs=1e-9)

    def test_A_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = random_params(rng)
            for i in (0, 1, 10, 1000):
                assert 0.0 < coeff_A(p, i) <= 1.0

    def test_B_reference_regime_exact(self):
        p = reference_regime(iid=False, P_dl=10.0, tau=4)
        eta, mu, tau, g2, gamma = Fraction(1, 6), Fraction(1, 5), 4, 100, 50
        expected = (
            Fraction(20000, 40 * 10)
            + (1 + mu * (1 - eta)) * eta ** 2 * g2 * tau * (tau - 1) * (2 * tau - 1) / 6
            + (tau - 1 + eta ** 2 * (tau ** 2 + tau - 1)) * g2
            + 2 * eta * (tau - 1) * gamma
        )
        assert coeff_B(p, 0) == pytest.approx(float(expected), rel=1e-12)

    def test_B_single_step_collapse(self):
        p = BoundParams(mu=0.3, L=1.0, tau=1, G2=7.0, Gamma=3.0, Z2=100.0, M=4, sigma_dl=2.0,
                        P_dl=5.0, init_gap=1.0, eta0=0.1)
        assert coeff_B(p, 0) == pytest.approx(100.0 / (4 * 2.0 * 5.0) + 0.01 * 7.0, rel=1e-12)

    def test_B_vanishes_without_noise_or_drift(self):
        p = BoundParams(mu=0.3, L=1.0, tau=5, G2=0.0, Gamma=0.0, Z2=1.0, M=1, sigma_dl=1.0,
                        P_dl=1e300, init_gap=1.0)
        assert coeff_B(p, 0) < 1e-299

    def test_stationary_floor(self):
        p = reference_regime(iid=False, P_dl=10.0, tau=4)
        assert stationary_B(p) == pytest.approx(50.0 + 300.0)
        assert coeff_B(p, 10 ** 13) == pytest.approx(stationary_B(p), rel=1e-6)

    def test_step_size_out_of_range(self):
        p = BoundParams(mu=0.2, L=1.0, tau=1, G2=0, Gamma=0, Z2=0, M=1, sigma_dl=1, P_dl=1, init_gap=1, eta0=1.0)
        with pytest.raises(BoundError):
            coeff_A(p, 0)
        with pytest.raises(BoundError):
            coeff_B(p, 0)

    def test_eta_schedule(self):
        eta = eta_schedule(0.2, 4)
        assert eta(0) == pytest.approx(1 / 6)
        assert eta(1000) == pytest.approx(1 / 12)
        assert eta_schedule(0.2, 30)(0) == pytest.approx(1 / 6)
        assert eta_schedule(0.2, 40)(0) == pytest.approx(1 / 8)


class TestTrajectory:
    def test_matches_product_sum_form(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            p = random_params(rng)
            np.testing.assert_allclose(bound_trajectory(p, 200), product_sum_trajectory(p, 200), rtol=1e-10)

    def test_constant_coefficients_closed_form(self):
        p = BoundParams(mu=0.4, L=1.0, tau=3, G2=2.0, Gamma=1.0, Z2=50.0, M=5, sigma_dl=1.0,
                        P_dl=10.0, init_gap=300.0, eta_fn=lambda t: 0.1)
        a, b = coeff_A(p, 0), coeff_B(p, 0)
        t = np.arange(1, 501)
        expected = a ** t * 300.0 + b * (1 - a ** t) / (1 - a)
        np.testing.assert_allclose(bound_trajectory(p, 500), expected, rtol=1e-10)

    def test_flat_when_nothing_moves(self):
        p = BoundParams(mu=0.5, L=1.0, tau=2, G2=0.0, Gamma=0.0, Z2=0.0, M=1, sigma_dl=1.0,
                        P_dl=1.0, init_gap=42.0, eta_fn=lambda t: 1e-300)
        np.testing.assert_array_equal(bound_trajectory(p, 20), np.full(20, 42.0))

    def test_monotone_in_power_and_devices(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            p = random_params(rng)
            more_power = with_param(p, "P_dl", p.P_dl * 3)
            more_devices = with_param(p, "M", p.M + 5)
            base = bound_trajectory(p, 100)
            assert np.all(bound_trajectory(more_power, 100) <= base)
            assert np.all(bound_trajectory(more_devices, 100) <= base)

    def test_loss_bound_scales_with_L(self):
        p = reference_regime(iid=True, P_dl=100.0, tau=3)
        two = with_param(p, "L", 2.0)
        np.testing.assert_array_equal(loss_bound(two, 50), bound_trajectory(two, 50))
        np.testing.assert_allclose(loss_bound(with_param(p, "L", 6.0), 50), 3 * loss_bound(two, 50), rtol=1e-14)

    def test_invalid_horizon(self):
        with pytest.raises(ValueError):
            bound_trajectory(reference_regime(iid=True, P_dl=10.0), 0)


class TestTauSelection:
    # T=200 is early training, where the initial gap still dominates and extra
    # local steps pay off. By the default horizon the (tau - 1) G^2 floor wins.
    def test_best_tau_noniid(self):
        low_power = best_tau(reference_regime(iid=False, P_dl=10.0), TAUS, 200)
        high_power = best_tau(reference_regime(iid=False, P_dl=100.0), TAUS, 200)
        assert low_power == 3
        assert high_power == 1
        # Weaker downlink favours more local steps
        assert low_power > high_power

    def test_best_tau_iid(self):
        assert best_tau(reference_regime(iid=True, P_dl=100.0), TAUS, 200) == 3

    @pytest.mark.parametrize("iid, power", [(False, 10.0), (False, 100.0), (True, 100.0)])
    def test_single_step_wins_at_long_horizon(self, iid, power):
        assert best_tau(reference_regime(iid=iid, P_dl=power), TAUS, settings.BOUND_HORIZON) == 1

    def test_no_plateau_in_reference_regime(self):
        traj = loss_bound(reference_regime(iid=False, P_dl=10.0, tau=4), 10_000)
        assert not has_plateaued(traj)
        assert traj[-1] > traj[len(traj) // 2]

    def test_plateau_detection(self):
        assert has_plateaued(np.full(100, 3.0))
        assert not has_plateaued(np.linspace(1.0, 2.0, 100))
        assert not has_plateaued([1.0])


class TestSweep:
    def test_rows_per_value(self):
        rows = sweep(reference_regime(iid=False, P_dl=10.0), "tau", [1, 4], 30)
        assert len(rows) == 60
        assert set(rows[0]) == {"t", "tau", "P_dl", "bound"}
        assert [r["tau"] for r in rows[::30]] == [1, 4]
        assert rows[29]["t"] == 30

    def test_power_sweep(self):
        rows = sweep(reference_regime(iid=False, P_dl=10.0, tau=4), "Pdl", [10, 100], 10)
        assert {r["P_dl"] for r in rows} == {10.0, 100.0}

    def test_other_parameter_adds_value_column(self):
        rows = sweep(reference_regime(iid=True, P_dl=10.0), "G2", [1.0, 5.0], 5)
        assert rows[0]["value"] == 1.0

    def test_empty_values(self):
        assert sweep(reference_regime(iid=True, P_dl=10.0), "tau", [], 10) == []

    def test_unknown_parameter(self):
        with pytest.raises(BoundError):
            sweep(reference_regime(iid=True, P_dl=10.0), "gravity", [1.0], 10)

    def test_non_integer_tau(self):
        with pytest.raises(BoundError):
            with_param(reference_regime(iid=True, P_dl=10.0), "tau", 2.5)
