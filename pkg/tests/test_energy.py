import numpy as np
import pytest

from ubopt.channel import Trajectory
from ubopt.dts import tau_candidates
from ubopt.energy import (energy_causality, harvest_linear, harvest_nonlinear,
                          nonlinear_harvest_power, phi_const, received_power)
from ubopt.scenario import default_scenario


def hover_trajectory(sc, q):
    return Trajectory(np.tile(np.asarray(q, float), (sc.N + 1, 1)))


class TestLinearHarvest:
    def test_full_reflection_harvests_nothing(self):
        sc = default_scenario()
        assert harvest_linear(1.0, np.array([5.0, 0.0]), sc) == 0.0

    def test_value_above_source(self):
        sc = default_scenario()
        got = harvest_linear(0.0, np.array([5.0, 0.0]), sc)
        assert got == pytest.approx(4.5e-6 * sc.P_s, rel=1e-12)

    def test_affine_in_reflection_time(self, rng):
        sc = default_scenario()
        q = rng.uniform(0, 20, size=2)
        for tau in rng.uniform(0, 1, size=10):
            half = harvest_linear((1.0 + tau) / 2.0, q, sc)
            assert harvest_linear(tau, q, sc) == pytest.approx(2.0 * half, rel=1e-12)


class TestNonlinearHarvest:
    def test_zero_input_harvests_nothing(self):
        sc = default_scenario()
        assert nonlinear_harvest_power(0.0, sc) == pytest.approx(0.0, abs=1e-18)

    def test_saturation_energy(self):
        sc = default_scenario().with_overrides(T=1.0, N=1, P_s=1e6, omega0=1.0, H=1.0,
                                               w_s=(0.0, 0.0), q_I=(0.0, 0.0),
                                               q_F=(0.0, 0.0), V_max=0.0)
        e = harvest_nonlinear(0.0, np.array([0.0, 0.0]), sc)
        assert e == pytest.approx(2.8e-3, rel=1e-9)

    def test_phi_value(self):
        sc = default_scenario()
        assert phi_const(sc) == pytest.approx(1.0 / (1.0 + np.exp(3.3)), rel=1e-12)
        assert phi_const(sc) == pytest.approx(0.03557, rel=1e-3)

    def test_monotone_and_bounded(self):
        sc = default_scenario()
        p = np.linspace(0.0, 0.2, 500)
        h = nonlinear_harvest_power(p, sc)
        assert np.all(np.diff(h) >= -1e-18)
        assert np.all(h <= sc.Xi * (1 + 1e-12))

    def test_affine_in_reflection_time(self, rng):
        sc = default_scenario()
        q = rng.uniform(0, 20, size=2)
        for tau in rng.uniform(0, 1, size=10):
            half = harvest_nonlinear((1.0 + tau) / 2.0, q, sc)
            assert harvest_nonlinear(tau, q, sc) == pytest.approx(2.0 * half, rel=1e-12)

    def test_low_power_matches_initial_slope_model(self):
        # a linear model with mu equal to the saturating curve's initial
        # slope agrees within 15% up to 0.1 mW input
        sc = default_scenario()
        phi = phi_const(sc)
        mu_slope = sc.Xi * sc.beta * phi  # d/dP of the curve at P = 0
        p = np.linspace(1e-6, 1e-4, 50)
        e_nl = nonlinear_harvest_power(p, sc)
        e_lin = mu_slope * p
        rel = np.abs(e_lin - e_nl) / e_nl
        assert np.max(rel) <= 0.15


class TestCausality:
    def test_zero_tau_feasible(self):
        sc = default_scenario().with_overrides(N=8, T=4.0)
        traj = hover_trajectory(sc, [5.0, 0.0])
        led = energy_causality(np.zeros(8), traj, sc)
        assert led.feasible and np.all(led.consumed == 0.0)

    def test_full_tau_infeasible(self):
        sc = default_scenario().with_overrides(N=8, T=4.0)
        traj = hover_trajectory(sc, [5.0, 0.0])
        led = energy_causality(np.ones(8), traj, sc)
        assert not led.feasible
        assert np.all(led.harvested == 0.0)

    def test_energy_balanced_candidate_is_tight(self):
        # the per-slot balancing value keeps the running slack at zero
        sc = default_scenario().with_overrides(N=6, T=3.0)
        traj = hover_trajectory(sc, [7.0, 1.0])
        eta = np.full(6, 0.2)
        cand = [c for c in tau_candidates(0, traj, eta, sc) if c.case == "energy-active"][0]
        tau = np.full(6, float(cand.tau[0]))
        led = energy_causality(tau, traj, sc)
        assert np.max(np.abs(led.cumulative_slack)) < 1e-12

    def test_energy_candidate_closed_form(self):
        sc = default_scenario().with_overrides(N=6, T=3.0)
        traj = hover_trajectory(sc, [7.0, 1.0])
        cand = [c for c in tau_candidates(2, traj, np.full(6, 0.2), sc)
                if c.case == "energy-active"][0]
        d2 = 100.0 + (7.0 - 5.0) ** 2 + 1.0  # slant range above [7, 1]
        chi = sc.mu * sc.delta_t * sc.omega0 * sc.P_s / d2
        assert cand.tau[0] == pytest.approx(chi / (chi + sc.delta_t * sc.P_c), rel=1e-12)

    def test_length_mismatch(self):
        sc = default_scenario().with_overrides(N=4, T=2.0)
        traj = hover_trajectory(sc, [5.0, 0.0])
        with pytest.raises(ValueError, match="length"):
            energy_causality(np.zeros(3), traj, sc)

    def test_nonlinear_ledger_model_dispatch(self):
        sc = default_scenario().with_overrides(N=4, T=2.0, eh_model="nonlinear")
        traj = hover_trajectory(sc, [5.0, 0.0])
        led = energy_causality(np.full(4, 0.3), traj, sc)
        p_in = received_power(np.array([5.0, 0.0]), sc)
        per_slot = 0.7 * sc.delta_t * nonlinear_harvest_power(p_in, sc)
        assert led.harvested[0] == pytest.approx(float(per_slot), rel=1e-12)
        assert led.clamp_count == 0
