"""Harvested-energy models and the cumulative energy-causality ledger.

Per slot n the relay spends tau_n * delta_t backscattering (circuit power
P_c) and harvests during the remaining (1 - tau_n) * delta_t.  Causality is
enforced cumulatively: at every slot, total energy spent so far must not
exceed total energy harvested so far, starting from an empty battery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Trajectory, path_gain_denominator
from .scenario import EhModel, Scenario

FEASIBILITY_TOL_J = 1e-12


def phi_const(sc: Scenario) -> float:
    """Harvester zero-input offset 1 / (1 + exp(beta * nu))."""
    return 1.0 / (1.0 + np.exp(sc.beta * sc.nu))


def received_power(q, sc: Scenario):
    """Mean RF power P_s * omega0 / (H^2 + |q - w_s|^2)^(alpha/2), watts."""
    return sc.P_s * sc.omega0 / path_gain_denominator(q, sc.ws, sc)


def harvest_linear(tau_n, q_n, sc: Scenario):
    """Energy harvested in one slot under the linear model, joules."""
    tau_n = np.asarray(tau_n, dtype=float)
    return sc.mu * (1.0 - tau_n) * sc.delta_t * received_power(q_n, sc)


def nonlinear_harvest_power(p_in, sc: Scenario):
    """Saturating harvested power for input power p_in, watts.

    (Xi / (1 - phi)) * (1 / (1 + exp(-beta*p_in + beta*nu)) - phi); the
    sigmoid equals phi at p_in = 0 and approaches 1 at saturation, so the
    output runs from 0 to Xi.  Clamped at zero defensively.
    """
    p_in = np.asarray(p_in, dtype=float)
    phi = phi_const(sc)
    sig = 1.0 / (1.0 + np.exp(-sc.beta * p_in + sc.beta * sc.nu))
    return np.maximum(sc.Xi / (1.0 - phi) * (sig - phi), 0.0)


def harvest_nonlinear(tau_n, q_n, sc: Scenario):
    """Energy harvested in one slot under the saturating model, joules."""
    tau_n = np.asarray(tau_n, dtype=float)
    return (1.0 - tau_n) * sc.delta_t * nonlinear_harvest_power(received_power(q_n, sc), sc)


def harvest(tau_n, q_n, sc: Scenario, model: EhModel | None = None):
    model = model or sc.eh_model
    if model is EhModel.LINEAR:
        return harvest_linear(tau_n, q_n, sc)
    return harvest_nonlinear(tau_n, q_n, sc)


def harvest_rate_per_slot(traj: Trajectory, sc: Scenario,
                          model: EhModel | None = None) -> np.ndarray:
    """Energy harvested per slot at tau = 0, i.e. delta_t * harvest power.

    The per-slot harvest is this vector times (1 - tau_n); having it as a
    constant makes the closed-form time-split and all energy constraints
    affine in tau.
    """
    return np.asarray(harvest(0.0, traj.slot_points, sc, model), dtype=float)


@dataclass(frozen=True)
class EnergyLedger:
    """Per-slot harvested/consumed energy and running battery slack."""

    harvested: np.ndarray
    consumed: np.ndarray
    cumulative_slack: np.ndarray
    clamp_count: int = 0

    @property
    def feasible(self) -> bool:
        return bool(np.min(self.cumulative_slack) >= -FEASIBILITY_TOL_J)

    @property
    def min_slack(self) -> float:
        return float(np.min(self.cumulative_slack))


def energy_causality(tau, traj: Trajectory, sc: Scenario,
                     model: EhModel | None = None) -> EnergyLedger:
    """Evaluate the cumulative harvest-vs-spend ledger for an allocation."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (traj.n_slots,):
        raise ValueError(f"tau has length {tau.size}, trajectory has {traj.n_slots} slots")
    model = model or sc.eh_model
    if model is EhModel.NONLINEAR:
        p_in = received_power(traj.slot_points, sc)
        phi = phi_const(sc)
        raw = sc.Xi / (1.0 - phi) * (
            1.0 / (1.0 + np.exp(-sc.beta * p_in + sc.beta * sc.nu)) - phi)
        clamps = int(np.sum(raw < 0.0))
        harvested = (1.0 - tau) * sc.delta_t * np.maximum(raw, 0.0)
    else:
        clamps = 0
        harvested = harvest_linear(tau, traj.slot_points, sc)
    consumed = tau * sc.delta_t * sc.P_c
    return EnergyLedger(harvested=np.asarray(harvested, float),
                        consumed=consumed,
                        cumulative_slack=np.cumsum(harvested - consumed),
                        clamp_count=clamps)
