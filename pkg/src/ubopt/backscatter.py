"""Reflection-coefficient (eta) block.

The delivered-throughput objective is concave and increasing in every
eta_n, so the only nontrivial structure comes from the caching coupling:
bits reflected to the destination cannot exceed bits received on the uplink
plus the cached share.  Each inner iteration linearizes the delivered sum at
the current point (a tangent that over-estimates the concave sum), makes the
linearized coupling active and shifts all slots by the common step that
achieves it, clipped to the box.  Because the tangent over-estimates, one
step from an infeasible point restores feasibility; from a feasible point
the step is an ascent.
"""

from __future__ import annotations

import numpy as np

from .channel import Trajectory, backscatter_snr, rate_uplink
from .scenario import Scenario

INNER_TOL = 1e-8
MAX_INNER = 100


class DegenerateEtaBlockError(RuntimeError):
    """All tau_n are zero: the eta block has no objective to climb."""


class EtaDemandInfeasibleError(RuntimeError):
    """Demand cannot be met even at eta = eta_max for this (traj, tau)."""


def delivered_bits(eta, tau, traj: Trajectory, sc: Scenario) -> float:
    """sum_n B tau_n delta_t log2(1 + snr_1^n eta_n), bits."""
    snr1 = backscatter_snr(traj.slot_points, 1.0, sc)
    return float(np.sum(sc.B * np.asarray(tau) * sc.delta_t
                        * np.log2(1.0 + snr1 * np.asarray(eta))))


def received_bits_budget(tau, traj: Trajectory, sc: Scenario) -> float:
    """Caching cap: uplink bits plus cached share sigma * S."""
    r_u = rate_uplink(traj.slot_points, sc)
    return float(np.sum(np.asarray(tau) * sc.delta_t * r_u)) + sc.sigma * sc.S


def surrogate_rate_upper(eta, eta_ref, tau, traj: Trajectory, sc: Scenario) -> float:
    """Tangent expansion of delivered_bits at eta_ref; equals it at eta = eta_ref,
    over-estimates it elsewhere."""
    eta = np.asarray(eta, dtype=float)
    eta_ref = np.asarray(eta_ref, dtype=float)
    tau = np.asarray(tau, dtype=float)
    snr1 = backscatter_snr(traj.slot_points, 1.0, sc)
    base = sc.B * tau * sc.delta_t * np.log2(1.0 + snr1 * eta_ref)
    slope = sc.B * tau * sc.delta_t * snr1 / (np.log(2.0) * (1.0 + snr1 * eta_ref))
    return float(np.sum(base + slope * (eta - eta_ref)))


def solve_eta(traj: Trajectory, tau, sc: Scenario, eta_init,
              check_demand: bool = True) -> np.ndarray:
    """Fixed point of the tangent-step iteration from eta_init.

    Returns a per-slot eta in [0, eta_max] at which the caching coupling
    holds (active unless the box binds first).  Raises
    :class:`EtaDemandInfeasibleError` when the demand floor S is
    unreachable even at the box ceiling and ``check_demand`` is set.
    """
    tau = np.asarray(tau, dtype=float)
    eta = np.clip(np.asarray(eta_init, dtype=float).copy(), 0.0, sc.eta_max)
    if tau.shape != eta.shape or tau.shape != (traj.n_slots,):
        raise ValueError("tau/eta length must match the trajectory slot count")
    if not np.any(tau * sc.delta_t > 0.0):
        raise DegenerateEtaBlockError("all tau_n are zero")

    snr1 = backscatter_snr(traj.slot_points, 1.0, sc)
    budget = received_bits_budget(tau, traj, sc)
    weight = sc.B * tau * sc.delta_t
    for _ in range(MAX_INNER):
        delivered = float(np.sum(weight * np.log2(1.0 + snr1 * eta)))
        slope_total = float(np.sum(weight * snr1 / (np.log(2.0) * (1.0 + snr1 * eta))))
        if slope_total <= 0.0:
            raise DegenerateEtaBlockError("zero ascent slope; check tau and P_s")
        step = (budget - delivered) / slope_total
        new = np.clip(eta + step, 0.0, sc.eta_max)
        moved = float(np.max(np.abs(new - eta)))
        eta = new
        if moved < INNER_TOL:
            break

    if check_demand and delivered_bits(eta, tau, traj, sc) < sc.S * (1.0 - 1e-9):
        at_cap = delivered_bits(np.full_like(eta, sc.eta_max), tau, traj, sc)
        if at_cap < sc.S:
            raise EtaDemandInfeasibleError(
                f"demand {sc.S:.3e} bits unreachable: ceiling delivers {at_cap:.3e}")
    return eta
