"""Closed-form per-slot time-split (tau) block.

Two stationary candidates exist: a uniform value that makes the caching
constraint active, and a per-slot value that balances harvested against
spent energy in every slot.  The block evaluates both, filters by
feasibility and returns the one with the larger objective; repair of a
candidate that fails a coupling constraint belongs to the outer alternating
loop, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Trajectory, rate_vectors
from .energy import energy_causality, harvest_rate_per_slot
from .scenario import EhModel, Scenario

REL_TOL = 1e-9

CASE_CACHING = "caching-active"
CASE_ENERGY = "energy-active"


@dataclass(frozen=True)
class Allocation:
    """Per-slot decision variables: time split tau and reflection eta."""

    tau: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))

    def validate(self, sc: Scenario) -> None:
        if self.tau.shape != self.eta.shape:
            raise ValueError("tau and eta must have equal length")
        if np.any(self.tau < -REL_TOL) or np.any(self.tau > 1.0 + REL_TOL):
            raise ValueError("tau outside [0, 1]")
        if np.any(self.eta < -REL_TOL) or np.any(self.eta > sc.eta_max * (1 + REL_TOL)):
            raise ValueError("eta outside [0, eta_max]")


@dataclass(frozen=True)
class TauCandidate:
    tau: np.ndarray
    case: str
    admissible: bool
    note: str = ""


class InfeasibleAllocationError(RuntimeError):
    """No stationary candidate satisfies the subproblem constraints."""

    def __init__(self, message: str, failures: dict[str, list[str]]):
        super().__init__(message)
        self.failures = failures


def throughput_bits(tau, r_d, sc: Scenario) -> float:
    """Objective sum_n tau_n * delta_t * r_d_n, bits."""
    return float(np.sum(np.asarray(tau) * sc.delta_t * np.asarray(r_d)))


def constraint_failures(tau, traj: Trajectory, eta, sc: Scenario,
                        model: EhModel | None = None,
                        check_demand: bool = True,
                        check_caching: bool = True) -> list[str]:
    """Names of time-split subproblem constraints violated by tau."""
    tau = np.asarray(tau, dtype=float)
    rv = rate_vectors(traj, eta, sc)
    fails: list[str] = []
    scale = max(sc.S, sc.sigma * sc.S, float(np.sum(sc.delta_t * rv.r_d)), 1.0)
    delivered = throughput_bits(tau, rv.r_d, sc)
    received = throughput_bits(tau, rv.r_u, sc) + sc.sigma * sc.S
    if check_caching and delivered > received + REL_TOL * scale:
        fails.append("caching")
    if check_demand and delivered < sc.S - REL_TOL * scale:
        fails.append("demand")
    if not energy_causality(tau, traj, sc, model).feasible:
        fails.append("energy")
    if np.any(tau < -REL_TOL) or np.any(tau > 1.0 + REL_TOL):
        fails.append("box")
    return fails


def _caching_candidate_uniform(traj: Trajectory, eta, sc: Scenario) -> TauCandidate:
    rv = rate_vectors(traj, eta, sc)
    gap = rv.r_d - rv.r_u
    admissible = bool(np.all(gap > 0.0))
    denom = float(np.sum(sc.delta_t * gap))
    if denom > 0.0:
        value = sc.sigma * sc.S / denom
    else:
        value = np.inf if sc.sigma * sc.S > 0 else 0.0
    tau = np.full(traj.n_slots, float(np.clip(value, 0.0, 1.0)))
    note = "" if admissible else "requires r_d > r_u in every slot"
    return TauCandidate(tau=tau, case=CASE_CACHING, admissible=admissible, note=note)


def _energy_candidate(traj: Trajectory, sc: Scenario,
                      model: EhModel | None = None) -> TauCandidate:
    chi = harvest_rate_per_slot(traj, sc, model)  # joules available per slot at tau=0
    spend = sc.delta_t * sc.P_c
    tau = np.clip(chi / (chi + spend), 0.0, 1.0)
    return TauCandidate(tau=tau, case=CASE_ENERGY, admissible=True)


def tau_candidates(n: int, traj: Trajectory, eta, sc: Scenario,
                   model: EhModel | None = None) -> list[TauCandidate]:
    """Both stationary candidates restricted to slot index n (1-based slot,
    0-based into the allocation vectors); diagnostic for tests."""
    rv = rate_vectors(traj, eta, sc)
    gap = float(rv.r_d[n] - rv.r_u[n])
    cache_load = sc.sigma * sc.S
    if gap != 0.0:
        raw = cache_load / (sc.N * sc.delta_t * gap)
    else:
        raw = np.inf if cache_load > 0.0 else 0.0
    caching = TauCandidate(np.array([float(np.clip(raw, 0.0, 1.0))]), CASE_CACHING,
                           admissible=gap > 0.0,
                           note="" if gap > 0.0 else "requires r_d > r_u")
    chi = float(harvest_rate_per_slot(traj, sc, model)[n])
    energy = TauCandidate(np.array([chi / (chi + sc.delta_t * sc.P_c)]),
                          CASE_ENERGY, True)
    return [caching, energy]


def candidate_allocations(traj: Trajectory, eta, sc: Scenario,
                          model: EhModel | None = None) -> list[TauCandidate]:
    """Full per-slot vectors of both stationary candidates (energy first)."""
    return [_energy_candidate(traj, sc, model),
            _caching_candidate_uniform(traj, eta, sc)]


def solve_tau(traj: Trajectory, eta, sc: Scenario,
              model: EhModel | None = None,
              check_demand: bool = True,
              check_caching: bool = True) -> np.ndarray:
    """Best feasible stationary time split for fixed trajectory and eta.

    Ties break toward the energy-balancing candidate, which is interior by
    construction.  ``check_demand`` / ``check_caching`` let the outer loop
    drop a coupling constraint it has decided to restore elsewhere.
    """
    rv = rate_vectors(traj, eta, sc)
    # energy-balancing candidate first so exact objective ties keep it
    cands = candidate_allocations(traj, eta, sc, model)
    failures: dict[str, list[str]] = {}
    best = None
    best_obj = -np.inf
    for cand in cands:
        if not cand.admissible:
            failures[cand.case] = ["inadmissible: " + cand.note]
            continue
        fails = constraint_failures(cand.tau, traj, eta, sc, model,
                                    check_demand=check_demand,
                                    check_caching=check_caching)
        if fails:
            failures[cand.case] = fails
            continue
        obj = throughput_bits(cand.tau, rv.r_d, sc)
        if best is None or obj > best_obj + REL_TOL * max(best_obj, 1.0):
            best, best_obj = cand, obj
    if best is None:
        raise InfeasibleAllocationError(
            "no time-split candidate satisfies the constraints "
            f"(violations per candidate: {failures})", failures)
    return best.tau.copy()
