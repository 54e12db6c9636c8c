"""Link geometry and per-slot rate models.

All optimizers consume the deterministic closed forms below
(:func:`rate_uplink`, :func:`rate_backscatter`).  The Monte-Carlo estimator
:func:`mc_ergodic_rates` exists only to validate those forms against the
underlying fading model; nothing in the solve path calls it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

# Euler-Mascheroni constant; enters the destination-rate constant Theta
# through the expected log of an exponentially distributed channel power.
EULER_GAMMA = float(np.euler_gamma)


class TrajectoryError(ValueError):
    """A waypoint sequence violates endpoint or speed structure."""


@dataclass(frozen=True)
class Trajectory:
    """Waypoints q_0..q_N of the relay, shape (N+1, 2), meters.

    Slot n in 1..N is flown at waypoint ``points[n]``; ``points[0]`` is the
    launch point only.  Endpoints are pinned to the scenario's q_I/q_F and
    consecutive waypoints respect the per-slot travel limit V_max * delta_t.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise TrajectoryError("points must be an (N+1, 2) array with N >= 1")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n_slots(self) -> int:
        return self.points.shape[0] - 1

    @property
    def slot_points(self) -> np.ndarray:
        """Positions attached to slots 1..N, shape (N, 2)."""
        return self.points[1:]

    def step_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def validate(self, sc: Scenario, tol: float = 1e-9) -> None:
        if self.n_slots != sc.N:
            raise TrajectoryError(f"expected {sc.N} slots, got {self.n_slots}")
        if not np.allclose(self.points[0], sc.q_I, atol=1e-9):
            raise TrajectoryError("first waypoint must equal q_I")
        if not np.allclose(self.points[-1], sc.q_F, atol=1e-9):
            raise TrajectoryError("last waypoint must equal q_F")
        step_max = sc.V_max * sc.delta_t
        steps = self.step_lengths()
        if np.any(steps > step_max * (1.0 + tol) + tol):
            n = int(np.argmax(steps))
            raise TrajectoryError(
                f"step {n} length {steps[n]:.6f} m exceeds V_max*delta_t = {step_max:.6f} m")


@dataclass(frozen=True)
class RateVectors:
    """Per-slot achievable rates, bits/s: uplink r_u and backscatter r_d."""

    r_u: np.ndarray
    r_d: np.ndarray


def distance_sq(q, w, H: float):
    """Squared slant range H^2 + |q - w|^2 between the relay and a node."""
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    return H * H + np.sum((q - w) ** 2, axis=-1)


def path_gain_denominator(q, w, sc: Scenario):
    """(H^2 + |q - w|^2)^(alpha/2), the path-loss term of the link budget."""
    return distance_sq(q, w, sc.H) ** (sc.alpha / 2.0)


def uplink_snr(q, sc: Scenario):
    """Mean uplink SNR omega0*P_s / (path_loss * sigma_u2)."""
    return sc.omega0 * sc.P_s / (path_gain_denominator(q, sc.ws, sc) * sc.sigma_u2)


def rate_uplink(q, sc: Scenario):
    """Ergodic-mean uplink rate at waypoint(s) q, bits/s."""
    return sc.B * np.log2(1.0 + uplink_snr(q, sc))


def theta_const(sc: Scenario) -> float:
    """Destination-rate constant exp(-EulerGamma) * omega0^2 / sigma_d2."""
    return np.exp(-EULER_GAMMA) * sc.omega0 ** 2 / sc.sigma_d2


def backscatter_snr(q, eta, sc: Scenario):
    """Effective destination SNR for reflection coefficient eta at q."""
    den = (path_gain_denominator(q, sc.ws, sc)
           * path_gain_denominator(q, sc.wd, sc))
    return theta_const(sc) * np.asarray(eta, dtype=float) * sc.P_s / den


def rate_backscatter(q, eta, sc: Scenario):
    """Approximate ergodic backscatter rate at q, bits/s; zero at eta = 0."""
    return sc.B * np.log2(1.0 + backscatter_snr(q, eta, sc))


def rate_vectors(traj: Trajectory, eta, sc: Scenario) -> RateVectors:
    """Per-slot rates along a trajectory for a per-slot eta vector."""
    pts = traj.slot_points
    return RateVectors(r_u=rate_uplink(pts, sc),
                       r_d=rate_backscatter(pts, np.asarray(eta, float), sc))


def _rician_power(rng: np.random.Generator, K: float, shape) -> np.ndarray:
    """Draws of |h|^2 for a unit-mean Rician fade with factor K."""
    if np.isinf(K):
        return np.ones(shape)
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    h = np.sqrt(K / (1.0 + K)) + np.sqrt(1.0 / (1.0 + K)) * nlos
    return np.abs(h) ** 2


def mc_ergodic_rates(q, eta: float, sc: Scenario, K: float = 10.0,
                     draws: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo ergodic rates (uplink, destination) in bits/s.

    Uplink: Rician small-scale fading with factor K on the s->u link.
    Destination: the s->u power is exponential (Rayleigh), matching the
    averaging that produces the closed-form destination rate, while the u->d
    power is Rician with the same K.  Deterministic for a fixed seed.

    The closed form is an approximation of this expectation, neither an
    upper nor a lower bound, so callers should record the gap rather than
    assert its sign.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    rng = np.random.default_rng(seed)
    psi_su = sc.omega0 / path_gain_denominator(q, sc.ws, sc)
    psi_ud = sc.omega0 / path_gain_denominator(q, sc.wd, sc)

    gain_su = _rician_power(rng, K, draws)
    snr_u = sc.P_s * psi_su * gain_su / sc.sigma_u2
    r_u = sc.B * float(np.mean(np.log2(1.0 + snr_u)))

    pow_su = psi_su * rng.exponential(1.0, draws)
    pow_ud = psi_ud * _rician_power(rng, K, draws)
    snr_d = eta * sc.P_s * pow_su * pow_ud / sc.sigma_d2
    r_d = sc.B * float(np.mean(np.log2(1.0 + snr_d)))
    return r_u, r_d
