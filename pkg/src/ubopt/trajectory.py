"""Waypoint (trajectory) block: slack reformulation plus tangent bounds.

The path-loss terms (H^2 + |q_n - w|^2)^(alpha/2) are replaced by per-slot
slack variables z1 (source link) and z2 (destination link), upper bounds
that the objective drives to tightness.  Around a reference point the
delivered and received log-rates get affine tangent lower bounds (theta2,
theta1), the reciprocal 1/z1 in the linear-harvest term gets its tangent
lower bound, and the saturating harvester's sigmoid is kept exact where it
is concave in z1 and replaced by its tangent where it is convex.  The
resulting program is convex; solving it repeatedly from refreshed reference
points is a standard inner-approximation ascent: every surrogate is a
global bound that is tight at the reference, so the true objective cannot
decrease.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import convex
from .channel import Trajectory, distance_sq, rate_backscatter, rate_uplink, theta_const
from .dts import throughput_bits
from .energy import energy_causality, phi_const
from .scenario import EhModel, Scenario

LN2 = np.log(2.0)

SCA_MAX_ITERS = 30
SCA_REL_TOL = 1e-6
ORIG_CHECK_REL_TOL = 1e-6
MARGIN_REL = 2e-7


@dataclass(frozen=True)
class SlackState:
    """Per-slot path-loss slacks z1 (source link) and z2 (destination)."""

    z1: np.ndarray
    z2: np.ndarray


def init_slack(traj: Trajectory, sc: Scenario) -> SlackState:
    """Tight slacks: z = (H^2 + |q_n - w|^2)^(alpha/2) per slot."""
    p = sc.alpha / 2.0
    pts = traj.slot_points
    return SlackState(z1=distance_sq(pts, sc.ws, sc.H) ** p,
                      z2=distance_sq(pts, sc.wd, sc.H) ** p)


def theta1(z1, z1_ref, sc: Scenario):
    """Tangent lower bound of log2(1 + A1/z1) at z1_ref, A1 = omega0*P_s/sigma_u2."""
    a1 = sc.omega0 * sc.P_s / sc.sigma_u2
    z1 = np.asarray(z1, dtype=float)
    z1_ref = np.asarray(z1_ref, dtype=float)
    return (np.log2(1.0 + a1 / z1_ref)
            - a1 * (z1 - z1_ref) / (LN2 * z1_ref * (z1_ref + a1)))


def theta2(z1, z2, z1_ref, z2_ref, eta_n, sc: Scenario):
    """Bivariate tangent lower bound of log2(1 + A2/(z1*z2)) at the reference,
    A2 = Theta * eta_n * P_s."""
    a2 = theta_const(sc) * np.asarray(eta_n, dtype=float) * sc.P_s
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    z1_ref = np.asarray(z1_ref, dtype=float)
    z2_ref = np.asarray(z2_ref, dtype=float)
    den = z1_ref * z2_ref + a2
    return (np.log2(1.0 + a2 / (z1_ref * z2_ref))
            - a2 * (z1 - z1_ref) / (LN2 * z1_ref * den)
            - a2 * (z2 - z2_ref) / (LN2 * z2_ref * den))


def z1_inverse_lb(z1, z1_ref):
    """Tangent lower bound of 1/z1 at z1_ref: 2/z1_ref - z1/z1_ref^2."""
    z1 = np.asarray(z1, dtype=float)
    z1_ref = np.asarray(z1_ref, dtype=float)
    return 1.0 / z1_ref - (z1 - z1_ref) / z1_ref ** 2


def sigmoid_coeffs(z1_ref, sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """(theta3, theta4) such that the harvested-power sigmoid argument,
    after linearizing 1/z1, is theta3 * z1 + theta4."""
    z1_ref = np.asarray(z1_ref, dtype=float)
    c = sc.beta * sc.P_s * sc.omega0
    return c / z1_ref ** 2, -2.0 * c / z1_ref + sc.beta * sc.nu


def f1_value(z1, theta3, theta4):
    """F1(z1) = 1 / (1 + exp(theta3*z1 + theta4)): harvest sigmoid in z1."""
    x = np.clip(np.asarray(theta3) * np.asarray(z1, dtype=float) + np.asarray(theta4),
                -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(x))


def f1_tangent(z1, z1_ref, theta3, theta4):
    """Tangent of F1 at z1_ref; a global lower bound where F1 is convex."""
    x = np.clip(np.asarray(theta3) * np.asarray(z1_ref, dtype=float) + np.asarray(theta4),
                -500.0, 500.0)
    e = np.exp(x)
    f = 1.0 / (1.0 + e)
    slope = -np.asarray(theta3) * e / (1.0 + e) ** 2
    return f + slope * (np.asarray(z1, dtype=float) - np.asarray(z1_ref, dtype=float))


def nleh_sigmoid_constraint(z1, z1_ref, tau_n, sc: Scenario):
    """Per-slot harvested energy surrogate for the saturating model, joules.

    Uses the exact sigmoid when the reference sits on its concave side
    (z1_ref < -theta4/theta3) and the tangent under-estimator otherwise.
    """
    theta3, theta4 = sigmoid_coeffs(z1_ref, sc)
    boundary = -theta4 / theta3
    exact = np.asarray(z1_ref, dtype=float) < boundary
    f = np.where(exact, f1_value(z1, theta3, theta4),
                 f1_tangent(z1, z1_ref, theta3, theta4))
    phi = phi_const(sc)
    return ((1.0 - np.asarray(tau_n, dtype=float)) * sc.delta_t
            * sc.Xi / (1.0 - phi) * (f - phi))


# ---------------------------------------------------------------------------
# vectorized constraint blocks for the barrier solver


class _SlackBlock(convex.ConstraintBlock):
    """Rows H^2 + |q_n - w|^2 - z_n^(2/alpha) <= 0 for slots 1..N."""

    def __init__(self, w: np.ndarray, z_off: int, nq: int, N: int,
                 H: float, alpha: float, q_fixed_last: np.ndarray, name: str):
        self.w = w
        self.z_off = z_off          # column of z for slot 1
        self.nq = nq                # number of free waypoints (N - 1)
        self.N = N
        self.H2 = H * H
        self.p = 2.0 / alpha
        self.q_fixed_last = q_fixed_last
        self.count = N
        self.name = name

    def _dsq(self, x):
        q = x[:2 * self.nq].reshape(self.nq, 2)
        d = np.empty(self.N)
        d[:self.nq] = self.H2 + np.sum((q - self.w) ** 2, axis=1)
        d[self.nq:] = self.H2 + np.sum((self.q_fixed_last - self.w) ** 2)
        return d

    def _z(self, x):
        return x[self.z_off:self.z_off + self.N]

    def values(self, x):
        return self._dsq(x) - self._z(x) ** self.p

    def grads(self, x):
        G = np.zeros((self.N, x.size))
        q = x[:2 * self.nq].reshape(self.nq, 2)
        rows = np.arange(self.nq)
        G[rows, 2 * rows] = 2.0 * (q[:, 0] - self.w[0])
        G[rows, 2 * rows + 1] = 2.0 * (q[:, 1] - self.w[1])
        z = self._z(x)
        G[np.arange(self.N), self.z_off + np.arange(self.N)] = -self.p * z ** (self.p - 1.0)
        return G

    def hess_weighted(self, x, w):
        rows, cols, vals = [], [], []
        qi = np.arange(2 * self.nq)
        rows.append(qi)
        cols.append(qi)
        vals.append(2.0 * np.repeat(w[:self.nq], 2))
        if self.p < 1.0:
            z = self._z(x)
            zi = self.z_off + np.arange(self.N)
            rows.append(zi)
            cols.append(zi)
            vals.append(w * self.p * (1.0 - self.p) * z ** (self.p - 2.0))
        return (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


class _MobilityBlock(convex.ConstraintBlock):
    """Rows |q_{j+1} - q_j|^2 - (V_max*delta_t)^2 <= 0 over all N edges."""

    def __init__(self, q_I: np.ndarray, q_F: np.ndarray, nq: int, step_max: float):
        self.q_I = q_I
        self.q_F = q_F
        self.nq = nq
        self.lim2 = step_max * step_max
        self.count = nq + 1
        self.name = "mobility"

    def _chain(self, x):
        q = x[:2 * self.nq].reshape(self.nq, 2)
        return np.vstack([self.q_I, q, self.q_F])

    def values(self, x):
        d = np.diff(self._chain(x), axis=0)
        return np.sum(d * d, axis=1) - self.lim2

    def grads(self, x):
        chain = self._chain(x)
        d = np.diff(chain, axis=0)
        G = np.zeros((self.count, x.size))
        for j in range(self.count):
            if 1 <= j + 1 <= self.nq:       # head q_{j+1} free
                k = j
                G[j, 2 * k:2 * k + 2] += 2.0 * d[j]
            if 1 <= j <= self.nq:           # tail q_j free
                k = j - 1
                G[j, 2 * k:2 * k + 2] -= 2.0 * d[j]
        return G

    def hess_weighted(self, x, w):
        rows, cols, vals = [], [], []
        for j in range(self.count):
            head = j if 1 <= j + 1 <= self.nq else None
            tail = j - 1 if 1 <= j <= self.nq else None
            for axis in range(2):
                if head is not None:
                    rows.append(2 * head + axis)
                    cols.append(2 * head + axis)
                    vals.append(2.0 * w[j])
                if tail is not None:
                    rows.append(2 * tail + axis)
                    cols.append(2 * tail + axis)
                    vals.append(2.0 * w[j])
                if head is not None and tail is not None:
                    rows.extend([2 * head + axis, 2 * tail + axis])
                    cols.extend([2 * tail + axis, 2 * head + axis])
                    vals.extend([-2.0 * w[j], -2.0 * w[j]])
        return (np.asarray(rows, int), np.asarray(cols, int), np.asarray(vals, float))


class _AffineBlock(convex.ConstraintBlock):
    """Rows A x + b <= 0."""

    def __init__(self, A: np.ndarray, b: np.ndarray, name: str):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self.count = self.A.shape[0]
        self.name = name

    def values(self, x):
        return self.A @ x + self.b

    def grads(self, x):
        return self.A


class _NlehEnergyBlock(convex.ConstraintBlock):
    """Cumulative spend-minus-harvest rows with exact sigmoid slots.

    Row n: affine part (spend, tangent-branch harvests, offsets) plus
    sum over exact-branch slots i <= n of  -c_i * F1(z1_i).
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, exact_slots: np.ndarray,
                 c: np.ndarray, theta3: np.ndarray, theta4: np.ndarray,
                 z_off: int, N: int):
        self.A = A
        self.b = b
        self.exact = exact_slots        # indices (0-based slot) using exact F1
        self.c = c                      # per exact slot energy scale, joules
        self.t3 = theta3
        self.t4 = theta4
        self.z_off = z_off
        self.N = N
        self.count = N
        self.name = "energy"

    def _fe(self, x):
        z = x[self.z_off + self.exact]
        xarg = np.clip(self.t3 * z + self.t4, -500.0, 500.0)
        e = np.exp(xarg)
        f = 1.0 / (1.0 + e)
        fp = -self.t3 * e / (1.0 + e) ** 2
        fpp = -self.t3 ** 2 * e * (1.0 - e) / (1.0 + e) ** 3
        return f, fp, fpp

    def values(self, x):
        vals = self.A @ x + self.b
        if self.exact.size:
            f, _, _ = self._fe(x)
            contrib = np.zeros(self.N)
            contrib[self.exact] = -self.c * f
            vals += np.cumsum(contrib)
        return vals

    def grads(self, x):
        G = np.array(self.A, copy=True)
        if self.exact.size:
            _, fp, _ = self._fe(x)
            for k, i in enumerate(self.exact):
                G[i:, self.z_off + i] += -self.c[k] * fp[k]
        return G

    def hess_weighted(self, x, w):
        if not self.exact.size:
            return None
        _, _, fpp = self._fe(x)
        wtail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
        idx = self.z_off + self.exact
        vals = np.array([-self.c[k] * fpp[k] * wtail[i]
                         for k, i in enumerate(self.exact)])
        return (idx, idx, vals)


# ---------------------------------------------------------------------------
# subproblem assembly


@dataclass
class _SubproblemMeta:
    nq: int
    N: int
    z1_off: int
    z2_off: int
    margins: dict = dc_field(default_factory=dict)


def build_subproblem(traj_ref: Trajectory, tau, eta, sc: Scenario,
                     model: EhModel | None = None,
                     enforce_demand: bool = True,
                     enforce_caching: bool = True,
                     restore_energy: bool = False,
                     objective_mode: str = "delivered"):
    """Assemble the convexified waypoint program around traj_ref.

    Returns (program, x0, meta).  x0 is made strictly feasible by a small
    upward slack bump and, where a coupling row is active at the reference,
    a bounded per-row margin recorded in meta; callers re-verify the
    original constraints on the returned trajectory.

    ``objective_mode='budget'`` maximizes the received-bits tangent sum
    instead of the delivered one: on the active caching manifold the
    delivered bits equal the received budget plus the cached share, so the
    budget is the quantity a waypoint move can actually raise there (the
    reflection block re-lifts the delivered side afterwards).

    With ``restore_energy`` the throughput objective is replaced by the
    total surrogate battery slack and the energy rows accept the reference's
    own violation as their starting margin: used to pull a trajectory whose
    pinned time split overdraws the battery back into the feasible region.
    """
    model = model or sc.eh_model
    if restore_energy:
        enforce_demand = enforce_caching = False
    tau = np.asarray(tau, dtype=float)
    eta = np.asarray(eta, dtype=float)
    N = traj_ref.n_slots
    nq = N - 1
    z1_off = 2 * nq
    z2_off = 2 * nq + N
    dim = 2 * nq + 2 * N
    meta = _SubproblemMeta(nq=nq, N=N, z1_off=z1_off, z2_off=z2_off)

    slk = init_slack(traj_ref, sc)
    z1r, z2r = slk.z1, slk.z2
    w = sc.B * tau * sc.delta_t                     # per-slot bit weights
    a1 = sc.omega0 * sc.P_s / sc.sigma_u2
    a2 = theta_const(sc) * eta * sc.P_s

    # tangent coefficients of the two log terms
    den2 = z1r * z2r + a2
    c2_ref = np.log2(1.0 + a2 / (z1r * z2r))
    s2_z1 = a2 / (LN2 * z1r * den2)                # positive slopes (enter with -)
    s2_z2 = a2 / (LN2 * z2r * den2)
    c1_ref = np.log2(1.0 + a1 / z1r)
    s1_z1 = a1 / (LN2 * z1r * (z1r + a1))

    # delivered-bits tangent sum, affine in (z1, z2); also the default objective
    del_coeff = np.zeros(dim)
    del_coeff[z1_off:z1_off + N] = -w * s2_z1
    del_coeff[z2_off:z2_off + N] = -w * s2_z2
    del_const = float(np.sum(w * (c2_ref + s2_z1 * z1r + s2_z2 * z2r)))
    if objective_mode == "budget":
        obj_coeff = np.zeros(dim)
        obj_coeff[z1_off:z1_off + N] = -w * s1_z1
        obj_const = float(np.sum(w * (c1_ref + s1_z1 * z1r)))
    else:
        obj_coeff, obj_const = del_coeff, del_const

    def obj_value(x):
        return obj_const + float(obj_coeff @ x)

    def obj_grad(x):
        return obj_coeff

    blocks: list[convex.ConstraintBlock] = [
        _SlackBlock(sc.ws, z1_off, nq, N, sc.H, sc.alpha,
                    np.asarray(sc.q_F, float), "slack_s"),
        _SlackBlock(sc.wd, z2_off, nq, N, sc.H, sc.alpha,
                    np.asarray(sc.q_F, float), "slack_d"),
        _MobilityBlock(np.asarray(sc.q_I, float), np.asarray(sc.q_F, float),
                       nq, sc.V_max * sc.delta_t),
    ]

    scalar_rows_A: list[np.ndarray] = []
    scalar_rows_b: list[float] = []
    scalar_names: list[str] = []
    if enforce_caching:
        row = np.zeros(dim)
        row[z1_off:z1_off + N] = w * (s1_z1 - s2_z1)
        row[z2_off:z2_off + N] = -w * s2_z2
        const = float(np.sum(w * ((c2_ref + s2_z1 * z1r + s2_z2 * z2r)
                                  - (c1_ref + s1_z1 * z1r)))) - sc.sigma * sc.S
        scalar_rows_A.append(row)
        scalar_rows_b.append(const)
        scalar_names.append("caching")
    if enforce_demand:
        scalar_rows_A.append(-del_coeff)
        scalar_rows_b.append(sc.S - del_const)
        scalar_names.append("demand")

    # cumulative energy rows: spend_cum - harvest_cum <= 0
    spend = tau * sc.delta_t * sc.P_c
    A_e = np.zeros((N, dim))
    b_e = np.zeros(N)
    lower = np.tril(np.ones((N, N)))
    if model is EhModel.LINEAR:
        k = sc.mu * (1.0 - tau) * sc.delta_t * sc.omega0 * sc.P_s
        A_e[:, z1_off:z1_off + N] = lower * (k / z1r ** 2)
        b_e = np.cumsum(spend - 2.0 * k / z1r)
        energy_block: convex.ConstraintBlock = _AffineBlock(A_e, b_e, "energy")
    else:
        phi = phi_const(sc)
        c_all = (1.0 - tau) * sc.delta_t * sc.Xi / (1.0 - phi)
        t3, t4 = sigmoid_coeffs(z1r, sc)
        boundary = -t4 / t3
        exact_mask = z1r < boundary
        # per-slot contribution: spend + c*phi - c*F_branch(z1)
        per_slot_const = spend + c_all * phi
        fref = f1_value(z1r, t3, t4)
        e = np.exp(np.clip(t3 * z1r + t4, -500.0, 500.0))
        slope = -t3 * e / (1.0 + e) ** 2
        for i in range(N):
            if not exact_mask[i]:
                # tangent branch: -c*(fref + slope*(z - z1r)) is affine in z
                A_e[i:, z1_off + i] += -c_all[i] * slope[i]
                per_slot_const[i] -= c_all[i] * (fref[i] - slope[i] * z1r[i])
        b_e = np.cumsum(per_slot_const)
        exact_slots = np.where(exact_mask)[0]
        energy_block = _NlehEnergyBlock(A_e, b_e, exact_slots,
                                        c_all[exact_slots], t3[exact_slots],
                                        t4[exact_slots], z1_off, N)
        # keep exact-branch slots inside their concave region
        if exact_slots.size:
            A_r = np.zeros((exact_slots.size, dim))
            A_r[np.arange(exact_slots.size), z1_off + exact_slots] = 1.0
            scalar_rows_A.extend(A_r)
            scalar_rows_b.extend((-boundary[exact_slots]).tolist())
            scalar_names.extend(["sigmoid_region"] * exact_slots.size)
    blocks.append(energy_block)

    # ---- start point: reference waypoints, bumped slacks
    x0 = np.zeros(dim)
    x0[:2 * nq] = traj_ref.points[1:N].reshape(-1)
    x0[z1_off:z1_off + N] = z1r * (1.0 + 1e-6)
    x0[z2_off:z2_off + N] = z2r * (1.0 + 1e-6)

    # mobility strictness: blend toward the straight chord when an edge rides
    # the speed limit at the reference
    mob = blocks[2]
    if np.max(mob.values(x0)) >= -1e-12 * max(1.0, mob.lim2):
        chord = np.linspace(sc.q_I, sc.q_F, N + 1)[1:N].reshape(-1)
        for blend in (1e-6, 1e-4, 1e-2, 0.1, 0.3, 0.6):
            x_try = x0.copy()
            x_try[:2 * nq] = (1.0 - blend) * x0[:2 * nq] + blend * chord
            if np.max(mob.values(x_try)) < -1e-10 * max(1.0, mob.lim2):
                x0 = x_try
                # re-tighten slacks to the blended waypoints
                pts = np.vstack([sc.q_I, x0[:2 * nq].reshape(nq, 2), sc.q_F])
                p = sc.alpha / 2.0
                x0[z1_off:z1_off + N] = (distance_sq(pts[1:], sc.ws, sc.H) ** p) * (1 + 1e-6)
                x0[z2_off:z2_off + N] = (distance_sq(pts[1:], sc.wd, sc.H) ** p) * (1 + 1e-6)
                meta.margins["mobility_blend"] = blend
                break
        else:
            raise convex.InfeasibleStartError("no strictly feasible waypoint start")

    # bounded margins on coupling rows that are active at the start point:
    # the post-solve check re-verifies the original constraints at a tighter
    # tolerance than these margins can introduce
    energy_scale = np.maximum(np.cumsum(spend) + np.abs(b_e), 1e-30)
    e_vals = energy_block.values(x0)
    if not restore_energy and np.any(e_vals > 1e-6 * energy_scale):
        raise convex.InfeasibleStartError("energy rows violated beyond margin policy")
    e_margin = np.maximum(e_vals, 0.0) * (1.0 + 1e-3) + MARGIN_REL * energy_scale
    energy_block.b = energy_block.b - e_margin
    meta.margins["energy"] = float(np.max(e_margin / energy_scale))

    if restore_energy:
        # maximize total surrogate battery slack: minimize sum of energy rows
        e_rows_A = np.array(energy_block.A, copy=True)
        e_rows_b = np.array(energy_block.b, copy=True)
        restore_coeff = -np.sum(e_rows_A, axis=0) / float(np.sum(energy_scale))

        if isinstance(energy_block, _NlehEnergyBlock):
            nl_block = energy_block

            def obj_value(x):  # noqa: F811  (restoration objective)
                return -float(np.sum(nl_block.values(x))) / float(np.sum(energy_scale))

            def obj_grad(x):  # noqa: F811
                return -np.sum(nl_block.grads(x), axis=0) / float(np.sum(energy_scale))
        else:
            base = -float(np.sum(e_rows_b)) / float(np.sum(energy_scale))

            def obj_value(x):  # noqa: F811
                return base + float(restore_coeff @ x)

            def obj_grad(x):  # noqa: F811
                return restore_coeff

    rate_scale = max(sc.S, sc.sigma * sc.S, abs(obj_const + float(obj_coeff @ x0)), 1.0)
    for i, name in enumerate(scalar_names):
        if name not in ("caching", "demand"):
            continue
        val = float(scalar_rows_A[i] @ x0 + scalar_rows_b[i])
        if val > 1e-6 * rate_scale:
            raise convex.InfeasibleStartError(
                f"{name} row violated beyond margin policy at the reference")
        margin = max(val, 0.0) * (1.0 + 1e-3) + MARGIN_REL * rate_scale
        scalar_rows_b[i] -= margin
        meta.margins[name] = margin / rate_scale

    if scalar_rows_A:
        blocks.append(_AffineBlock(np.vstack(scalar_rows_A),
                                   np.asarray(scalar_rows_b), "scalar_rows"))

    prog = convex.ConvexProgram(
        variable_count=dim,
        objective_value=obj_value,
        objective_grad=obj_grad,
        constraint_blocks=blocks,
    )
    return prog, x0, meta


# ---------------------------------------------------------------------------
# SCA driver for the block


def _true_objective(traj: Trajectory, tau, eta, sc: Scenario) -> float:
    r_d = rate_backscatter(traj.slot_points, eta, sc)
    return throughput_bits(tau, r_d, sc)


def original_constraint_report(traj: Trajectory, tau, eta, sc: Scenario,
                               model: EhModel | None = None) -> dict[str, float]:
    """Signed relative residuals of the original (non-surrogate) constraints;
    <= 0 means satisfied."""
    tau = np.asarray(tau, float)
    eta = np.asarray(eta, float)
    r_d = rate_backscatter(traj.slot_points, eta, sc)
    r_u = rate_uplink(traj.slot_points, sc)
    delivered = throughput_bits(tau, r_d, sc)
    received = throughput_bits(tau, r_u, sc) + sc.sigma * sc.S
    scale = max(delivered, received, sc.S, 1.0)
    led = energy_causality(tau, traj, sc, model)
    e_scale = max(float(np.sum(led.consumed)), float(np.sum(led.harvested)), 1e-30)
    steps = traj.step_lengths()
    lim = sc.V_max * sc.delta_t
    return {
        "caching": (delivered - received) / scale,
        "demand": (sc.S - delivered) / scale,
        "energy": -led.min_slack / e_scale if led.min_slack < 0 else 0.0,
        "mobility": float(np.max(steps) - lim) / max(lim, 1e-30),
    }


def _project_eta(traj: Trajectory, tau, eta_ref, sc: Scenario) -> np.ndarray:
    """Re-project eta onto the caching coupling for a candidate trajectory.

    Any waypoint move changes both sides of the caching cap, and the
    reflection coefficient is the variable that restores it exactly; a step
    of this block is therefore evaluated together with its projection.
    """
    from .backscatter import DegenerateEtaBlockError, solve_eta
    try:
        return solve_eta(traj, tau, sc, eta_init=eta_ref, check_demand=False)
    except DegenerateEtaBlockError:
        return np.asarray(eta_ref, dtype=float)


def solve_trajectory_with_info(traj_ref: Trajectory, tau, eta, sc: Scenario,
                               model: EhModel | None = None,
                               enforce_demand: bool = True,
                               enforce_caching: bool = True,
                               reproject_eta: bool = True,
                               max_iters: int = SCA_MAX_ITERS,
                               rel_tol: float = SCA_REL_TOL,
                               barrier_tol: float = 1e-8):
    """Inner-approximation ascent on the waypoint block.

    Returns (trajectory, eta, info).  With ``reproject_eta`` every candidate
    step is evaluated jointly with its reflection re-projection (see
    :func:`_project_eta`); the accepted iterate satisfies the original
    constraints to ORIG_CHECK_REL_TOL and does not lose objective.  When the
    reference itself overdraws the battery (pinned time splits can), the
    loop first runs restoration iterations that maximize battery slack until
    the ledger clears, then resumes the throughput ascent.
    """
    model = model or sc.eh_model
    tau = np.asarray(tau, dtype=float)
    eta_cur = np.asarray(eta, dtype=float).copy()
    info = {"iterations": 0, "subproblem_failures": 0, "objective_trace": [],
            "backtracks": 0, "restoration_iters": 0, "status": "ok"}
    current = traj_ref
    obj_cur = _true_objective(current, tau, eta_cur, sc)
    info["objective_trace"].append(obj_cur)

    if sc.V_max <= 0.0 or traj_ref.n_slots < 2:
        info["status"] = "frozen"
        return current, eta_cur, info

    nq = traj_ref.n_slots - 1
    for it in range(max_iters):
        info["iterations"] = it + 1
        rep_ref = original_constraint_report(current, tau, eta_cur, sc, model)
        restoring = rep_ref["energy"] > ORIG_CHECK_REL_TOL
        # on the active caching manifold the delivered side is pinned to the
        # received budget, so budget is what a waypoint move can raise
        caching_active = (enforce_caching and reproject_eta
                          and rep_ref["caching"] > -1e-7
                          and float(np.max(eta_cur)) < sc.eta_max * (1 - 1e-9))
        mode = "budget" if caching_active else "delivered"
        try:
            prog, x0, meta = build_subproblem(current, tau, eta_cur, sc, model,
                                              enforce_demand, enforce_caching,
                                              restore_energy=restoring,
                                              objective_mode=mode)
            res = convex.solve_convex(prog, x0, tol=barrier_tol)
        except convex.InfeasibleStartError:
            info["subproblem_failures"] += 1
            info["status"] = "subproblem-infeasible"
            break
        q_new = res.x[:2 * nq].reshape(nq, 2)

        accepted = None
        for gamma in (1.0, 0.6, 0.35, 0.15, 0.05):
            pts = current.points.copy()
            pts[1:-1] = (1.0 - gamma) * current.points[1:-1] + gamma * q_new
            cand = Trajectory(pts)
            eta_c = (_project_eta(cand, tau, eta_cur, sc)
                     if reproject_eta else eta_cur)
            rep = original_constraint_report(cand, tau, eta_c, sc, model)
            obj_new = _true_objective(cand, tau, eta_c, sc)
            if restoring:
                # feasibility first: battery violation must shrink markedly
                if (rep["mobility"] <= ORIG_CHECK_REL_TOL
                        and rep["energy"] < 0.8 * rep_ref["energy"]):
                    accepted = (cand, eta_c, obj_new, rep["energy"])
                    break
            else:
                viol = max(rep["mobility"],
                           rep["caching"] if enforce_caching else -np.inf,
                           rep["demand"] if enforce_demand else -np.inf,
                           rep["energy"])
                if (viol <= ORIG_CHECK_REL_TOL
                        and obj_new >= obj_cur - 1e-9 * max(abs(obj_cur), 1.0)):
                    accepted = (cand, eta_c, obj_new, rep["energy"])
                    break
            info["backtracks"] += 1
        if accepted is None:
            info["status"] = ("restoration-stalled" if restoring
                              else "no-admissible-step")
            break
        current, eta_cur, obj_new, _ = accepted
        if restoring:
            info["restoration_iters"] += 1
            obj_cur = _true_objective(current, tau, eta_cur, sc)
            info["objective_trace"].append(obj_cur)
            continue
        info["objective_trace"].append(obj_new)
        rel = (obj_new - obj_cur) / max(abs(obj_cur), 1.0)
        obj_cur = obj_new
        if rel < rel_tol:
            break

    return current, eta_cur, info


def solve_trajectory(traj_ref: Trajectory, tau, eta, sc: Scenario,
                     model: EhModel | None = None, **kw) -> Trajectory:
    traj, _, _ = solve_trajectory_with_info(traj_ref, tau, eta, sc, model, **kw)
    return traj
