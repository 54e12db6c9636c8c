"""Log-barrier interior-point solver for small dense smooth convex programs.

Maximizes a smooth concave objective subject to smooth convex inequality
constraints g_i(x) <= 0 and optional variable fixings.  Sized for the
trajectory subproblems of this package (a few hundred variables, O(N)
constraints): damped Newton with dense factorizations, barrier parameter
divided by 10 per stage, strict feasibility maintained at every iterate.

Constraints come in two forms: scalar :class:`Constraint` objects for
convenience, and vectorized :class:`ConstraintBlock` families so a caller
with many structurally identical rows (per-slot slack or energy rows) can
evaluate them in one numpy pass.  Curvature is reported as symmetric COO
triplets; affine rows report none.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

HessTriplets = tuple[np.ndarray, np.ndarray, np.ndarray]


class InfeasibleStartError(ValueError):
    """The supplied start point is not strictly feasible."""


@dataclass
class Constraint:
    """One smooth convex inequality g(x) <= 0 with analytic derivatives."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Optional[Callable[[np.ndarray], HessTriplets]] = None  # None: affine
    name: str = ""


class ConstraintBlock:
    """A family of rows evaluated together.

    Subclasses implement ``values`` and ``grads``; rows with curvature also
    implement ``hess_weighted``, returning COO triplets of
    sum_i w_i * hess(g_i) for the given per-row weights.
    """

    count: int = 0
    name: str = ""

    def values(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grads(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_weighted(self, x: np.ndarray, w: np.ndarray) -> Optional[HessTriplets]:
        return None


class _ScalarBlock(ConstraintBlock):
    """Adapter wrapping a list of scalar Constraints."""

    def __init__(self, cons: Sequence[Constraint], dim: int):
        self.cons = list(cons)
        self.count = len(self.cons)
        self.dim = dim
        self.name = "scalar"

    def values(self, x):
        return np.array([c.value(x) for c in self.cons], dtype=float)

    def grads(self, x):
        G = np.empty((self.count, self.dim))
        for i, c in enumerate(self.cons):
            G[i] = c.grad(x)
        return G

    def hess_weighted(self, x, w):
        rows_all, cols_all, vals_all = [], [], []
        for i, c in enumerate(self.cons):
            if c.hess is None:
                continue
            r, co, v = c.hess(x)
            rows_all.append(np.asarray(r, dtype=int))
            cols_all.append(np.asarray(co, dtype=int))
            vals_all.append(w[i] * np.asarray(v, dtype=float))
        if not rows_all:
            return None
        return (np.concatenate(rows_all), np.concatenate(cols_all),
                np.concatenate(vals_all))


@dataclass
class ConvexProgram:
    """Smooth concave maximization over g_i(x) <= 0 with fixed coordinates."""

    variable_count: int
    objective_value: Callable[[np.ndarray], float]
    objective_grad: Callable[[np.ndarray], np.ndarray]
    objective_hess: Optional[Callable[[np.ndarray], HessTriplets]] = None
    inequality_constraints: Sequence[Constraint] = field(default_factory=list)
    constraint_blocks: Sequence[ConstraintBlock] = field(default_factory=list)
    equality_fixings: Sequence[tuple[int, float]] = field(default_factory=tuple)


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    duality_gap: float
    stationarity: float
    newton_iters: int
    converged: bool
    message: str = ""
    stage_objectives: list[float] = field(default_factory=list)


def _add_triplets(H: np.ndarray, trip: Optional[HessTriplets], scale: float = 1.0):
    if trip is None:
        return
    rows, cols, vals = trip
    np.add.at(H, (np.asarray(rows, int), np.asarray(cols, int)),
              scale * np.asarray(vals, float))


def solve_convex(prog: ConvexProgram, x0: np.ndarray, tol: float = 1e-8,
                 mu_factor: float = 10.0, max_newton_per_stage: int = 60,
                 t0: float | None = None) -> BarrierResult:
    """Barrier solve from a strictly feasible x0.

    Terminates when the barrier duality gap m/t falls below ``tol`` times
    the objective scale.  Raises :class:`InfeasibleStartError` when any
    g_i(x0) >= 0; on a Newton-budget overrun it returns the best iterate
    with ``converged = False`` and the residuals filled in.
    """
    n = prog.variable_count
    x0 = np.asarray(x0, dtype=float).copy()
    if x0.shape != (n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({n},)")

    fixed_idx = np.array([i for i, _ in prog.equality_fixings], dtype=int)
    if fixed_idx.size:
        x0[fixed_idx] = [v for _, v in prog.equality_fixings]
    free = np.setdiff1d(np.arange(n), fixed_idx)

    blocks: list[ConstraintBlock] = list(prog.constraint_blocks)
    if prog.inequality_constraints:
        blocks.append(_ScalarBlock(prog.inequality_constraints, n))
    m = sum(b.count for b in blocks)

    def g_all(x: np.ndarray) -> np.ndarray:
        if not m:
            return np.empty(0)
        return np.concatenate([b.values(x) for b in blocks])

    x = x0.copy()
    g = g_all(x)
    if m and np.max(g) >= 0.0:
        raise InfeasibleStartError(
            f"start point violates {int(np.sum(g >= 0))} constraint(s); "
            f"worst value {np.max(g):.3e}")

    f0 = prog.objective_value(x)
    scale = max(abs(f0), 1.0)
    t = 1.0 if m == 0 else max(t0 if t0 is not None else m / scale, 1e-12)

    newton_total = 0
    budget = 60 * max_newton_per_stage
    stage_objectives: list[float] = []
    converged = True
    message = "ok"

    def barrier_val(gc, fc):
        pen = -float(np.sum(np.log(-gc))) if m else 0.0
        return t * (-fc) + pen

    while True:
        for _ in range(max_newton_per_stage):
            grad = -t * prog.objective_grad(x)
            H = np.zeros((n, n))
            if prog.objective_hess is not None:
                _add_triplets(H, prog.objective_hess(x), -t)
            if m:
                g_parts, G_parts = [], []
                offset = 0
                for b in blocks:
                    gb = b.values(x)
                    Gb = b.grads(x)
                    g_parts.append(gb)
                    G_parts.append(Gb)
                    _add_triplets(H, b.hess_weighted(x, 1.0 / (-gb)))
                    offset += b.count
                g = np.concatenate(g_parts)
                G = np.vstack(G_parts)
                grad += G.T @ (1.0 / (-g))
                Gw = G / g[:, None]
                H += Gw.T @ Gw
            Hf = H[np.ix_(free, free)]
            gf = grad[free]
            Hf[np.diag_indices_from(Hf)] += 1e-12 * (1.0 + np.abs(np.diag(Hf)))
            try:
                L = np.linalg.cholesky(Hf)
                step = -np.linalg.solve(L.T, np.linalg.solve(L, gf))
            except np.linalg.LinAlgError:
                step = -np.linalg.solve(Hf + 1e-8 * np.eye(free.size), gf)
            decrement = float(-gf @ step)
            newton_total += 1
            if decrement / 2.0 <= 1e-10 * max(1.0, t * scale):
                break

            cur = barrier_val(g, prog.objective_value(x))
            alpha, ok = 1.0, False
            for _ in range(60):
                xn = x.copy()
                xn[free] = x[free] + alpha * step
                gn = g_all(xn)
                if m and np.max(gn) >= 0.0:
                    alpha *= 0.5
                    continue
                fn = prog.objective_value(xn)
                if barrier_val(gn, fn) <= cur - 1e-4 * alpha * decrement:
                    x, g = xn, gn
                    ok = True
                    break
                alpha *= 0.5
            if not ok:
                break
        else:
            converged = False
            message = "newton budget exhausted in a barrier stage"

        stage_objectives.append(prog.objective_value(x))
        if m == 0 or m / t <= tol * scale:
            break
        if newton_total >= budget:
            converged = False
            message = "max iterations"
            break
        t *= mu_factor

    if m:
        g = g_all(x)
        lam = 1.0 / (-t * g)
        res = -prog.objective_grad(x)
        offset = 0
        for b in blocks:
            res += b.grads(x).T @ lam[offset:offset + b.count]
            offset += b.count
        stationarity = float(np.linalg.norm(res[free]) / max(1.0, scale))
        gap = m / t
    else:
        stationarity = float(np.linalg.norm(prog.objective_grad(x)[free]) / max(1.0, scale))
        gap = 0.0

    return BarrierResult(x=x, objective=prog.objective_value(x),
                         duality_gap=gap, stationarity=stationarity,
                         newton_iters=newton_total, converged=converged,
                         message=message, stage_objectives=stage_objectives)
