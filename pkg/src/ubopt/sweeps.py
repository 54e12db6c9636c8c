"""Experiment harness: parameter sweeps, trajectory dumps, harvester curves.

Outputs are deterministic CSV files (12 significant digits, fixed row
order).  Sweep points are dispatched to a process pool capped by the
``UBOPT_THREADS`` environment variable; rows are written in sweep order
regardless of completion order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .driver import Scheme, SolveReport, solve
from .energy import energy_causality, nonlinear_harvest_power
from .scenario import (Scenario, ScenarioError, parse_kv_text,
                       scenario_from_mapping)

FLOAT_FMT = "%.12g"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % float(value)
    return str(value)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class SweepSpec:
    """One swept scenario key, its values, the schemes to run, and a base
    scenario expressed as raw key/value overrides."""

    key: str
    values: list[float]
    schemes: list[Scheme]
    base: dict[str, str]
    name: str = "sweep"

    @classmethod
    def from_text(cls, text: str) -> "SweepSpec":
        kv = parse_kv_text(text)
        try:
            key = kv.pop("sweep.key")
            raw_values = kv.pop("sweep.values")
            raw_schemes = kv.pop("schemes")
        except KeyError as missing:
            raise ScenarioError(f"sweep spec is missing {missing}")
        name = kv.pop("name", "sweep")
        scenario_keys = {f.name for f in fields(Scenario)}
        if key not in scenario_keys:
            raise ScenarioError(f"invalid sweep key {key!r}")
        values = [float(v) for v in raw_values.replace(",", " ").split()]
        if not values:
            raise ScenarioError("sweep.values is empty")
        schemes = [Scheme(s.strip()) for s in raw_schemes.split(",") if s.strip()]
        if not schemes:
            raise ScenarioError("schemes list is empty")
        return cls(key=key, values=values, schemes=schemes, base=kv, name=name)

    @classmethod
    def from_file(cls, path) -> "SweepSpec":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def scenario_at(self, value: float) -> Scenario:
        kv = dict(self.base)
        kv[self.key] = _fmt(value)
        return scenario_from_mapping(kv)


def _solve_point(args) -> tuple[str, float, float, float, bool, int, bool]:
    spec, scheme_name, value = args
    sc = spec.scenario_at(value)
    _, _, report = solve(sc, Scheme(scheme_name))
    return (scheme_name, value, report.objective_bits,
            report.objective_bits / sc.T, report.converged,
            report.iterations, report.demand_met)


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("UBOPT_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


SWEEP_HEADER = ["scheme", "swept_value", "objective_bits", "throughput_bps",
                "converged", "iterations", "demand_met"]


def run_sweep(spec: SweepSpec, out_dir) -> str:
    """Run every (scheme, value) point and write ``<name>.csv``; returns the
    CSV path.  Rows appear in scheme-major, value-minor order."""
    jobs = [(spec, scheme.value, value)
            for scheme in spec.schemes for value in spec.values]
    workers = worker_count(len(jobs))
    if workers == 1:
        results = [_solve_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_point, jobs))
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, f"{spec.name}.csv")
    write_csv(out_path, SWEEP_HEADER, [list(r) for r in results])
    return out_path


TRAJECTORY_HEADER = ["n", "x", "y", "tau_n", "eta_n", "harvested_J", "consumed_J"]


def dump_trajectory(sc: Scenario, scheme: Scheme | str, out_path,
                    solution=None) -> SolveReport:
    """Solve one instance and write the flown path with per-slot allocation
    and energy.  Row 0 is the launch point and carries no slot values."""
    if solution is None:
        traj, alloc, report = solve(sc, scheme)
    else:
        traj, alloc, report = solution
    sc_run = sc.with_overrides(eh_model=Scheme(scheme).eh_model)
    led = energy_causality(alloc.tau, traj, sc_run)
    rows = [[0, traj.points[0, 0], traj.points[0, 1], 0.0, 0.0, 0.0, 0.0]]
    for n in range(1, sc.N + 1):
        rows.append([n, traj.points[n, 0], traj.points[n, 1],
                     alloc.tau[n - 1], alloc.eta[n - 1],
                     led.harvested[n - 1], led.consumed[n - 1]])
    write_csv(out_path, TRAJECTORY_HEADER, rows)
    return report


EH_HEADER = ["P_in_W", "E_linear_J", "E_nonlinear_J"]

# harvester-comparison operating point: half-slot reflection, one-second
# slot, and the low-power-fit efficiency used by the published curve
EH_COMPARE_OVERRIDES = dict(T=1.0, N=1, mu=0.7)
EH_COMPARE_TAU = 0.5


def default_power_grid() -> np.ndarray:
    """0..100 mW in 0.5 mW steps; covers the matched region and saturation."""
    return np.linspace(0.0, 0.1, 201)


def eh_compare(power_grid, sc: Scenario, out_path) -> str:
    """Tabulate both harvester models against received power, joules.

    The grid is the power at the harvester input, so the geometry drops out:
    linear model mu*(1-tau)*delta_t*P_in versus the saturating curve."""
    grid = np.asarray(list(power_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("power grid is empty")
    sc_cmp = sc.with_overrides(**EH_COMPARE_OVERRIDES)
    tau = EH_COMPARE_TAU
    dt = sc_cmp.delta_t
    e_lin = sc_cmp.mu * (1.0 - tau) * dt * grid
    e_nl = (1.0 - tau) * dt * nonlinear_harvest_power(grid, sc_cmp)
    rows = [[p, float(el), float(en)] for p, el, en in zip(grid, e_lin, e_nl)]
    write_csv(out_path, EH_HEADER, rows)
    return out_path
