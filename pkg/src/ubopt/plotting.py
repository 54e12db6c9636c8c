"""Render the harness CSV outputs to PNG figures.

Data files remain the primary artifact; these renderers exist so a report
directory is browsable without an external plotting step.  Uses the Agg
backend and never opens a window.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def render_sweep_csv(csv_path, png_path, value_column: str = "objective_bits") -> str:
    header, rows = _read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    schemes = []
    for row in rows:
        if row[col["scheme"]] not in schemes:
            schemes.append(row[col["scheme"]])
    for scheme in schemes:
        xs = [float(r[col["swept_value"]]) for r in rows if r[col["scheme"]] == scheme]
        ys = [float(r[col[value_column]]) for r in rows if r[col["scheme"]] == scheme]
        ax.plot(xs, ys, marker="o", label=scheme)
    ax.set_xlabel("swept value")
    ax.set_ylabel(value_column)
    ax.grid(alpha=0.3, linestyle=":")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return str(png_path)


def render_trajectory_csv(csv_path, png_path, landmarks: dict | None = None) -> str:
    header, rows = _read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    xs = [float(r[col["x"]]) for r in rows]
    ys = [float(r[col["y"]]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    ax.plot(xs, ys, "-o", markersize=2.5, label="path")
    ax.plot(xs[0], ys[0], "g^", markersize=9, label="start")
    ax.plot(xs[-1], ys[-1], "rv", markersize=9, label="end")
    for name, (px, py) in (landmarks or {}).items():
        ax.plot(px, py, "ks", markersize=7)
        ax.annotate(name, (px, py), textcoords="offset points", xytext=(5, 5))
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(alpha=0.3, linestyle=":")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return str(png_path)


def render_ehcompare_csv(csv_path, png_path) -> str:
    header, rows = _read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    p = [1e3 * float(r[col["P_in_W"]]) for r in rows]
    lin = [1e3 * float(r[col["E_linear_J"]]) for r in rows]
    nl = [1e3 * float(r[col["E_nonlinear_J"]]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(p, lin, label="linear model")
    ax.plot(p, nl, label="saturating model")
    ax.set_xlabel("received power [mW]")
    ax.set_ylabel("harvested energy [mJ]")
    ax.grid(alpha=0.3, linestyle=":")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return str(png_path)
