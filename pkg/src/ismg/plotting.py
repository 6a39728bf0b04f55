"""Report figures written next to the CSV outputs.

Figures are built on :class:`matplotlib.figure.Figure` directly, so no
interactive backend is ever selected.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure


def plot_iterations(rows, path, title=None):
    """Fine and coarse sweep counts per timestep."""
    steps = [r["step"] for r in rows]
    fig = Figure(figsize=(7, 3.5))
    ax = fig.add_subplot()
    ax.plot(steps, [r["I_f"] for r in rows], lw=0.8, label="$I_f$")
    ax.plot(steps, [r["I_c"] for r in rows], lw=0.8, label="$I_c$")
    ax.set_xlabel("time step")
    ax.set_ylabel("sweeps per step")
    if any(r["I_f"] > 0 or r["I_c"] > 0 for r in rows):
        ax.set_yscale("symlog", linthresh=1.0)
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    return Path(path)


def plot_velocity_magnitude(state, spec, path, title=None):
    """Cell-centred speed with the domain's aspect ratio."""
    uc, vc = state.vel.cell_centered()
    speed = np.hypot(uc, vc)
    fig = Figure(figsize=(5, 5 * min(max(spec.ny / spec.nx, 0.3), 3.0)))
    ax = fig.add_subplot()
    im = ax.imshow(speed.T, origin="lower", extent=(0, spec.nx * spec.h, 0, spec.ny * spec.h),
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label="|v|")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    return Path(path)


def plot_sweep(rows, path, key="NCC_t"):
    """Mean per-step ``key`` against the coarse tolerance, one line per scheme and spacing."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    series = {}
    for r in rows:
        if r[key] == "-" or r["tol_coarse"] == "n/a":
            continue
        series.setdefault((r["scheme"], r["tile_or_depth"]), []).append(
            (float(r["tol_coarse"]), float(r[key])))
    for (scheme, label), pts in sorted(series.items()):
        pts.sort()
        unit = "levels" if scheme == "ACM" else "h"
        ax.plot(*zip(*pts), marker="o", ms=3, label=f"{scheme} {label}{unit}")
    for r in rows:
        if r["tol_coarse"] == "n/a" and r[key] != "-":
            ax.axhline(float(r[key]), ls="--", lw=0.8, color="gray", label=r["scheme"])
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("coarse tolerance")
    ax.set_ylabel(f"mean {key} per step")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    return Path(path)
