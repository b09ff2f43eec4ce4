"""The six figure kinds regenerated from run artifacts.

trajectories      angle fan over steps for a circle run
histogram         final-state mass histogram with the potential landscape shaded
energy            energy vs step curves, one per run
masses            cluster masses vs sqrt(beta) with both mass-bound overlays
scaling_heatmap   cluster counts across the beta sweep
sphere_histogram  2-d angle histogram of a final state on S^2

All output is vector SVG with pinned metadata so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "amlplots"

import matplotlib.pyplot as plt
import numpy as np

from . import schemas
from .schemas import SchemaError

KINDS = ("trajectories", "histogram", "energy", "masses", "scaling_heatmap", "sphere_histogram")

POSITIVE_SHADE = "#b6e3b6"   # potential above zero
NEGATIVE_SHADE = "#f7c6a3"   # potential below zero
DEAD_SHADE = "#6e6e6e"       # every gate switched off


@dataclass
class FigureSpec:
    kind: str
    runs: list
    out: "str | None" = None
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r} (choose from {KINDS})")
        if not self.runs:
            raise SchemaError("at least one input directory is required")


def render(spec: FigureSpec) -> str:
    """Build the figure and write it; returns the output path."""
    fig = build_figure(spec)
    out = spec.out or os.path.join(spec.runs[0], f"fig_{spec.kind}.svg")
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


def build_figure(spec: FigureSpec):
    builder = {
        "trajectories": _trajectories,
        "histogram": _histogram,
        "energy": _energy,
        "masses": _masses,
        "scaling_heatmap": _scaling_heatmap,
        "sphere_histogram": _sphere_histogram,
    }[spec.kind]
    return builder(spec)


def _new_axes(width=6.4, height=4.2):
    fig, ax = plt.subplots(figsize=(width, height), dpi=100)
    return fig, ax


def _shade_landscape(ax, run_dir, horizontal=False):
    theta_params = schemas.load_theta(run_dir)
    if theta_params is None:
        return
    t, v, dead = schemas.potential_on_circle(theta_params)
    scale = float(np.max(np.abs(v))) or 1.0
    span = (ax.axhspan if horizontal else ax.axvspan)
    edges = np.append(t, 2.0 * np.pi)
    start = 0
    for k in range(1, len(t) + 1):
        if k < len(t) and (v[k] > 0) == (v[start] > 0) and dead[k] == dead[start]:
            continue
        color = DEAD_SHADE if dead[start] else (POSITIVE_SHADE if v[start] > 0 else NEGATIVE_SHADE)
        alpha = 0.5 if dead[start] else 0.18 + 0.25 * float(np.max(np.abs(v[start:k]))) / scale
        span(edges[start], edges[k], color=color, alpha=min(alpha, 0.6), linewidth=0)
        start = k


def _trajectories(spec):
    data = schemas.load_trajectory(spec.runs[0])
    if data["kind"] != "circle":
        raise SchemaError("the trajectory fan needs a circle run (theta column)")
    fig, ax = _new_axes(7.0, 4.2)
    _shade_landscape(ax, spec.runs[0], horizontal=True)
    atoms = np.unique(data["atom"])
    keep = atoms[:: max(1, len(atoms) // 400)]
    for a in keep:
        mask = data["atom"] == a
        ax.plot(data["step"][mask], data["theta"][mask], lw=0.4, color="#1f4e8c", alpha=0.5)
    ax.set_xlabel("step")
    ax.set_ylabel("angle")
    ax.set_ylim(0, 2 * np.pi)
    ax.set_title("particle trajectories")
    return fig


def _histogram(spec):
    coords, masses = schemas.load_final_state(spec.runs[0])
    if coords.shape[1] != 2:
        raise SchemaError("the angle histogram needs a circle run (2 coordinates)")
    theta = np.mod(np.arctan2(coords[:, 1], coords[:, 0]), 2 * np.pi)
    fig, ax = _new_axes()
    _shade_landscape(ax, spec.runs[0])
    bins = int(spec.style.get("bins", 128))
    ax.hist(theta, bins=bins, range=(0, 2 * np.pi), weights=masses, color="#1f4e8c")
    ax.set_xlabel("angle")
    ax.set_ylabel("mass")
    ax.set_xlim(0, 2 * np.pi)
    ax.set_title("final-state mass histogram")
    return fig


def _energy(spec):
    fig, ax = _new_axes()
    for run in spec.runs:
        summary = schemas.load_summary(run)
        snaps = summary["snapshots"]
        if not snaps:
            raise SchemaError(f"{run}: summary has no snapshots")
        steps = [s["step"] for s in snaps]
        energy = [s["energy"] for s in snaps]
        label = f"beta={summary.get('beta', '?')} ({summary['termination']})"
        ax.plot(steps, energy, lw=1.2, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("energy")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("energy along the run")
    return fig


def _masses(spec):
    rows = schemas.load_masses(spec.runs[0])
    sqrt_beta = np.array([float(r["sqrt_beta"]) for r in rows])
    mass = np.array([float(r["mass"]) for r in rows])
    largest = np.array([r["is_largest"] == "1" for r in rows])
    fig, ax = _new_axes()
    ax.scatter(sqrt_beta[~largest], mass[~largest], s=14, color="#1f4e8c", alpha=0.75,
               label="cluster mass")
    ax.scatter(sqrt_beta[largest], mass[largest], s=42, color="#0b2d5c", alpha=0.95,
               label="largest cluster")
    order = np.argsort(sqrt_beta)
    limit = float(rows[0]["bound_limit"])
    ax.axhline(limit, color="black", lw=1.0, ls="-", label=f"mass limit {limit}")
    ax.plot(sqrt_beta[order], [float(rows[i]["bound_finite_beta"]) for i in order],
            color="#c22727", lw=1.2, ls="--", label="finite-beta bound")
    ax.set_xlabel("sqrt(beta)")
    ax.set_ylabel("cluster mass")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("cluster masses against the anti-concentration bounds")
    return fig


def _scaling_heatmap(spec):
    grid = []
    labels = []
    betas_ref = None
    for sweep in spec.runs:
        rows = schemas.load_sweep(sweep)
        betas = [float(r["beta"]) for r in rows]
        if betas_ref is None:
            betas_ref = betas
        elif betas != betas_ref:
            raise SchemaError("sweeps disagree on the beta grid")
        grid.append([int(r["n_clusters"]) for r in rows])
        labels.append(os.path.basename(os.path.normpath(sweep)))
    M = np.array(grid)
    fig, ax = _new_axes(7.2, 1.2 + 0.8 * len(grid))
    im = ax.imshow(M, aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(betas_ref)), [f"{b:g}" for b in betas_ref], fontsize=7)
    ax.set_yticks(range(len(labels)), labels, fontsize=8)
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            ax.text(j, i, str(M[i, j]), ha="center", va="center", fontsize=7,
                    color="white" if M[i, j] < M.max() * 0.6 else "black")
    ax.set_xlabel("beta")
    ax.set_title("clusters at termination")
    fig.colorbar(im, ax=ax, shrink=0.8)
    return fig


def _sphere_histogram(spec):
    coords, masses = schemas.load_final_state(spec.runs[0])
    if coords.shape[1] != 3:
        raise SchemaError("the sphere histogram needs a 3-coordinate final state")
    azimuth = np.mod(np.arctan2(coords[:, 1], coords[:, 0]), 2 * np.pi)
    polar = np.arccos(np.clip(coords[:, 2], -1.0, 1.0))
    fig, ax = _new_axes()
    bins = int(spec.style.get("bins", 48))
    H, xe, ye = np.histogram2d(azimuth, polar, bins=[bins, bins // 2],
                               range=[[0, 2 * np.pi], [0, np.pi]], weights=masses)
    im = ax.pcolormesh(xe, ye, H.T, cmap="magma")
    ax.set_xlabel("azimuth")
    ax.set_ylabel("polar angle")
    ax.set_title("final-state mass on the sphere")
    fig.colorbar(im, ax=ax, shrink=0.85)
    return fig
