"""Readers and validators for the simulator's run artifacts.

Every figure consumes only these documented files:
  trajectory.csv   step,atom,mass,theta         (circle runs)
                   step,atom,mass,x0..x{d-1}    (higher-dimensional runs)
  final_state.csv  idx,mass,x0,...,x{d-1}
  summary.json     config echo, termination, snapshots[{step, energy, ...}]
  sweep.csv        beta,sqrt_beta,n_clusters,largest_mass,energy_final,terminated
  masses.csv       beta,sqrt_beta,mass,diameter,is_largest,bound_limit,bound_finite_beta
  theta.json       {activation, neurons:[{a, omega, b}]}
"""

from __future__ import annotations

import json
import math
import os

import numpy as np


class SchemaError(ValueError):
    """An input file does not match its documented schema."""


def _read_csv(path, required):
    if not os.path.exists(path):
        raise SchemaError(f"{path}: file not found")
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing} (found {header})")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{path}: ragged row {ln!r}")
        rows.append(dict(zip(header, parts)))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return header, rows


def load_trajectory(run_dir):
    path = os.path.join(run_dir, "trajectory.csv")
    header, rows = _read_csv(path, ["step", "atom", "mass"])
    if "theta" in header:
        steps = np.array([int(r["step"]) for r in rows])
        atoms = np.array([int(r["atom"]) for r in rows])
        theta = np.array([float(r["theta"]) for r in rows])
        return {"kind": "circle", "step": steps, "atom": atoms, "theta": theta,
                "mass": np.array([float(r["mass"]) for r in rows])}
    coord_cols = [c for c in header if c.startswith("x")]
    if not coord_cols:
        raise SchemaError(f"{path}: expected a theta column or x0..x{{d-1}} columns")
    coords = np.array([[float(r[c]) for c in coord_cols] for r in rows])
    return {"kind": "euclidean", "step": np.array([int(r["step"]) for r in rows]),
            "atom": np.array([int(r["atom"]) for r in rows]),
            "mass": np.array([float(r["mass"]) for r in rows]), "coords": coords}


def load_final_state(run_dir):
    path = os.path.join(run_dir, "final_state.csv")
    header, rows = _read_csv(path, ["idx", "mass"])
    coord_cols = [c for c in header if c.startswith("x")]
    if not coord_cols:
        raise SchemaError(f"{path}: missing coordinate columns x0..x{{d-1}}")
    coords = np.array([[float(r[c]) for c in coord_cols] for r in rows])
    masses = np.array([float(r["mass"]) for r in rows])
    return coords, masses


def load_summary(run_dir):
    path = os.path.join(run_dir, "summary.json")
    if not os.path.exists(path):
        raise SchemaError(f"{path}: file not found")
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("config", "termination", "snapshots"):
        if key not in payload:
            raise SchemaError(f"{path}: missing key {key!r}")
    return payload


def load_sweep(sweep_dir):
    path = os.path.join(sweep_dir, "sweep.csv")
    _, rows = _read_csv(path, ["beta", "sqrt_beta", "n_clusters", "largest_mass",
                               "energy_final", "terminated"])
    return rows


def load_masses(sweep_dir):
    path = os.path.join(sweep_dir, "masses.csv")
    _, rows = _read_csv(path, ["beta", "sqrt_beta", "mass", "diameter", "is_largest",
                               "bound_limit", "bound_finite_beta"])
    return rows


def load_theta(run_dir):
    path = os.path.join(run_dir, "theta.json")
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        payload = json.load(fh)
    if "activation" not in payload or "neurons" not in payload:
        raise SchemaError(f"{path}: missing activation/neurons keys")
    a = np.array([n["a"] for n in payload["neurons"]], dtype=float)
    omega = np.array([n["omega"] for n in payload["neurons"]], dtype=float)
    b = np.array([n.get("b", 0.0) for n in payload["neurons"]], dtype=float)
    return {"activation": payload["activation"], "a": a, "omega": omega, "b": b}


def potential_on_circle(theta_params, grid=2048):
    """Perceptron potential and dead-zone mask sampled on the angle grid."""
    t = 2.0 * np.pi * np.arange(grid) / grid
    X = np.column_stack([np.cos(t), np.sin(t)])
    S = X @ theta_params["a"].T + theta_params["b"]
    if theta_params["activation"] == "relu":
        prim = np.where(S > 0.0, S * S, 0.0)
        dead = np.all(S <= 0.0, axis=1)
    else:
        erf = np.vectorize(math.erf)
        prim = 0.5 * S * S + 0.5 * (S * S - 1.0) * erf(S / math.sqrt(2.0)) \
            + S * np.exp(-0.5 * S * S) / math.sqrt(2.0 * math.pi)
        dead = np.zeros(len(t), dtype=bool)  # the smooth gate never switches fully off
    v = prim @ theta_params["omega"]
    return t, v, dead
