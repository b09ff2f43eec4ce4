"""Extremal points of the coupled energy.

Global maximizers are point masses at the maximizers of the perceptron
potential.  For the piecewise-linear gate with zero biases the sphere splits
into sign cells on which the potential is the quadratic form of
B_I = sum_{j active} omega_j a_j a_j^T, so the search reduces to constrained
symmetric eigenvalue problems: principal eigenvectors inside a cell, else
recursion onto its boundary faces.  A grid + local-ascent fallback covers
smooth gates.  The minimizer side ships a rotational-symmetry check about
the common weight axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import null_space

from . import perceptron as pc
from .sphere import Ensemble

CLOSURE_TOL = 1e-9
TIE_TOL = 1e-9
DEDUPE_TOL = 1e-6


class TrivialSymmetryError(ValueError):
    """The rotations fixing every weighted direction form no usable axis group."""


@dataclass(frozen=True)
class Cell:
    """One sign cell: per-neuron signs, active indices, an interior point."""

    sign_pattern: tuple
    active_set: tuple
    representative: np.ndarray
    feasibility: str = "exact"


@dataclass(frozen=True)
class CellMax:
    cell: Cell
    value: float
    argmax: np.ndarray


@dataclass(frozen=True)
class MaxReport:
    value: float
    maximizers: tuple
    per_cell: tuple
    continuum_suspected: bool = False

    def to_json_dict(self):
        return {
            "value": self.value,
            "maximizers": [[float(v) for v in x] for x in self.maximizers],
            "continuum_suspected": self.continuum_suspected,
            "per_cell": [
                {
                    "sign_pattern": list(c.cell.sign_pattern),
                    "active_set": list(c.cell.active_set),
                    "feasibility": c.cell.feasibility,
                    "value": c.value,
                    "argmax": [float(v) for v in c.argmax],
                }
                for c in self.per_cell
            ],
        }


def max_energy(beta, potential_max) -> float:
    """Energy of the maximizing point mass: e^beta / (2 beta) + max(v) / 2."""
    beta = float(beta)
    return math.exp(beta) / (2.0 * beta) + 0.5 * float(potential_max)


def _require_relu_no_bias(params: pc.PerceptronParams):
    if params.activation is not pc.ActivationKind.RELU:
        raise ValueError("the exact cell decomposition needs the piecewise-linear gate")
    if np.any(np.abs(params.b) > 1e-12):
        raise ValueError("the exact cell decomposition needs zero biases")


def _sign_pattern(params, x, strict_tol=0.0):
    s = params.a @ x
    signs = []
    for j in range(params.n_neurons):
        scale = np.linalg.norm(params.a[j])
        if scale == 0.0:
            signs.append(-1)  # a zero direction never activates
        elif s[j] > strict_tol * scale:
            signs.append(+1)
        elif s[j] < -strict_tol * scale:
            signs.append(-1)
        else:
            return None  # on a boundary
    return tuple(signs)


def enumerate_cells(params: pc.PerceptronParams, samples=100_000, seed=0) -> list:
    """Nonempty sign cells of the sphere minus the neuron hyperplanes.

    d = 2 uses exact arc arithmetic on the circle.  Higher d certifies
    nonemptiness by seeded sampling with a deterministic refinement pass for
    samples that land next to a hyperplane; those cells are tagged
    feasibility="sampled".
    """
    _require_relu_no_bias(params)
    d = params.dim
    nonzero = [j for j in range(params.n_neurons) if np.linalg.norm(params.a[j]) > 0.0]
    if d == 2:
        return _enumerate_cells_circle(params, nonzero)
    return _enumerate_cells_sampled(params, nonzero, samples, seed)


def _enumerate_cells_circle(params, nonzero):
    if not nonzero:
        x = np.array([1.0, 0.0])
        return [Cell((-1,) * params.n_neurons, (), x)]
    zeros = []
    for j in nonzero:
        phi = math.atan2(params.a[j][1], params.a[j][0])
        zeros.append((phi + 0.5 * math.pi) % (2.0 * math.pi))
        zeros.append((phi - 0.5 * math.pi) % (2.0 * math.pi))
    zeros = sorted(zeros)
    uniq = []
    for z in zeros:
        if not uniq or abs(z - uniq[-1]) > 1e-12:
            uniq.append(z)
    if len(uniq) > 1 and (uniq[0] + 2.0 * math.pi) - uniq[-1] <= 1e-12:
        uniq.pop()
    cells = []
    for k, lo in enumerate(uniq):
        hi = uniq[(k + 1) % len(uniq)]
        if hi <= lo:
            hi += 2.0 * math.pi
        mid = 0.5 * (lo + hi)
        x = np.array([math.cos(mid), math.sin(mid)])
        pattern = _sign_pattern(params, x)
        if pattern is None:
            continue  # degenerate sliver below angular resolution
        active = tuple(j for j, s in enumerate(pattern) if s > 0)
        cells.append(Cell(pattern, active, x))
    return cells


def _enumerate_cells_sampled(params, nonzero, samples, seed):
    d = params.dim
    rng = np.random.Generator(np.random.Philox(key=seed))
    X = rng.standard_normal((samples, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    norms = np.array([np.linalg.norm(params.a[j]) if j in nonzero else 1.0 for j in range(params.n_neurons)])
    S = (X @ params.a.T) / norms
    strict = np.all(np.abs(S[:, nonzero]) > 1e-7, axis=1) if nonzero else np.ones(samples, bool)

    def pattern_of(row):
        return tuple((+1 if row[j] > 0 else -1) if j in nonzero else -1 for j in range(params.n_neurons))

    found = {}
    for idx in np.nonzero(strict)[0]:
        pattern = pattern_of(S[idx])
        if pattern not in found:
            found[pattern] = X[idx]
    # refinement: push near-boundary samples into each adjacent untaken pattern
    near = np.nonzero(~strict)[0][:200]
    for idx in near:
        small = [j for j in nonzero if abs(S[idx, j]) <= 1e-7]
        if len(small) > 3:
            continue
        for flips in range(2 ** len(small)):
            target = list(np.sign(S[idx]).astype(int))
            for bit, j in enumerate(small):
                target[j] = +1 if (flips >> bit) & 1 else -1
            for j in range(params.n_neurons):
                if j not in nonzero:
                    target[j] = -1
            target = tuple(target)
            if target in found:
                continue
            y = X[idx].copy()
            for _ in range(20):
                s = params.a @ y
                bad = [j for j in nonzero if target[j] * s[j] <= 1e-7 * norms[j]]
                if not bad:
                    break
                for j in bad:
                    y = y + 0.05 * target[j] * params.a[j] / norms[j]
                y = y / np.linalg.norm(y)
            if _sign_pattern(params, y, strict_tol=1e-9) == target:
                found[target] = y
    cells = []
    for pattern in sorted(found):
        active = tuple(j for j, s in enumerate(pattern) if s > 0)
        cells.append(Cell(pattern, active, found[pattern], feasibility="sampled"))
    return cells


def _in_closure(params, pattern, x, tol=CLOSURE_TOL):
    s = params.a @ x
    for j in range(params.n_neurons):
        scale = np.linalg.norm(params.a[j])
        if scale == 0.0:
            continue
        if pattern[j] * s[j] < -tol * scale:
            return False
    return True


def cell_max(cell: Cell, params: pc.PerceptronParams, d=None):
    """Maximize x^T B_I x over the closed cell.

    Candidates are the (+/-) eigenvectors of B_I restricted to every
    intersection of constraint hyperplanes up to codimension d-1; a candidate
    counts when it satisfies the cell's sign pattern up to closure tolerance.
    The true maximizer always appears among these: it is a critical point of
    the Rayleigh quotient on the face where its active constraints live.
    """
    _require_relu_no_bias(params)
    if d is None:
        d = params.dim
    B = np.zeros((d, d))
    for j in cell.active_set:
        B += params.omega[j] * np.outer(params.a[j], params.a[j])
    constraints = [j for j in range(params.n_neurons) if np.linalg.norm(params.a[j]) > 0.0]
    best_val = -np.inf
    best_x = None
    for size in range(0, d):
        for S in combinations(constraints, size):
            if size == 0:
                Q = np.eye(d)
            else:
                A_S = params.a[list(S)]
                Q = null_space(A_S)
                if Q.size == 0:
                    continue
            Br = Q.T @ B @ Q
            vals, vecs = np.linalg.eigh(0.5 * (Br + Br.T))
            for k in range(Q.shape[1]):
                for sgn in (+1.0, -1.0):
                    x = sgn * (Q @ vecs[:, k])
                    nrm = np.linalg.norm(x)
                    if nrm < 1e-12:
                        continue
                    x = x / nrm
                    if not _in_closure(params, cell.sign_pattern, x):
                        continue
                    val = float(x @ B @ x)
                    if val > best_val + 1e-15 or (
                        abs(val - best_val) <= 1e-15 and best_x is not None and tuple(x) < tuple(best_x)
                    ):
                        best_val = val
                        best_x = x
    if best_x is None:
        # every candidate fell outside (degenerate sliver): fall back to the representative
        best_x = cell.representative / np.linalg.norm(cell.representative)
        best_val = float(best_x @ B @ best_x)
    return best_x, best_val


def _dedupe_points(points, tol=DEDUPE_TOL):
    kept = []
    for x in points:
        if all(float(np.arccos(np.clip(x @ y, -1.0, 1.0))) > tol for y in kept):
            kept.append(x)
    return kept


def global_max(params: pc.PerceptronParams, d=None, grid_points=200_000, seed=0) -> MaxReport:
    """Global maximum of the perceptron potential over the sphere.

    Piecewise-linear gate with zero biases: exact via the cell decomposition.
    Anything else falls back to a seeded dense grid with local ascent
    refinement (d <= 3).  Maximizers within 1e-9 of the best value are all
    returned, deduplicated at 1e-6 geodesic tolerance; flat optimal cells
    (B_I proportional to the identity on the best cell) are flagged as a
    suspected continuum and reported through arc endpoints plus midpoint.
    """
    if d is None:
        d = params.dim
    exact = params.activation is pc.ActivationKind.RELU and not np.any(np.abs(params.b) > 1e-12)
    if not exact:
        return _grid_max(params, d, grid_points, seed)

    cells = enumerate_cells(params)
    per_cell = []
    for cell in cells:
        x, val = cell_max(cell, params, d)
        per_cell.append(CellMax(cell, val, x))
    value = max(cm.value for cm in per_cell)
    winners = [cm for cm in per_cell if cm.value >= value - TIE_TOL]
    points = [cm.argmax for cm in winners]

    continuum = False
    if d == 2:
        for cm in winners:
            B = np.zeros((2, 2))
            for j in cm.cell.active_set:
                B += params.omega[j] * np.outer(params.a[j], params.a[j])
            if np.max(np.abs(B - value * np.eye(2))) <= 1e-12 * (1.0 + abs(value)):
                continuum = True
                lo, hi = _cell_arc(params, cm.cell)
                for t in (lo, 0.5 * (lo + hi), hi):
                    points.append(np.array([math.cos(t), math.sin(t)]))
    else:
        for cm in winners:
            B = np.zeros((d, d))
            for j in cm.cell.active_set:
                B += params.omega[j] * np.outer(params.a[j], params.a[j])
            vals = np.linalg.eigvalsh(0.5 * (B + B.T))
            if np.sum(vals >= vals[-1] - 1e-9 * (1.0 + abs(vals[-1]))) >= 2 and vals[-1] >= value - 1e-9:
                continuum = True

    maximizers = _dedupe_points([p for p in points if _potential_value(params, p) >= value - 10 * TIE_TOL])
    return MaxReport(value, tuple(maximizers), tuple(per_cell), continuum)


def _cell_arc(params, cell):
    """Endpoints of a circle cell's arc, located from its representative."""
    mid = math.atan2(cell.representative[1], cell.representative[0]) % (2.0 * math.pi)
    zeros = []
    for j in range(params.n_neurons):
        if np.linalg.norm(params.a[j]) == 0.0:
            continue
        phi = math.atan2(params.a[j][1], params.a[j][0])
        zeros.append((phi + 0.5 * math.pi) % (2.0 * math.pi))
        zeros.append((phi - 0.5 * math.pi) % (2.0 * math.pi))
    if not zeros:
        return mid - math.pi, mid + math.pi
    below = [z - 2.0 * math.pi for z in zeros] + zeros + [z + 2.0 * math.pi for z in zeros]
    lo = max(z for z in below if z <= mid)
    hi = min(z for z in below if z > mid)
    return lo, hi


def _potential_value(params, x):
    s = params.a @ x + params.b
    return float(params.omega @ pc.primitive(params.activation, s))


def _grid_max(params, d, grid_points, seed):
    if d > 3:
        raise ValueError("the grid fallback supports d <= 3")
    if d == 2:
        t = 2.0 * np.pi * np.arange(grid_points) / grid_points
        X = np.column_stack([np.cos(t), np.sin(t)])
    else:
        rng = np.random.Generator(np.random.Philox(key=seed))
        X = rng.standard_normal((grid_points, 3))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    vals = pc.primitive(params.activation, X @ params.a.T + params.b) @ params.omega
    order = np.argsort(vals)[::-1]
    candidates = []
    for idx in order[:16]:
        candidates.append(_polish(params, X[idx]))
    value = max(v for _, v in candidates)
    points = [x for x, v in candidates if v >= value - 1e-9]
    maximizers = _dedupe_points(points, tol=1e-4)
    return MaxReport(value, tuple(maximizers), (), len(maximizers) > 4)


def _polish(params, x0, iters=200):
    """Projected gradient ascent on the potential with backtracking."""
    x = x0 / np.linalg.norm(x0)
    val = _potential_value(params, x)
    step = 0.1
    for _ in range(iters):
        s = params.a @ x + params.b
        sigma, _d = pc.activation(params.activation, s)
        g = 2.0 * (params.omega * np.atleast_1d(sigma)) @ params.a
        g = g - (x @ g) * x
        if np.linalg.norm(g) < 1e-14:
            break
        y = x + step * g
        y /= np.linalg.norm(y)
        new = _potential_value(params, y)
        if new > val:
            x, val = y, new
            step *= 1.2
        else:
            step *= 0.5
            if step < 1e-14:
                break
    return x, val


# -- rotational symmetry of descent limits about the common weight axis --


@dataclass(frozen=True)
class SymmetryReport:
    passed: bool
    max_discrepancy: float
    per_rotation: tuple
    axis: np.ndarray


def _weighted_w1_1d(v1, w1, v2, w2):
    values = np.concatenate([v1, v2])
    weights = np.concatenate([w1, -w2])
    order = np.argsort(values, kind="stable")
    values = values[order]
    cdf_gap = np.cumsum(weights[order])[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(values)))


def _rotation_about(axis, angle):
    axis = axis / np.linalg.norm(axis)
    K = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def minimizer_symmetry_check(
    final: Ensemble,
    params: pc.PerceptronParams,
    tol,
    n_rotations=16,
    n_projections=64,
    seed=0,
) -> SymmetryReport:
    """Sliced transport discrepancy between a state and its axis rotations.

    Applicable on S^2 when every direction with nonzero weight is collinear:
    those rotations fix the potential, so the unique energy minimizer must be
    invariant under them.  The discrepancy per rotation averages 1-d
    Wasserstein-1 distances over seeded random projections; the check passes
    when the worst rotation stays within tol.
    """
    if final.d != 3:
        raise ValueError("the rotation group check runs on S^2")
    active = [j for j in range(params.n_neurons) if params.omega[j] != 0.0 and np.linalg.norm(params.a[j]) > 0.0]
    if not active:
        raise TrivialSymmetryError("no weighted directions: no distinguished axis to rotate about")
    axis = params.a[active[0]] / np.linalg.norm(params.a[active[0]])
    for j in active[1:]:
        u = params.a[j] / np.linalg.norm(params.a[j])
        if abs(float(u @ axis)) < 1.0 - 1e-10:
            raise TrivialSymmetryError("weighted directions are not collinear: the fixing group is trivial")

    rng = np.random.Generator(np.random.Philox(key=seed))
    dirs = rng.standard_normal((n_projections, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    X = final.positions
    m = final.masses
    per_rot = []
    for k in range(1, n_rotations + 1):
        R = _rotation_about(axis, 2.0 * math.pi * k / (n_rotations + 1))
        Y = X @ R.T
        vals = []
        for u in dirs:
            vals.append(_weighted_w1_1d(X @ u, m, Y @ u, m))
        per_rot.append(float(np.mean(vals)))
    worst = max(per_rot)
    return SymmetryReport(worst <= float(tol), worst, tuple(per_rot), axis)
