"""Cluster detection at the interaction scale and anti-concentration bounds.

Atoms are grouped by single linkage on the geodesic-distance graph at
threshold min(1/(2 sqrt(beta)), pi/(2d)).  Clusters whose diameter fits the
tighter 1/(2 sqrt(beta)) scale are subject to a mass bound that tends to
0.5742 as beta grows, and a perceptron-size constant decides whether a
single all-atom cluster is even possible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import perceptron as pc
from .sphere import Ensemble, pairwise_geodesic

# Numerical term of the asymptotic cluster mass bound (lambda = 1/2).
MASS_LIMIT = 0.5742
# Infimum over beta > 0 of the single-cluster obstruction (3/8) e^(beta - 1/8).
EXCLUSION_CONSTANT = 0.375 * math.exp(-0.125)


class ScaleMismatchError(ValueError):
    """The cluster report was produced at a different threshold than required."""


def cluster_threshold(beta, d) -> float:
    """Grouping scale min(1/(2 sqrt(beta)), pi/(2d)); reduces to pi/4 at d = 2."""
    beta = float(beta)
    if beta <= 0:
        raise ValueError("beta must be positive")
    return min(0.5 / math.sqrt(beta), math.pi / (2.0 * int(d)))


class _DisjointSet:
    """Union-find with path compression; deterministic given the union order."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]


@dataclass(frozen=True)
class Cluster:
    members: tuple
    mass: float
    diameter: float


@dataclass(frozen=True)
class ClusterReport:
    clusters: tuple
    threshold: float
    beta: float

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def largest_mass(self) -> float:
        return max(c.mass for c in self.clusters)

    def to_json_dict(self, flags=None) -> dict:
        payload = {
            "threshold": self.threshold,
            "beta": self.beta,
            "clusters": [
                {"members": list(c.members), "mass": c.mass, "diameter": c.diameter}
                for c in self.clusters
            ],
            "flags": flags if flags is not None else {},
        }
        return payload

    def save(self, path, flags=None):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(flags), fh, indent=2)
            fh.write("\n")


def detect(ens: Ensemble, beta, d=None) -> ClusterReport:
    """Single-linkage clusters of the thresholded geodesic graph.

    Edges connect atoms at distance <= min(1/(2 sqrt(beta)), pi/(2d)); the
    connected components are found by union-find over the (deterministically
    sorted) edge list.
    """
    if d is None:
        d = ens.d
    thr = cluster_threshold(beta, d)
    dist = pairwise_geodesic(ens.positions)
    dsu = _DisjointSet(ens.n)
    ii, jj = np.nonzero(np.triu(dist <= thr, k=1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        dsu.union(i, j)
    groups = {}
    for i in range(ens.n):
        groups.setdefault(dsu.find(i), []).append(i)
    clusters = []
    for members in sorted(groups.values(), key=lambda g: g[0]):
        idx = np.asarray(members)
        diam = float(np.max(dist[np.ix_(idx, idx)])) if len(members) > 1 else 0.0
        clusters.append(
            Cluster(tuple(members), float(np.sum(ens.masses[idx])), diam)
        )
    return ClusterReport(tuple(clusters), thr, float(beta))


def merge_coincident(ens: Ensemble, tol=1e-9) -> Ensemble:
    """Fuse atoms closer than tol into single atoms (mass-weighted mean, renormalized)."""
    dist = pairwise_geodesic(ens.positions)
    dsu = _DisjointSet(ens.n)
    ii, jj = np.nonzero(np.triu(dist <= tol, k=1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        dsu.union(i, j)
    groups = {}
    for i in range(ens.n):
        groups.setdefault(dsu.find(i), []).append(i)
    positions, masses = [], []
    for members in sorted(groups.values(), key=lambda g: g[0]):
        idx = np.asarray(members)
        m = float(np.sum(ens.masses[idx]))
        if m == 0.0:
            x = ens.positions[idx[0]]
        else:
            x = ens.masses[idx] @ ens.positions[idx]
            x = x / np.linalg.norm(x)
        positions.append(x)
        masses.append(m)
    masses = np.asarray(masses)
    masses = masses / masses.sum()  # undo roundoff drift from the groupwise sums
    return Ensemble(np.asarray(positions), masses)


def c_theta(params: pc.PerceptronParams | None) -> float:
    """Perceptron size constant bounding half the angular curvature of its potential.

    sum_j |omega_j| ( L |a_j|^2 + (|sigma(0)| + L |a_j|) |a_j| ) with L the
    global Lipschitz constant of the gate (1 for the piecewise-linear gate,
    about 1.1289 for the smooth one).  Zero when params is None or all
    weights vanish.
    """
    if params is None:
        return 0.0
    L = pc.activation_lipschitz(params.activation)
    s0 = pc.activation_at_zero(params.activation)
    norms = np.linalg.norm(params.a, axis=1)
    return float(np.sum(np.abs(params.omega) * (L * norms**2 + (s0 + L * norms) * norms)))


def mass_bound(beta, lam, c_theta_value) -> float:
    """Upper bound on the mass of a cluster of diameter lam/sqrt(beta).

    (2 e^{beta - 3/2} + C) / (2 e^{beta - 3/2} + e^{beta - lam^2/2} (1 - lam^2)/2),
    capped at the trivial bound 1.  For C = 0 the ratio is beta-independent and
    equals its large-beta limit 0.57419... at lam = 1/2.
    """
    beta = float(beta)
    lam = float(lam)
    C = float(c_theta_value)
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1)")
    if C < 0:
        raise ValueError("c_theta_value must be nonnegative")
    # factor e^{beta - 3/2} out of the ratio so large beta never overflows
    repulsion = math.exp(1.5 - 0.5 * lam * lam) * 0.5 * (1.0 - lam * lam)
    scaled_c = C * math.exp(-(beta - 1.5))
    bound = (2.0 + scaled_c) / (2.0 + repulsion)
    return min(1.0, bound)


def mass_bound_limit(lam=0.5) -> float:
    """Large-beta limit of mass_bound: 4 / (4 + e^{(3 - lam^2)/2} (1 - lam^2))."""
    lam = float(lam)
    return 4.0 / (4.0 + math.exp(0.5 * (3.0 - lam * lam)) * (1.0 - lam * lam))


@dataclass(frozen=True)
class ClusterBoundFlag:
    members: tuple
    mass: float
    diameter: float
    at_tight_scale: bool      # diameter <= 1/(2 sqrt(beta))
    mass_ok: "bool | None"    # None when the bound does not apply

    def to_json_dict(self):
        return {
            "members": list(self.members),
            "mass": self.mass,
            "diameter": self.diameter,
            "at_tight_scale": self.at_tight_scale,
            "mass_ok": self.mass_ok,
        }


@dataclass(frozen=True)
class BoundsDiagnostics:
    cluster_flags: tuple
    mass_limit: float
    mass_limit_tol: float
    finite_beta_bound: float
    c_theta: float
    exclusion_constant: float
    exclusion_applicable: bool
    single_cluster: bool
    exclusion_flag: bool
    n_eps_table: tuple

    @property
    def all_masses_ok(self) -> bool:
        return all(f.mass_ok is not False for f in self.cluster_flags)

    def to_json_dict(self):
        return {
            "cluster_flags": [f.to_json_dict() for f in self.cluster_flags],
            "mass_limit": self.mass_limit,
            "mass_limit_tol": self.mass_limit_tol,
            "finite_beta_bound": self.finite_beta_bound,
            "c_theta": self.c_theta,
            "exclusion_constant": self.exclusion_constant,
            "exclusion_applicable": self.exclusion_applicable,
            "single_cluster": self.single_cluster,
            "exclusion_flag": self.exclusion_flag,
            "all_masses_ok": self.all_masses_ok,
            "n_eps_table": [dict(row) for row in self.n_eps_table],
        }


def verify_bounds(
    report: ClusterReport,
    ens: Ensemble,
    beta,
    params: pc.PerceptronParams | None = None,
    covering_arcs=None,
    mass_tol=0.02,
    eps_grid=(0.2, 0.1, 0.05, 0.01),
) -> BoundsDiagnostics:
    """Check the anti-concentration structure of a detected configuration.

    Per cluster: the mass bound applies when the cluster diameter is at most
    the tight scale 1/(2 sqrt(beta)); it is the minimum of the numerical term
    0.5742 (+ mass_tol slack) and the finite-beta bound with the run's
    perceptron constant.  A heavy-atom table compares the count of atoms of
    mass >= eps against M (1 + 2 L sqrt(beta)) Lambda / eps, where the
    covering arcs (M, L) default to the report's cluster count and largest
    diameter.  The exclusion flag marks the contradiction "perceptron too
    small for a single tight cluster, yet the whole support is one".
    """
    beta = float(beta)
    expected = cluster_threshold(beta, ens.d)
    if abs(report.threshold - expected) > 1e-12:
        raise ScaleMismatchError(
            f"report threshold {report.threshold!r} differs from the required scale {expected!r}"
        )
    tight = 0.5 / math.sqrt(beta)
    C = c_theta(params)
    finite = mass_bound(beta, 0.5, C)
    flags = []
    for c in report.clusters:
        applies = c.diameter <= tight + 1e-15
        ok = None
        if applies:
            ok = (c.mass <= MASS_LIMIT + mass_tol) and (c.mass <= finite + mass_tol)
        flags.append(ClusterBoundFlag(c.members, c.mass, c.diameter, applies, ok))

    exclusion_applicable = ens.d == 2 and C < EXCLUSION_CONSTANT
    single = (
        report.n_clusters == 1
        and len(report.clusters[0].members) == ens.n
        and report.clusters[0].diameter <= tight + 1e-15
        and ens.n >= 2
    )
    exclusion_flag = exclusion_applicable and single

    if covering_arcs is not None:
        M, L = int(covering_arcs[0]), float(covering_arcs[1])
    else:
        M = report.n_clusters
        L = max(c.diameter for c in report.clusters)
    table = []
    for eps in eps_grid:
        n_heavy = int(np.sum(ens.masses >= eps))
        cap = M * (1.0 + 2.0 * L * math.sqrt(beta)) * finite / eps
        table.append(
            (("eps", float(eps)), ("n_heavy", n_heavy), ("bound", float(cap)), ("ok", n_heavy <= cap))
        )

    return BoundsDiagnostics(
        cluster_flags=tuple(flags),
        mass_limit=MASS_LIMIT,
        mass_limit_tol=float(mass_tol),
        finite_beta_bound=finite,
        c_theta=C,
        exclusion_constant=EXCLUSION_CONSTANT,
        exclusion_applicable=exclusion_applicable,
        single_cluster=single,
        exclusion_flag=exclusion_flag,
        n_eps_table=tuple(table),
    )
