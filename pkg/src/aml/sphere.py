"""Geometry on the unit sphere S^{d-1}.

Tangent projection, the Euler-then-normalize retraction used by the
integrator, geodesic distances, and the weighted-atom ensemble container
(an empirical probability measure with explicit masses).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

UNIT_NORM_TOL = 1e-12
TANGENT_TOL = 1e-10


class StepTooLargeError(ValueError):
    """The Euler step x + dt*v landed too close to the origin to renormalize."""


def _vector(x):
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"expected a flat vector, got shape {a.shape}")
    return a


def check_unit(x, tol=UNIT_NORM_TOL):
    """Validate x as a unit vector and return it as a float array."""
    a = _vector(x)
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > tol:
        raise ValueError(f"not a unit vector: norm {n!r} differs from 1 by more than {tol}")
    return a


@dataclass(frozen=True)
class TangentVector:
    """A vector attached at a base point with base . vec = 0."""

    base: np.ndarray
    vec: np.ndarray

    def __post_init__(self):
        base = check_unit(self.base)
        vec = _vector(self.vec)
        if vec.shape != base.shape:
            raise ValueError("base and vec dimensions differ")
        if abs(float(base @ vec)) > TANGENT_TOL:
            raise ValueError("vector is not tangent at base")
        base = base.copy()
        vec = vec.copy()
        base.flags.writeable = False
        vec.flags.writeable = False
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "vec", vec)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))


def project_tangent(x, v) -> TangentVector:
    """Project v onto the tangent space at x: v - (x.v) x."""
    x = check_unit(x)
    v = _vector(v)
    return TangentVector(x, v - (x @ v) * x)


def project_rows(X, V):
    """Row-wise tangent projection for stacked points X and vectors V."""
    return V - np.sum(X * V, axis=1, keepdims=True) * X


def retract(x, v, dt) -> np.ndarray:
    """One Euler step along a tangent vector, renormalized to the sphere.

    Returns (x + dt*v) / |x + dt*v|.  Raises StepTooLargeError when the
    unnormalized point has norm below 1e-8 (the step wrapped past the
    origin and the retraction is meaningless).
    """
    x = check_unit(x)
    if isinstance(v, TangentVector):
        if not np.allclose(v.base, x, atol=1e-12, rtol=0.0):
            raise ValueError("tangent vector is attached at a different base point")
        v = v.vec
    else:
        v = _vector(v)
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = x + dt * v
    n = float(np.linalg.norm(y))
    if n < 1e-8:
        raise StepTooLargeError(f"step of size {dt * float(np.linalg.norm(v)):.3g} collapsed the point")
    return y / n


def retract_rows(X, V, dt):
    """Row-wise retraction; raises StepTooLargeError if any row collapses."""
    Y = X + dt * V
    n = np.linalg.norm(Y, axis=1)
    if np.any(n < 1e-8):
        raise StepTooLargeError("a particle stepped too close to the origin")
    return Y / n[:, None]


def geodesic_distance(x, y) -> float:
    """Great-circle distance arccos(x.y), with the inner product clamped to [-1, 1]."""
    x = check_unit(x)
    y = check_unit(y)
    return float(np.arccos(np.clip(x @ y, -1.0, 1.0)))


def pairwise_geodesic(X) -> np.ndarray:
    """All pairwise geodesic distances of the rows of X."""
    G = np.clip(X @ X.T, -1.0, 1.0)
    return np.arccos(G)


class Ensemble:
    """Atomic probability measure on S^{d-1}: unit positions with masses summing to 1.

    Both arrays are copied on construction and frozen; an Ensemble is a value
    type that can be shared freely across threads.
    """

    MASS_SUM_TOL = 1e-12

    def __init__(self, positions, masses):
        pos = np.array(positions, dtype=float)
        if pos.ndim != 2:
            raise ValueError("positions must be a (N, d) array")
        m = np.array(masses, dtype=float)
        if m.shape != (pos.shape[0],):
            raise ValueError("masses must be a length-N vector")
        norms = np.linalg.norm(pos, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ValueError(f"positions must be unit vectors (worst deviation {worst:.3g})")
        if np.any(m < 0.0):
            raise ValueError("masses must be nonnegative")
        if abs(float(m.sum()) - 1.0) > self.MASS_SUM_TOL:
            raise ValueError(f"masses must sum to 1, got {float(m.sum())!r}")
        pos.flags.writeable = False
        m.flags.writeable = False
        self._positions = pos
        self._masses = m

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    @property
    def masses(self) -> np.ndarray:
        return self._masses

    @property
    def n(self) -> int:
        return self._positions.shape[0]

    @property
    def d(self) -> int:
        return self._positions.shape[1]

    def copy(self) -> "Ensemble":
        return Ensemble(self._positions, self._masses)

    def with_positions(self, positions) -> "Ensemble":
        """New ensemble with the same masses (transport step, mass conserved)."""
        ens = Ensemble.__new__(Ensemble)
        pos = np.array(positions, dtype=float)
        norms = np.linalg.norm(pos, axis=1)
        if pos.shape != self._positions.shape or np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValueError("positions must keep the shape and stay on the sphere")
        pos.flags.writeable = False
        ens._positions = pos
        ens._masses = self._masses  # shared, frozen: sums identically across steps
        return ens

    @classmethod
    def from_angles(cls, thetas, masses=None) -> "Ensemble":
        """Circle ensemble from angles; equal masses by default."""
        t = np.asarray(thetas, dtype=float)
        pos = np.column_stack([np.cos(t), np.sin(t)])
        if masses is None:
            masses = np.full(t.shape[0], 1.0 / t.shape[0])
        return cls(pos, masses)

    def angles(self) -> np.ndarray:
        """Angular coordinates in [0, 2*pi) (d = 2 only)."""
        if self.d != 2:
            raise ValueError("angles are defined only on the circle")
        return np.mod(np.arctan2(self._positions[:, 1], self._positions[:, 0]), 2.0 * np.pi)

    # -- CSV serialization: header `idx,mass,x0,...,x{d-1}`, round-trip floats --

    def to_csv(self, path_or_buf):
        cols = ",".join(f"x{k}" for k in range(self.d))
        lines = [f"idx,mass,{cols}"]
        for i in range(self.n):
            coords = ",".join(repr(float(v)) for v in self._positions[i])
            lines.append(f"{i},{repr(float(self._masses[i]))},{coords}")
        text = "\n".join(lines) + "\n"
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            with open(path_or_buf, "w") as fh:
                fh.write(text)
        else:
            path_or_buf.write(text)

    @classmethod
    def from_csv(cls, path_or_buf) -> "Ensemble":
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            with open(path_or_buf) as fh:
                text = fh.read()
        else:
            text = path_or_buf.read()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        if header[:2] != ["idx", "mass"]:
            raise ValueError("malformed ensemble CSV header")
        d = len(header) - 2
        positions = []
        masses = []
        for ln in lines[1:]:
            parts = ln.split(",")
            masses.append(float(parts[1]))
            positions.append([float(p) for p in parts[2 : 2 + d]])
        return cls(np.asarray(positions), np.asarray(masses))

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()
