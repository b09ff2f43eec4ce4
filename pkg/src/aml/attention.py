"""Exponential interaction kernel on the sphere: energies, fields, curvature.

The pair kernel is exp(beta * x.y).  This module evaluates the interaction
energy and its first variation, the induced tangential field in both the
plain and the softmax-normalized form, the angular Hessian of the energy at
an atomic configuration on the circle, and the concavity radius / curvature
envelopes of the kernel profile exp(beta * cos(theta)).
"""

from __future__ import annotations

import math

import numpy as np

from . import perceptron as pc
from .sphere import Ensemble, TangentVector, check_unit, pairwise_geodesic

MAX_EXPONENT = 700.0


class KernelOverflowError(OverflowError):
    """The kernel exponent beta * x.y exceeded the double-precision guard."""


class CoincidentAtomsError(ValueError):
    """Two atoms are closer than the resolution of the angular Hessian."""


def _check_beta(beta) -> float:
    beta = float(beta)
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    return beta


def _guard_exponent(value):
    if value > MAX_EXPONENT:
        raise KernelOverflowError(f"kernel exponent {value:.3g} exceeds the {MAX_EXPONENT:.0f} guard")


def kernel_derivs(beta, theta):
    """Profile K(t) = exp(beta cos t) and its first two derivatives at theta.

    K'  = -beta sin(t) K
    K'' = K * (beta^2 sin^2 t - beta cos t)
    """
    beta = _check_beta(beta)
    theta = float(theta)
    c = math.cos(theta)
    s = math.sin(theta)
    _guard_exponent(beta * c)
    K = math.exp(beta * c)
    K1 = -beta * s * K
    K2 = K * (beta * beta * s * s - beta * c)
    return K, K1, K2


def kernel_second_derivative_grid(beta, thetas) -> np.ndarray:
    """Vectorized K'' on an array of angles (same formula as kernel_derivs)."""
    beta = _check_beta(beta)
    t = np.asarray(thetas, dtype=float)
    c = np.cos(t)
    _guard_exponent(beta * float(np.max(c)))
    return np.exp(beta * c) * (beta * beta * np.sin(t) ** 2 - beta * c)


def theta_c(beta) -> float:
    """Concavity radius of the kernel profile: the unique zero of K'' in (0, pi).

    Closed form arccos((sqrt(1 + 4 beta^2) - 1) / (2 beta)), evaluated in the
    cancellation-free form 2 beta / (sqrt(1 + 4 beta^2) + 1).  Tends to pi/2 as
    beta -> 0 and behaves like 1/sqrt(beta) for large beta.
    """
    beta = _check_beta(beta)
    c = 2.0 * beta / (math.sqrt(1.0 + 4.0 * beta * beta) + 1.0)
    return math.acos(c)


def curvature_bounds(beta, lam):
    """Large-beta envelopes for K'' used by the cluster mass bound.

    Returns (concave_bound, max_tail_bound):
      concave_bound  >= sup of K'' over |t| <= lam * theta_c  (a negative number),
      max_tail_bound >= max of K'' over [theta_c, pi].
    """
    beta = _check_beta(beta)
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1)")
    _guard_exponent(beta)
    concave = -math.exp(-0.5 * lam * lam) * 0.5 * (1.0 - lam * lam) * beta * math.exp(beta)
    max_tail = 2.0 * beta * math.exp(beta - 1.5)
    return concave, max_tail


def first_variation_weight(ens: Ensemble, x, beta) -> float:
    """w(x) = (1/beta) sum_j m_j exp(beta x.x_j); strictly positive."""
    beta = _check_beta(beta)
    x = check_unit(x)
    g = ens.positions @ x
    _guard_exponent(beta * float(np.max(g)))
    return float(ens.masses @ np.exp(beta * g)) / beta


def attention_field(ens: Ensemble, x, beta, normalized=False, practical_softmax=False) -> TangentVector:
    """Interaction field at x.

    Plain form: P_x sum_j m_j exp(beta x.x_j) x_j.  With normalized=True the
    field is divided by the first-variation weight w(x), which carries a net
    factor beta relative to the projected softmax average; practical_softmax
    divides that beta back out for comparison runs.
    """
    beta = _check_beta(beta)
    x = check_unit(x)
    g = ens.positions @ x
    _guard_exponent(beta * float(np.max(g)))
    w = ens.masses * np.exp(beta * g)
    vec = w @ ens.positions
    vec = vec - (x @ vec) * x
    if normalized:
        denom = float(np.sum(w)) / beta
        if practical_softmax:
            denom *= beta
        vec = vec / denom
    elif practical_softmax:
        raise ValueError("practical_softmax applies to the normalized field only")
    return TangentVector(x, vec)


def total_energy(ens: Ensemble, beta, params: pc.PerceptronParams | None = None) -> float:
    """E = (1/2 beta) sum_{ij} m_i m_j exp(beta x_i.x_j) + (1/2) sum_i m_i v(x_i)."""
    beta = _check_beta(beta)
    _guard_exponent(beta)  # x.y <= 1 on the sphere
    G = ens.positions @ ens.positions.T
    e = float(ens.masses @ np.exp(beta * G) @ ens.masses) / (2.0 * beta)
    if params is not None:
        e += 0.5 * float(ens.masses @ pc.potential_all(params, ens.positions))
    return e


def hessian_d2(ens: Ensemble, beta, params: pc.PerceptronParams | None = None) -> np.ndarray:
    """Angular Hessian of the energy at an atomic circle configuration.

    Entries (angles theta_i, masses m_i):
      H_ij = -(1/beta) m_i m_j K''(theta_i - theta_j)           for i != j,
      H_ii =  (1/beta) m_i sum_{k != i} m_k K''(theta_i - theta_k)
             + (1/2) m_i (v o x)''(theta_i).
    Atoms must be pairwise distinct within 1e-9 (merge coincident atoms first).
    """
    beta = _check_beta(beta)
    if ens.d != 2:
        raise ValueError("the angular Hessian is defined on the circle only")
    theta = ens.angles()
    if ens.n > 1:
        dist = pairwise_geodesic(ens.positions)
        off = dist[~np.eye(ens.n, dtype=bool)]
        if float(np.min(off)) < 1e-9:
            raise CoincidentAtomsError("coincident atoms: merge them before assembling the Hessian")
    delta = theta[:, None] - theta[None, :]
    K2 = kernel_second_derivative_grid(beta, delta)
    K2 = 0.5 * (K2 + K2.T)
    m = ens.masses
    M2 = np.outer(m, m) * K2 / beta
    H = -M2
    np.fill_diagonal(H, 0.0)
    diag = M2.sum(axis=1) - np.diag(M2)
    if params is not None:
        vdd = pc.circle_potential_dd(params, theta)
        diag = diag + 0.5 * m * vdd
    H[np.diag_indices(ens.n)] = diag
    return H


def hessian_to_csv(H: np.ndarray, path):
    """Row-major CSV export with header `n=<N>`."""
    n = H.shape[0]
    lines = [f"n={n}"]
    for i in range(n):
        lines.append(",".join(repr(float(v)) for v in H[i]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def sopd_check(H: np.ndarray, tol):
    """Positive-semidefiniteness up to a relative floor.

    Passes iff the smallest eigenvalue is >= -tol * (1 + spectral radius).
    Returns (passed, min_eigenvalue).
    """
    H = np.asarray(H, dtype=float)
    if H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    if not np.allclose(H, H.T, atol=1e-10 * (1.0 + float(np.max(np.abs(H))))):
        raise ValueError("H must be symmetric")
    tol = float(tol)
    if tol < 0.0:
        raise ValueError("tol must be nonnegative")
    eigs = np.linalg.eigvalsh(0.5 * (H + H.T))
    min_eig = float(eigs[0])
    radius = float(max(abs(eigs[0]), abs(eigs[-1])))
    return min_eig >= -tol * (1.0 + radius), min_eig
