"""Perceptron drift field on the sphere and its scalar potential.

A bank of neurons (a_j, omega_j, b_j) with activation sigma induces the
tangential drift  u(x) = P_x [ sum_j omega_j sigma(a_j.x + b_j) a_j ]  and,
through the primitive phi with phi' = 2 sigma and phi(0) = 0, the potential
v(x) = sum_j omega_j phi(a_j.x + b_j) whose half-gradient is u.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from .sphere import TangentVector, check_unit, project_tangent

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Global slope bound of the smooth gate s*Phi(s); the maximum sits at s = sqrt(2).
# Regenerated by a test that maximizes the slope numerically.
GELU_LIPSCHITZ = 1.128904145185155


class KinkWarning(UserWarning):
    """A piecewise-linear gate is being differentiated at (or next to) its kink."""


class ActivationKind(Enum):
    RELU = "relu"
    GELU = "gelu"

    @classmethod
    def coerce(cls, value) -> "ActivationKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def activation(kind, s):
    """Gate value and slope at s.

    ReLU returns (max(s, 0), 1_{s>0}); the subgradient at 0 is pinned to 0 so
    downstream second-derivative assembly is deterministic.  The smooth gate is
    s*Phi(s) with Phi the standard normal CDF, slope Phi(s) + s*N(s).
    """
    kind = ActivationKind.coerce(kind)
    s = np.asarray(s, dtype=float)
    if kind is ActivationKind.RELU:
        value = np.maximum(s, 0.0)
        deriv = (s > 0.0).astype(float)
    else:
        cdf = 0.5 * (1.0 + special.erf(s / math.sqrt(2.0)))
        pdf = np.exp(-0.5 * s * s) / SQRT_2PI
        value = s * cdf
        deriv = cdf + s * pdf
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def primitive(kind, s):
    """Primitive phi with phi(0) = 0 and phi' = 2 sigma.

    ReLU: phi(s) = max(s, 0)^2.  Smooth gate:
    phi(s) = s^2/2 + (s^2 - 1)/2 * erf(s/sqrt(2)) + s * exp(-s^2/2)/sqrt(2*pi),
    which differentiates back to s*(1 + erf(s/sqrt(2))) = 2 sigma(s).
    """
    kind = ActivationKind.coerce(kind)
    s = np.asarray(s, dtype=float)
    if kind is ActivationKind.RELU:
        out = np.where(s > 0.0, s * s, 0.0)
    else:
        erf = special.erf(s / math.sqrt(2.0))
        out = 0.5 * s * s + 0.5 * (s * s - 1.0) * erf + s * np.exp(-0.5 * s * s) / SQRT_2PI
    if out.ndim == 0:
        return float(out)
    return out


def activation_lipschitz(kind) -> float:
    kind = ActivationKind.coerce(kind)
    return 1.0 if kind is ActivationKind.RELU else GELU_LIPSCHITZ


def activation_at_zero(kind) -> float:
    return 0.0  # both gates vanish at the origin


@dataclass(frozen=True)
class PerceptronParams:
    """Immutable neuron bank: rows of `a` with scalar weights `omega`, biases `b`."""

    a: np.ndarray
    omega: np.ndarray
    b: np.ndarray
    activation: ActivationKind = ActivationKind.RELU

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        kind = ActivationKind.coerce(self.activation)
        if self.b is None:
            b = np.zeros(a.shape[0])
        else:
            b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape[0] < 1:
            raise ValueError("at least one neuron is required")
        if omega.shape != (a.shape[0],) or b.shape != (a.shape[0],):
            raise ValueError("a, omega, b must agree on the number of neurons")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(omega)) and np.all(np.isfinite(b))):
            raise ValueError("neuron parameters must be finite")
        for arr in (a, omega, b):
            arr.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "activation", kind)

    @property
    def n_neurons(self) -> int:
        return self.a.shape[0]

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    @property
    def neurons(self):
        """Neurons as (a_j, omega_j, b_j) tuples."""
        return [(self.a[j].copy(), float(self.omega[j]), float(self.b[j])) for j in range(self.n_neurons)]

    @classmethod
    def from_neurons(cls, neurons, activation=ActivationKind.RELU) -> "PerceptronParams":
        a = np.asarray([n[0] for n in neurons], dtype=float)
        omega = np.asarray([n[1] for n in neurons], dtype=float)
        b = np.asarray([n[2] if len(n) > 2 else 0.0 for n in neurons], dtype=float)
        return cls(a, omega, b, activation)

    # -- JSON round trip: {"activation": ..., "neurons": [{"a": [...], "omega": w, "b": c}]} --

    def to_json_dict(self) -> dict:
        return {
            "activation": self.activation.value,
            "neurons": [
                {"a": [float(v) for v in self.a[j]], "omega": float(self.omega[j]), "b": float(self.b[j])}
                for j in range(self.n_neurons)
            ],
        }

    @classmethod
    def from_json_dict(cls, payload) -> "PerceptronParams":
        neurons = payload["neurons"]
        a = np.asarray([n["a"] for n in neurons], dtype=float)
        omega = np.asarray([n["omega"] for n in neurons], dtype=float)
        b = np.asarray([n.get("b", 0.0) for n in neurons], dtype=float)
        return cls(a, omega, b, ActivationKind.coerce(payload["activation"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PerceptronParams":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def potential(params: PerceptronParams, x) -> float:
    """v(x) = sum_j omega_j phi(a_j.x + b_j)."""
    x = check_unit(x)
    s = params.a @ x + params.b
    return float(params.omega @ primitive(params.activation, s))


def potential_all(params: PerceptronParams, X) -> np.ndarray:
    S = X @ params.a.T + params.b
    return primitive(params.activation, S) @ params.omega


def drift(params: PerceptronParams, x) -> TangentVector:
    """u(x) = P_x sum_j omega_j sigma(a_j.x + b_j) a_j; equals grad v(x) / 2."""
    x = check_unit(x)
    s = params.a @ x + params.b
    sigma, _ = activation(params.activation, s)
    g = (params.omega * np.atleast_1d(sigma)) @ params.a
    return project_tangent(x, g)


def drift_all(params: PerceptronParams, X) -> np.ndarray:
    S = X @ params.a.T + params.b
    sigma, _ = activation(params.activation, S)
    G = (sigma * params.omega) @ params.a
    return G - np.sum(X * G, axis=1, keepdims=True) * X


def circle_potential_dd(params: PerceptronParams, thetas, warn_kinks=True, kink_tol=1e-9) -> np.ndarray:
    """Second angular derivative of v along the circle, evaluated analytically.

    With x(t) = (cos t, sin t), tau = x' and x'' = -x:
    (v o x)''(t) = 2 sum_j omega_j [ sigma'(s_j) (a_j.tau)^2 - sigma(s_j) (a_j.x) ],
    s_j = a_j.x + b_j.  For the piecewise-linear gate the slope at the kink is
    the pinned subgradient 0; a KinkWarning is attached when some |s_j| < kink_tol.
    """
    if params.dim != 2:
        raise ValueError("circle second derivative needs 2-dimensional neurons")
    t = np.atleast_1d(np.asarray(thetas, dtype=float))
    X = np.column_stack([np.cos(t), np.sin(t)])
    T = np.column_stack([-np.sin(t), np.cos(t)])
    AX = X @ params.a.T
    S = AX + params.b
    AT = T @ params.a.T
    sigma, dsigma = activation(params.activation, S)
    if warn_kinks and params.activation is ActivationKind.RELU and np.any(np.abs(S) < kink_tol):
        warnings.warn("gate evaluated at a kink; using the one-sided slope 0", KinkWarning)
    vdd = 2.0 * ((dsigma * AT**2 - sigma * AX) @ params.omega)
    return vdd
