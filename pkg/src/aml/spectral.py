"""Circle-Fourier analysis of the exponential kernel.

The zonal kernel acts diagonally on circular harmonics: with the convention
g_hat(n) = (1/2 pi) int g(t) exp(-i n t) dt, the convolution field
f(x) = int exp(beta x.y) dmu(y) of an atomic measure mu satisfies
f_hat(n) = I_|n|(beta) * m_n where m_n = sum_i m_i exp(-i n theta_i) and I_n
is the modified Bessel function of the first kind.  This module computes the
Bessel multipliers (power series below 20, Miller downward recurrence above),
measure moments, quadrature Fourier coefficients of the field, and the
density reconstruction that divides the multipliers back out.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .sphere import Ensemble

BESSEL_MAX_ORDER = 200
BESSEL_MAX_ARG = 700.0
BESSEL_SERIES_CUTOFF = 20.0
DEFAULT_GRID = 4096


class AmplificationWarning(UserWarning):
    """Dividing by a Bessel multiplier small enough to amplify noise."""


def _check_bessel_args(n, beta):
    if int(n) != n or n < 0:
        raise ValueError("order must be a nonnegative integer")
    n = int(n)
    beta = float(beta)
    if n > BESSEL_MAX_ORDER:
        raise ValueError(f"order {n} exceeds the supported maximum {BESSEL_MAX_ORDER}")
    if beta < 0.0 or beta > BESSEL_MAX_ARG:
        raise ValueError(f"argument {beta!r} outside [0, {BESSEL_MAX_ARG:.0f}]")
    return n, beta


def _bessel_series_one(n, beta):
    # I_n(z) = sum_m (z/2)^{2m+n} / (m! (m+n)!), summed to relative 1e-18
    x = 0.5 * beta
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    log_t0 = n * math.log(x) - math.lgamma(n + 1.0)
    if log_t0 < -745.0:
        return 0.0
    term = math.exp(log_t0)
    total = term
    x2 = x * x
    for m in range(1, 1000):
        term *= x2 / (m * (m + n))
        total += term
        if term < 1e-18 * total:
            break
    return total


def _bessel_miller_all(n_max, beta):
    """I_0..I_n_max by downward recurrence, normalized by I_0 + 2 sum I_k = e^beta."""
    start = int(max(n_max, beta)) + 60 + int(4.0 * math.sqrt(max(n_max, beta)))
    p_up = 0.0          # unnormalized I_{k+1}
    p = 1e-280          # unnormalized I_k at k = start
    out = np.zeros(n_max + 1)
    total = 0.0
    for k in range(start, -1, -1):
        if k <= n_max:
            out[k] = p
        if k > 0:
            total += 2.0 * p
            p_down = p_up + (2.0 * k / beta) * p
            p_up, p = p, p_down
            if p > 1e250:  # rescale to dodge overflow; only ratios matter
                p *= 1e-250
                p_up *= 1e-250
                total *= 1e-250
                out *= 1e-250
        else:
            total += p
    # total approximates e^beta up to the common scale; take ratios first so
    # the normalization never overflows even when e^beta is near float max
    return (out / total) * math.exp(beta)


def bessel_i(n, beta) -> float:
    """Modified Bessel function of the first kind I_n(beta), n <= 200, beta <= 700."""
    n, beta = _check_bessel_args(n, beta)
    if beta <= BESSEL_SERIES_CUTOFF:
        return _bessel_series_one(n, beta)
    return float(_bessel_miller_all(n, beta)[n])


def bessel_i_many(n_max, beta) -> np.ndarray:
    """Array [I_0(beta), ..., I_n_max(beta)]."""
    n_max, beta = _check_bessel_args(n_max, beta)
    if beta <= BESSEL_SERIES_CUTOFF:
        return np.array([_bessel_series_one(n, beta) for n in range(n_max + 1)])
    return _bessel_miller_all(n_max, beta)


@dataclass(frozen=True)
class FourierSeries:
    """Coefficients c_n for n in [-n_max, n_max] under (1/2 pi) int g e^{-int}."""

    coefficients: np.ndarray
    n_max: int

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (2 * self.n_max + 1,):
            raise ValueError("coefficient array must have length 2*n_max + 1")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    def __getitem__(self, n) -> complex:
        if abs(n) > self.n_max:
            raise IndexError(f"harmonic {n} outside [-{self.n_max}, {self.n_max}]")
        return complex(self.coefficients[n + self.n_max])

    def conjugate_symmetry_defect(self) -> float:
        c = self.coefficients
        return float(np.max(np.abs(c - np.conj(c[::-1]))))

    def to_jsonable(self):
        return [[float(v.real), float(v.imag)] for v in self.coefficients]

    @classmethod
    def from_jsonable(cls, payload) -> "FourierSeries":
        c = np.array([complex(re, im) for re, im in payload])
        return cls(c, (len(c) - 1) // 2)


def moments(ens: Ensemble, n_max) -> FourierSeries:
    """Complex moments m_n = sum_i m_i exp(-i n theta_i) of a circle measure."""
    if ens.d != 2:
        raise ValueError("moments are defined on the circle only")
    n_max = int(n_max)
    theta = ens.angles()
    ns = np.arange(-n_max, n_max + 1)
    phase = np.exp(-1j * np.outer(ns, theta))
    return FourierSeries(phase @ ens.masses, n_max)


def convolution_field_values(ens: Ensemble, beta, grid_size=DEFAULT_GRID):
    """f(t_k) = sum_i m_i exp(beta cos(t_k - theta_i)) on a uniform grid."""
    beta = float(beta)
    if beta <= 0:
        raise ValueError("beta must be positive")
    theta = ens.angles()
    grid = 2.0 * np.pi * np.arange(grid_size) / grid_size
    C = np.cos(grid[:, None] - theta[None, :])
    return grid, np.exp(beta * C) @ ens.masses


def convolution_coeffs(ens: Ensemble, beta, n_max, grid_size=DEFAULT_GRID) -> FourierSeries:
    """Fourier coefficients of the convolution field by trapezoidal quadrature.

    The uniform periodic trapezoid rule is spectrally accurate here (the
    integrand is entire), so a 4096-point grid resolves n <= 64 to roundoff.
    """
    n_max = int(n_max)
    if n_max > 64:
        raise ValueError("n_max above 64 needs a larger quadrature grid")
    _, values = convolution_field_values(ens, beta, grid_size)
    fft = np.fft.fft(values) / grid_size
    coeff = np.empty(2 * n_max + 1, dtype=complex)
    for n in range(-n_max, n_max + 1):
        coeff[n + n_max] = fft[n % grid_size]
    return FourierSeries(coeff, n_max)


def funk_hecke_residuals(ens: Ensemble, beta, n_max, grid_size=DEFAULT_GRID) -> np.ndarray:
    """|f_hat(n) - I_|n|(beta) m_n| for n in [-n_max, n_max]."""
    f = convolution_coeffs(ens, beta, n_max, grid_size)
    m = moments(ens, n_max)
    bess = bessel_i_many(n_max, beta)
    ns = np.arange(-n_max, n_max + 1)
    predicted = bess[np.abs(ns)] * m.coefficients
    return np.abs(f.coefficients - predicted)


def reconstruct_density(coeffs: FourierSeries, beta) -> FourierSeries:
    """Divide the multipliers back out: rho_hat(n) = f_hat(n) / I_|n|(beta).

    rho is the density with respect to the normalized uniform measure on the
    circle.  Warns when a multiplier drops below 1e-280 and the division
    amplifies whatever noise the coefficients carry.
    """
    bess = bessel_i_many(coeffs.n_max, beta)
    ns = np.arange(-coeffs.n_max, coeffs.n_max + 1)
    denom = bess[np.abs(ns)]
    if np.any(denom < 1e-280):
        warnings.warn(
            "Bessel multiplier below 1e-280: reconstructed harmonics are noise-amplified",
            AmplificationWarning,
        )
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rho = coeffs.coefficients / denom
    return FourierSeries(rho, coeffs.n_max)


def spectral_report(ens: Ensemble, beta, n_max, grid_size=DEFAULT_GRID) -> dict:
    """JSON-ready report {beta, n_max, moments, conv_coeffs, residual_max}."""
    m = moments(ens, n_max)
    f = convolution_coeffs(ens, beta, n_max, grid_size)
    res = funk_hecke_residuals(ens, beta, n_max, grid_size)
    return {
        "beta": float(beta),
        "n_max": int(n_max),
        "moments": m.to_jsonable(),
        "conv_coeffs": f.to_jsonable(),
        "residual_max": float(np.max(res)),
    }
