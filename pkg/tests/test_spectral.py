import math

import numpy as np
import pytest
from scipy import special

from aml import spectral
from aml.spectral import (
    AmplificationWarning,
    FourierSeries,
    bessel_i,
    bessel_i_many,
    convolution_coeffs,
    funk_hecke_residuals,
    moments,
    reconstruct_density,
)
from aml.sphere import Ensemble


def series_oracle(n, z, terms=30):
    # direct truncation of sum_m (z/2)^{2m+n} / (m! (m+n)!)
    total = 0.0
    for m in range(terms):
        total += (z / 2.0) ** (2 * m + n) / (math.factorial(m) * math.factorial(m + n))
    return total


def test_bessel_at_zero():
    assert bessel_i(0, 0.0) == 1.0
    assert bessel_i(1, 0.0) == 0.0


def test_bessel_matches_series_oracle():
    assert abs(bessel_i(0, 1.0) - series_oracle(0, 1.0)) < 1e-12
    assert abs(bessel_i(1, 1.0) - series_oracle(1, 1.0)) < 1e-12
    assert math.isclose(bessel_i(0, 1.0), 1.2660658, rel_tol=1e-7)
    assert math.isclose(bessel_i(1, 1.0), 0.5651591, rel_tol=1e-7)


def test_bessel_recurrence_identity():
    for beta in (1.0, 10.0, 100.0):
        I = bessel_i_many(51, beta)
        for n in range(1, 50):
            lhs = I[n - 1] - I[n + 1]
            rhs = (2 * n / beta) * I[n]
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


def test_bessel_positivity():
    for beta in (0.5, 5.0, 50.0, 300.0):
        assert np.all(bessel_i_many(80, beta) > 0.0)


def test_bessel_series_miller_crossband_agreement():
    for beta in (15.0, 18.0, 20.0, 22.0, 25.0):
        for n in (0, 3, 10, 40):
            s = spectral._bessel_series_one(n, beta)
            m = spectral._bessel_miller_all(n, beta)[n]
            assert abs(s - m) <= 1e-11 * max(s, m)


def test_bessel_against_scipy_scaled():
    for beta in (0.5, 20.0, 100.0, 700.0):
        for n in (0, 1, 7, 50, 200):
            ref = special.ive(n, beta)
            mine = bessel_i(n, beta) * math.exp(-beta)
            if ref > 0:
                assert abs(mine - ref) <= 1e-11 * ref


def test_bessel_range_errors():
    with pytest.raises(ValueError):
        bessel_i(201, 1.0)
    with pytest.raises(ValueError):
        bessel_i(0, 701.0)
    with pytest.raises(ValueError):
        bessel_i(-1, 1.0)


def test_moments_dirac():
    m = moments(Ensemble.from_angles([0.0]), 8)
    assert np.allclose(m.coefficients, 1.0)


def test_moments_uniform_grid_roots_of_unity():
    n_max = 6
    grid = Ensemble.from_angles(2 * np.pi * np.arange(16) / 16)
    m = moments(grid, n_max)
    assert abs(m[0] - 1.0) < 1e-14
    for n in range(1, n_max + 1):
        assert abs(m[n]) < 1e-13 and abs(m[-n]) < 1e-13


def test_moments_two_atoms():
    m = moments(Ensemble.from_angles([0.0, np.pi]), 4)
    assert abs(m[1]) < 1e-14
    assert abs(m[2] - 1.0) < 1e-13


def test_conjugate_symmetry():
    rng = np.random.Generator(np.random.Philox(key=41))
    ens = Ensemble.from_angles(rng.uniform(0, 2 * np.pi, 6))
    assert moments(ens, 12).conjugate_symmetry_defect() < 1e-12
    assert convolution_coeffs(ens, 2.0, 12).conjugate_symmetry_defect() < 1e-12


def test_convolution_dirac_gives_bessel_multipliers():
    f = convolution_coeffs(Ensemble.from_angles([0.0]), 1.0, 16)
    for n in range(-16, 17):
        assert abs(f[n] - series_oracle(abs(n), 1.0)) < 1e-10


def test_convolution_dense_uniform_is_flat():
    grid = Ensemble.from_angles(2 * np.pi * np.arange(512) / 512)
    f = convolution_coeffs(grid, 2.0, 8)
    assert abs(f[0] - bessel_i(0, 2.0)) < 1e-10
    for n in range(1, 9):
        assert abs(f[n]) < 1e-10


def test_antipodal_symmetrization_kills_odd_harmonics():
    rng = np.random.Generator(np.random.Philox(key=43))
    theta = rng.uniform(0, 2 * np.pi, 5)
    sym = np.concatenate([theta, theta + np.pi])
    ens = Ensemble.from_angles(sym)
    f = convolution_coeffs(ens, 1.5, 15)
    for n in range(-15, 16):
        if n % 2 != 0:
            assert abs(f[n]) <= 1e-10


def test_funk_hecke_residuals_random_measures():
    rng = np.random.Generator(np.random.Philox(key=44))
    for beta in (0.5, 1.0, 5.0):
        theta = rng.uniform(0, 2 * np.pi, 7)
        w = rng.uniform(0.2, 1.0, 7)
        ens = Ensemble.from_angles(theta, w / w.sum())
        res = funk_hecke_residuals(ens, beta, 20)
        assert float(np.max(res)) <= 1e-8


def test_reconstruct_density_from_cosine_density():
    # density 1 + cos(theta) w.r.t. normalized uniform measure; field coefficients
    # computed by an independent quadrature of the defining integral
    beta = 1.0
    n_max = 8
    M = 4096
    grid = 2 * np.pi * np.arange(M) / M
    density = 1.0 + np.cos(grid)
    f_vals = np.empty(M)
    for k, t in enumerate(grid):
        f_vals[k] = np.mean(np.exp(beta * np.cos(t - grid)) * density)
    fft = np.fft.fft(f_vals) / M
    coeff = np.array([fft[n % M] for n in range(-n_max, n_max + 1)])
    rho = reconstruct_density(FourierSeries(coeff, n_max), beta)
    assert abs(rho[0] - 1.0) < 1e-8
    assert abs(rho[1] - 0.5) < 1e-8
    assert abs(rho[-1] - 0.5) < 1e-8
    for n in range(2, n_max + 1):
        assert abs(rho[n]) < 1e-6


def test_reconstruct_uniform_is_indicator():
    grid = Ensemble.from_angles(2 * np.pi * np.arange(256) / 256)
    rho = reconstruct_density(convolution_coeffs(grid, 1.0, 8), 1.0)
    assert abs(rho[0] - 1.0) < 1e-10
    for n in range(1, 9):
        assert abs(rho[n]) < 1e-8


def test_round_trip_recovers_moments():
    # the quadrature holds f_hat to ~1e-17 absolute, so dividing out I_n(beta)
    # amplifies that floor by 1/I_n; harmonics keep the 1e-8 target as long as
    # the multiplier stays above the amplified noise (n <= 8 at beta = 1)
    rng = np.random.Generator(np.random.Philox(key=45))
    theta = rng.uniform(0, 2 * np.pi, 9)
    w = rng.uniform(0.1, 1.0, 9)
    ens = Ensemble.from_angles(theta, w / w.sum())
    m = moments(ens, 16)
    rho = reconstruct_density(convolution_coeffs(ens, 1.0, 16), 1.0)
    err = np.abs(rho.coefficients - m.coefficients)
    bess = bessel_i_many(16, 1.0)
    for n in range(-16, 17):
        floor = 1e-15 * math.e / bess[abs(n)]
        assert err[n + 16] <= max(1e-8, floor)
    for n in range(-8, 9):
        assert err[n + 16] <= 1e-8


def test_amplification_warning():
    n_max = 200
    coeff = np.zeros(2 * n_max + 1, dtype=complex)
    coeff[n_max] = 1.0
    assert spectral.bessel_i(200, 0.5) < 1e-280
    with pytest.warns(AmplificationWarning):
        reconstruct_density(FourierSeries(coeff, n_max), 0.5)


def test_spectral_report_schema():
    ens = Ensemble.from_angles([0.2, 2.0, 4.4])
    payload = spectral.spectral_report(ens, 1.0, 10)
    assert set(payload) == {"beta", "n_max", "moments", "conv_coeffs", "residual_max"}
    assert len(payload["moments"]) == 21
    assert payload["residual_max"] <= 1e-8
