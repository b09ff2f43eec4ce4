"""The kernel acts diagonally on circle harmonics: f_hat(n) = I_n(beta) m_n.

Builds a random atomic measure, computes the Fourier coefficients of its
convolution field by quadrature, and compares them with the Bessel multiplier
times the measure moments.  Then reconstructs the measure's harmonics by
dividing the multipliers back out, and shows the parity law: symmetrizing
the measure kills every odd harmonic of the field.
"""

import numpy as np

from aml import spectral
from aml.sphere import Ensemble

rng = np.random.Generator(np.random.Philox(key=1))
theta = rng.uniform(0, 2 * np.pi, 6)
weights = rng.uniform(0.2, 1.0, 6)
ens = Ensemble.from_angles(theta, weights / weights.sum())
beta, n_max = 1.5, 12

residuals = spectral.funk_hecke_residuals(ens, beta, n_max)
print(f"multiplier identity residuals (n <= {n_max}): max = {np.max(residuals):.2e}")

moments = spectral.moments(ens, n_max)
rho = spectral.reconstruct_density(spectral.convolution_coeffs(ens, beta, n_max), beta)
err = np.abs(rho.coefficients - moments.coefficients)
print(f"{'n':>4} {'|m_n|':>10} {'I_n(beta)':>12} {'reconstruction error':>21}")
bess = spectral.bessel_i_many(n_max, beta)
for n in range(0, n_max + 1):
    print(f"{n:>4} {abs(moments[n]):>10.5f} {bess[n]:>12.3e} {err[n + n_max]:>21.2e}")

sym = Ensemble.from_angles(np.concatenate([theta, theta + np.pi]),
                           np.concatenate([weights, weights]) / (2 * weights.sum()))
f_sym = spectral.convolution_coeffs(sym, beta, n_max)
odd = max(abs(f_sym[n]) for n in range(-n_max, n_max + 1) if n % 2)
print(f"\nantipodally symmetrized measure: largest odd harmonic = {odd:.2e}")
