"""Stability of converged descent states: the angular Hessian test.

Integrate to the stopping rule, fuse atoms that landed on top of each other,
drive the configuration to an exact critical point with a damped Newton
polish, and check that the angular Hessian of the energy is positive
semidefinite up to a relative floor; the limit of a descent flow should be a
stable configuration.
"""

import numpy as np

from aml import attention, clusters, dynamics
from aml.sphere import Ensemble

beta = 16.0
params = dynamics.sample_perceptron(2, activation="gelu", seed=5)
config = dynamics.DynamicsConfig(beta=beta, mode="descent", time_scale="kernel_peak",
                                 max_steps=100_000)
result = dynamics.run(config, dynamics.uniform_ensemble(256, 2, seed=42), params,
                      store_state_every=1000)
print(f"run: {result.reason} after {result.steps} steps")

merged = clusters.merge_coincident(result.final, tol=1e-8)
polished = dynamics.polish_minimum(merged, beta, params)
residual = np.max(np.linalg.norm(
    dynamics.velocity(dynamics.DynamicsConfig(beta=beta, mode="descent",
                                              time_scale="kernel_peak"), polished, params),
    axis=1))
print(f"atoms: {result.final.n} -> merged {merged.n} -> polished {polished.n}, "
      f"peak-relative residual field {residual:.2e}")

H = attention.hessian_d2(polished, beta, params)
passed, min_eig = attention.sopd_check(H, 1e-6)
eigs = np.linalg.eigvalsh(H)
print(f"Hessian spectrum: min {eigs[0]:.3e}, max {eigs[-1]:.3e}")
print(f"second-order positivity at tolerance 1e-6: {'PASS' if passed else 'FAIL'}")

# the textbook two-antipodal-atom configuration, by hand
anti = attention.hessian_d2(Ensemble(np.array([[1.0, 0.0], [-1.0, 0.0]]), [0.5, 0.5]), 1.0)
print("\ntwo antipodal atoms at beta = 1:")
print(anti, "-> eigenvalues", np.linalg.eigvalsh(anti), "(expected {0, e^-1/2})")
