"""Anti-concentration: cluster masses against the 0.5742 line.

Sweeps the descent flow over a few inverse temperatures with a fixed smooth
perceptron and prints every cluster that sits at the tight interaction scale
1/(2 sqrt(beta)), together with the asymptotic and finite-beta mass bounds.
No tight cluster should ever carry more than the bound.
"""

import math

from aml import clusters, dynamics

params = dynamics.sample_perceptron(2, activation="gelu", seed=5)
C = clusters.c_theta(params)
print(f"perceptron size constant C_theta = {C:.3f}")
print(f"asymptotic mass limit (lambda = 1/2): {clusters.mass_bound_limit():.5f}\n")

for beta in (9.0, 25.0, 49.0):
    config = dynamics.DynamicsConfig(beta=beta, mode="descent", time_scale="kernel_peak",
                                     max_steps=100_000)
    init = dynamics.uniform_ensemble(256, 2, seed=42)
    result = dynamics.run(config, init, params, store_state_every=1000)
    report = clusters.detect(result.final, beta, 2)
    diag = clusters.verify_bounds(report, result.final, beta, params)
    finite = clusters.mass_bound(beta, 0.5, C)
    tight = [f for f in diag.cluster_flags if f.at_tight_scale]
    print(f"beta = {beta:g} ({result.reason}, {result.steps} steps): "
          f"{report.n_clusters} clusters, {len(tight)} at the tight scale, "
          f"finite-beta bound {finite:.4f}")
    for f in tight:
        verdict = "ok" if f.mass_ok else "VIOLATION"
        print(f"   tight cluster: mass {f.mass:.4f}, diameter {f.diameter:.4f} "
              f"<= {0.5 / math.sqrt(beta):.4f}  [{verdict}]")
    print()
