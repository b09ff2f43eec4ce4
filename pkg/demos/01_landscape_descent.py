"""Descent on the circle: attention repulsion against a perceptron landscape.

Runs the mean-field particle flow at beta = 1 with a seeded piecewise-linear
perceptron, starting from 256 uniformly placed particles.  Watch the energy
decrease, the speed die out, and mass freeze in the dead zone while the
active regions organize into clumps.
"""

import numpy as np

from aml import attention, clusters, dynamics

params = dynamics.sample_perceptron(2, activation="relu", seed=3)
print("neuron bank:")
for a, omega, b in params.neurons:
    print(f"  a = {np.round(a, 3)}, omega = {omega:+.3f}, b = {b:g}")

config = dynamics.DynamicsConfig(beta=1.0, mode="descent", time_scale="kernel_peak",
                                 max_steps=40_000)
init = dynamics.uniform_ensemble(256, 2, seed=7)
result = dynamics.run(config, init, params, store_state_every=50)

print(f"\n{result.reason} after {result.steps} steps")
print(f"{'step':>8} {'energy':>12} {'max speed':>11} {'clusters':>9}")
snaps = result.trajectory.snapshots
for s in snaps[:: max(1, len(snaps) // 12)]:
    print(f"{s.step:>8} {s.energy:>12.6f} {s.max_speed:>11.3e} {s.n_clusters:>9}")

report = clusters.detect(result.final, config.beta, 2)
print("\nfinal clusters (mass / diameter):")
for c in report.clusters:
    print(f"  {c.mass:.4f} / {c.diameter:.3f} rad ({len(c.members)} particles)")

# where did mass end up relative to the landscape?
from aml import perceptron as pc

print("\ncluster centers on the potential landscape:")
for c in report.clusters:
    members = np.asarray(c.members)
    center = result.final.masses[members] @ result.final.positions[members]
    center /= np.linalg.norm(center)
    gates = params.a @ center + params.b
    zone = "dead zone" if np.all(gates <= 0) else "active"
    print(f"  mass {c.mass:.3f} at angle {np.arctan2(center[1], center[0]) % (2 * np.pi):.3f} "
          f"v = {pc.potential(params, center):+.4f} ({zone})")
