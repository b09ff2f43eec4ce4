"""Global maximizers of the coupled energy are point masses.

For a piecewise-linear perceptron with zero biases the potential is a
quadratic form on each sign cell, so the global maximum comes out of a small
family of constrained eigenvalue problems.  Three classic shapes:
axis-aligned directions, collinear directions, and entrywise-nonnegative
directions (where the top singular vector wins).
"""

import numpy as np

from aml import extrema
from aml import perceptron as pc


def show(tag, params, beta=1.0):
    report = extrema.global_max(params)
    print(f"{tag}: {len(report.per_cell)} cells")
    for cm in report.per_cell:
        signs = "".join("+" if s > 0 else "-" for s in cm.cell.sign_pattern)
        print(f"   cell {signs}  active {list(cm.cell.active_set)}  max {cm.value:+.6f}")
    points = ", ".join(str(np.round(x, 4)) for x in report.maximizers)
    tail = "  [continuum]" if report.continuum_suspected else ""
    print(f"   global max {report.value:.6f} at {points}{tail}")
    print(f"   maximizing point-mass energy at beta={beta:g}: "
          f"{extrema.max_energy(beta, report.value):.6f}\n")


show("axis-aligned (2 e1, e2)",
     pc.PerceptronParams(np.array([[2.0, 0.0], [0.0, 1.0]]), np.ones(2), None, "relu"))

show("collinear (e1, -e1)",
     pc.PerceptronParams(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.ones(2), None, "relu"))

A = np.array([[1.0, 0.0], [1.0, 1.0]])
show("nonnegative rows", pc.PerceptronParams(A, np.ones(2), None, "relu"))
print("top eigenvalue of A^T A:", np.linalg.eigvalsh(A.T @ A)[-1])

show("all weights negative (dead-zone arc attains the max)",
     pc.PerceptronParams(np.eye(2), -np.ones(2), None, "relu"))
