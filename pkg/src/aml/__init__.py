"""Mean-field attention + perceptron dynamics on the unit sphere."""

from .sphere import (
    Ensemble,
    StepTooLargeError,
    TangentVector,
    geodesic_distance,
    project_tangent,
    retract,
)
from .perceptron import ActivationKind, PerceptronParams, activation, drift, potential, primitive
from .attention import (
    CoincidentAtomsError,
    KernelOverflowError,
    attention_field,
    curvature_bounds,
    first_variation_weight,
    hessian_d2,
    kernel_derivs,
    sopd_check,
    theta_c,
    total_energy,
)
from .clusters import ClusterReport, c_theta, detect, mass_bound, merge_coincident, verify_bounds
from .dynamics import DynamicsConfig, RunResult, Trajectory, run, step, uniform_ensemble, velocity
from .spectral import FourierSeries, bessel_i, convolution_coeffs, moments, reconstruct_density
from .extrema import MaxReport, cell_max, enumerate_cells, global_max, minimizer_symmetry_check

__version__ = "0.1.0"
