"""Time integration of the interacting-particle flow on the sphere.

Explicit Euler with renormalization; ascent or descent; plain or
softmax-normalized interaction; optional perceptron drift.  A run stops when
the cluster count is constant over a window of snapshots and the maximum
particle speed drops below tolerance, or when the step budget runs out.

The velocity of atom i is s * (A(x_i) + u(x_i)) with s = +1 for ascent and
-1 for descent, A the interaction field and u the drift.  With
time_scale="kernel_peak" the whole velocity is divided by the kernel peak
e^beta (a pure reparametrization of time with the same stationary states);
without it, explicit Euler at the default step is unstable once
max_i m_i * e^beta * dt is large, so long high-beta runs should use it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import attention, clusters
from . import perceptron as pc
from .sphere import Ensemble, project_rows, retract_rows

MODES = ("ascent", "descent")
NORMALIZATIONS = ("unnormalized", "softmax")
TIME_SCALES = ("none", "kernel_peak")


@dataclass(frozen=True)
class DynamicsConfig:
    beta: float
    mode: str = "descent"
    normalization: str = "unnormalized"
    dt: float = 0.1
    max_steps: int = 200_000
    snapshot_every: int = 10
    window: int = 5
    speed_tol: float = 1e-4
    seed: int = 0
    time_scale: str = "none"
    practical_softmax: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_steps < 1 or self.snapshot_every < 1 or self.window < 1:
            raise ValueError("step counts must be positive")
        if not self.speed_tol > 0:
            raise ValueError("speed_tol must be positive")
        if self.time_scale not in TIME_SCALES:
            raise ValueError(f"time_scale must be one of {TIME_SCALES}")

    @property
    def sign(self) -> float:
        return 1.0 if self.mode == "ascent" else -1.0


@dataclass(frozen=True)
class Snapshot:
    step: int
    ensemble: "Ensemble | None"
    energy: float
    max_speed: float
    n_clusters: int


@dataclass(frozen=True)
class Trajectory:
    snapshots: tuple

    def steps(self):
        return [s.step for s in self.snapshots]

    def energies(self):
        return [s.energy for s in self.snapshots]


@dataclass(frozen=True)
class RunResult:
    trajectory: Trajectory
    final: Ensemble
    reason: str  # "converged" | "step_budget"
    steps: int


def uniform_ensemble(n, d, seed) -> Ensemble:
    """Seeded uniform initialization: i.i.d. angles on the circle, normalized
    Gaussians for d >= 3.  Equal masses 1/n."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    if d == 2:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pos = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        pos = rng.standard_normal((n, d))
        pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    return Ensemble(pos, np.full(n, 1.0 / n))


def sample_perceptron(d, n_neurons=None, activation="relu", seed=0) -> pc.PerceptronParams:
    """Neuron bank with i.i.d. standard normal entries and zero biases."""
    if n_neurons is None:
        n_neurons = d
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    a = rng.standard_normal((n_neurons, d))
    omega = rng.standard_normal(n_neurons)
    return pc.PerceptronParams(a, omega, np.zeros(n_neurons), pc.ActivationKind.coerce(activation))


def velocity(config: DynamicsConfig, ens: Ensemble, params: pc.PerceptronParams | None = None) -> np.ndarray:
    """Per-atom velocities, stacked as the rows of an (N, d) array.

    Every row is tangent at the corresponding atom.  Atoms with zero total
    field have zero velocity.
    """
    X = ens.positions
    m = ens.masses
    beta = config.beta
    G = X @ X.T
    if config.normalization == "unnormalized":
        if config.time_scale == "kernel_peak":
            W = np.exp(beta * (G - 1.0))  # exp(beta * x.y) / exp(beta), never overflows
            drift_scale = math.exp(-beta)
        else:
            if beta > attention.MAX_EXPONENT:
                raise attention.KernelOverflowError(
                    f"kernel exponent {beta:.3g} exceeds the {attention.MAX_EXPONENT:.0f} guard"
                )
            W = np.exp(beta * G)
            drift_scale = 1.0
        A = project_rows(X, (W * m[None, :]) @ X)
        total = A
        if params is not None:
            total = total + drift_scale * pc.drift_all(params, X)
    else:
        # softmax form: the shared exponent shift cancels in the ratio
        W = np.exp(beta * (G - 1.0))
        num = project_rows(X, (W * m[None, :]) @ X)
        den = (W @ m) / beta
        if config.practical_softmax:
            den = den * beta
        A = num / den[:, None]
        total = A
        if params is not None:
            total = total + pc.drift_all(params, X)
        if config.time_scale == "kernel_peak":
            total = total * math.exp(-beta)
    return config.sign * total


def max_speed(config: DynamicsConfig, ens: Ensemble, params=None) -> float:
    return float(np.max(np.linalg.norm(velocity(config, ens, params), axis=1)))


def step(config: DynamicsConfig, ens: Ensemble, params: pc.PerceptronParams | None = None) -> Ensemble:
    """One explicit Euler step: retract each atom by dt * velocity.  Masses ride along."""
    V = velocity(config, ens, params)
    return ens.with_positions(retract_rows(ens.positions, V, config.dt))


def run(
    config: DynamicsConfig,
    init: Ensemble,
    params: pc.PerceptronParams | None = None,
    store_state_every=1,
) -> RunResult:
    """Integrate until the stopping rule fires or the step budget is spent.

    A snapshot is recorded every snapshot_every steps (energy, max speed,
    cluster count at the grouping scale for config.beta; the ensemble itself
    is kept on every store_state_every-th snapshot and always for the last).
    Converged means: the cluster count is constant over `window` consecutive
    snapshots and the current max speed is at most speed_tol.
    """
    ens = init
    snapshots = []
    recent_counts = []
    reason = "step_budget"
    stop_step = config.max_steps
    snap_index = 0
    k = 0
    while True:
        V = velocity(config, ens, params)
        if k % config.snapshot_every == 0:
            speed = float(np.max(np.linalg.norm(V, axis=1))) if ens.n else 0.0
            report = clusters.detect(ens, config.beta, ens.d)
            energy = attention.total_energy(ens, config.beta, params)
            keep = (snap_index % store_state_every == 0)
            snapshots.append(Snapshot(k, ens if keep else None, energy, speed, report.n_clusters))
            snap_index += 1
            recent_counts.append(report.n_clusters)
            if len(recent_counts) > config.window:
                recent_counts.pop(0)
            if (
                len(recent_counts) == config.window
                and len(set(recent_counts)) == 1
                and speed <= config.speed_tol
            ):
                reason = "converged"
                stop_step = k
                break
        if k >= config.max_steps:
            stop_step = k
            break
        ens = ens.with_positions(retract_rows(ens.positions, V, config.dt))
        k += 1
    if snapshots[-1].step != stop_step or snapshots[-1].ensemble is None:
        V = velocity(config, ens, params)
        speed = float(np.max(np.linalg.norm(V, axis=1)))
        report = clusters.detect(ens, config.beta, ens.d)
        energy = attention.total_energy(ens, config.beta, params)
        if snapshots and snapshots[-1].step == stop_step:
            snapshots[-1] = Snapshot(stop_step, ens, energy, speed, report.n_clusters)
        else:
            snapshots.append(Snapshot(stop_step, ens, energy, speed, report.n_clusters))
    return RunResult(Trajectory(tuple(snapshots)), ens, reason, stop_step)


def polish_minimum(
    ens: Ensemble,
    beta,
    params: pc.PerceptronParams | None = None,
    max_iter=200,
    residual_tol=1e-12,
):
    """Drive a near-converged circle configuration to an exact energy minimum.

    Levenberg-damped Newton on the angular coordinates at fixed masses: steps
    that fail to decrease the energy are retried with a stiffer damping, so
    the iteration follows the descent flow into its local minimum even when
    the pair interactions are far stiffer than any stable Euler step.  Stops
    when the worst atom's field, measured relative to the kernel peak e^beta,
    drops below residual_tol.  Intended for d = 2 after merging coincident
    atoms; returns the polished Ensemble.
    """
    if ens.d != 2:
        raise ValueError("the critical-point polish runs on the circle only")
    beta = float(beta)
    if beta > attention.MAX_EXPONENT:
        raise attention.KernelOverflowError("beta exceeds the kernel exponent guard")
    theta = ens.angles().copy()
    m = ens.masses
    peak = math.exp(beta)

    def fields(t):
        X = np.column_stack([np.cos(t), np.sin(t)])
        T = np.column_stack([-np.sin(t), np.cos(t)])
        W = np.exp(beta * (X @ X.T))
        F = (W * m[None, :]) @ X
        if params is not None:
            S = X @ params.a.T + params.b
            sigma, _ = pc.activation(params.activation, S)
            F = F + (np.atleast_2d(sigma) * params.omega) @ params.a
        return np.sum(T * F, axis=1)  # tangential component per atom

    def energy(t):
        return attention.total_energy(Ensemble.from_angles(t, m), beta, params)

    def gradient(t):
        return m * fields(t)

    lam = 1e-3
    e_cur = energy(theta)
    for _ in range(max_iter):
        f = fields(theta)
        if float(np.max(np.abs(f))) / peak <= residual_tol:
            break
        g = m * f
        try:
            H = attention.hessian_d2(Ensemble.from_angles(theta, m), beta, params)
        except attention.CoincidentAtomsError:
            # two atoms fused during the polish: merge and keep going
            fused = clusters.merge_coincident(Ensemble.from_angles(theta, m), tol=1e-9)
            theta = fused.angles().copy()
            m = fused.masses
            e_cur = energy(theta)
            continue
        scale = float(np.max(np.abs(np.diag(H)))) + 1e-300
        accepted = False
        for _ in range(60):
            try:
                delta = np.linalg.solve(H + lam * scale * np.eye(len(theta)), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            e_new = energy(cand)
            if e_new <= e_cur + 1e-12 * (1.0 + abs(e_cur)):
                theta, e_cur = cand, e_new
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
    out = Ensemble.from_angles(np.mod(theta, 2.0 * np.pi), m)
    return clusters.merge_coincident(out, tol=1e-9)


# -- trajectory CSV: step,atom,mass,theta on the circle; raw coordinates above --


def trajectory_to_csv(traj: Trajectory, path_or_buf):
    stored = [s for s in traj.snapshots if s.ensemble is not None]
    if not stored:
        raise ValueError("trajectory holds no stored ensembles")
    d = stored[0].ensemble.d
    if d == 2:
        lines = ["step,atom,mass,theta"]
        for s in stored:
            theta = s.ensemble.angles()
            m = s.ensemble.masses
            for i in range(s.ensemble.n):
                lines.append(f"{s.step},{i},{repr(float(m[i]))},{repr(float(theta[i]))}")
    else:
        cols = ",".join(f"x{k}" for k in range(d))
        lines = [f"step,atom,mass,{cols}"]
        for s in stored:
            m = s.ensemble.masses
            for i in range(s.ensemble.n):
                coords = ",".join(repr(float(v)) for v in s.ensemble.positions[i])
                lines.append(f"{s.step},{i},{repr(float(m[i]))},{coords}")
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w") as fh:
            fh.write(text)
    else:
        path_or_buf.write(text)
