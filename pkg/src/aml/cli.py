"""Experiment runner: single runs, beta sweeps, post-hoc analysis, extrema.

Subcommands: simulate, sweep, analyze, extrema, gen-theta.  Configuration
comes from a JSON file plus flag overrides (flags win).  Exit codes: 0 for a
converged run, 1 for invalid configuration or missing artifacts, 2 when a
run ends on the step budget.  AML_OUTPUT_DIR sets the default output root.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import attention, clusters, dynamics, extrema, spectral
from . import perceptron as pc
from .sphere import Ensemble

STANDARD_BETAS = (0.01, 0.05, 0.1, 0.5, 1.0, 3.0, 5.0, 7.0, 10.0, 15.0, 25.0, 35.0, 50.0)


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 2
    n: int = 1000
    beta: float = 1.0
    beta_list: tuple = ()
    mode: str = "descent"
    normalization: str = "unnormalized"
    dt: float = 0.1
    max_steps: int = 200_000
    snapshot_every: int = 10
    window: int = 5
    speed_tol: float = 1e-4
    seed: int = 0
    time_scale: str = "auto"
    practical_softmax: bool = False
    init: str = "uniform_seeded"
    perceptron: "str | dict | None" = None
    output_dir: str = ""
    traj_stride: int = 1
    jobs: "int | None" = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if any(not b > 0 for b in self.beta_list):
            raise ValueError("all sweep betas must be positive")
        if self.init != "uniform_seeded":
            raise ValueError("unknown init scheme")
        if self.time_scale not in ("auto", "none", "kernel_peak"):
            raise ValueError("time_scale must be auto, none or kernel_peak")
        if self.traj_stride < 1:
            raise ValueError("traj_stride must be positive")

    def dynamics_config(self, beta=None) -> dynamics.DynamicsConfig:
        beta = self.beta if beta is None else beta
        ts = self.time_scale
        if ts == "auto":
            ts = "kernel_peak" if self.normalization == "unnormalized" else "none"
        return dynamics.DynamicsConfig(
            beta=beta,
            mode=self.mode,
            normalization=self.normalization,
            dt=self.dt,
            max_steps=self.max_steps,
            snapshot_every=self.snapshot_every,
            window=self.window,
            speed_tol=self.speed_tol,
            seed=self.seed,
            time_scale=ts,
            practical_softmax=self.practical_softmax,
        )

    def to_json_dict(self) -> dict:
        payload = asdict(self)
        payload["beta_list"] = list(self.beta_list)
        return payload

    @classmethod
    def from_json_dict(cls, payload) -> "ExperimentConfig":
        payload = dict(payload)
        payload["beta_list"] = tuple(payload.get("beta_list", ()))
        return cls(**payload)


def load_perceptron(config: ExperimentConfig, base_dir=None) -> "pc.PerceptronParams | None":
    spec = config.perceptron
    if spec is None:
        return None
    if isinstance(spec, dict):
        return pc.PerceptronParams.from_json_dict(spec)
    path = spec
    if base_dir is not None and not os.path.isabs(path) and not os.path.exists(path):
        candidate = os.path.join(base_dir, path)
        if os.path.exists(candidate):
            path = candidate
    return pc.PerceptronParams.load(path)


def _run_one(config: ExperimentConfig, beta, run_dir) -> dict:
    """Execute a single run and write its artifacts; returns the summary dict."""
    os.makedirs(run_dir, exist_ok=True)
    params = load_perceptron(config)
    dyn = config.dynamics_config(beta)
    init = dynamics.uniform_ensemble(config.n, config.d, config.seed)
    result = dynamics.run(dyn, init, params, store_state_every=config.traj_stride)

    dynamics.trajectory_to_csv(result.trajectory, os.path.join(run_dir, "trajectory.csv"))
    result.final.to_csv(os.path.join(run_dir, "final_state.csv"))
    if params is not None:
        params.save(os.path.join(run_dir, "theta.json"))

    report = clusters.detect(result.final, beta, config.d)
    diag = clusters.verify_bounds(report, result.final, beta, params)
    flags = diag.to_json_dict()
    report.save(os.path.join(run_dir, "clusters.json"), flags=flags)

    last = result.trajectory.snapshots[-1]
    summary = {
        "config": replace(config, beta=float(beta)).to_json_dict(),
        "beta": float(beta),
        "termination": result.reason,
        "steps": result.steps,
        "final_max_speed": last.max_speed,
        "energy_final": last.energy,
        "n_clusters": report.n_clusters,
        "largest_mass": report.largest_mass,
        "c_theta": clusters.c_theta(params),
        "snapshots": [
            {"step": s.step, "energy": s.energy, "max_speed": s.max_speed, "n_clusters": s.n_clusters}
            for s in result.trajectory.snapshots
        ],
        "cluster_report": report.to_json_dict(flags=flags),
    }
    with open(os.path.join(run_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def cmd_simulate(config: ExperimentConfig) -> int:
    run_dir = config.output_dir or _default_output("run")
    summary = _run_one(config, config.beta, run_dir)
    print(f"{summary['termination']}: {summary['steps']} steps, "
          f"{summary['n_clusters']} clusters, final speed {summary['final_max_speed']:.3g} "
          f"-> {run_dir}")
    return 0 if summary["termination"] == "converged" else 2


def _sweep_worker(args):
    config_payload, beta, run_dir = args
    config = ExperimentConfig.from_json_dict(config_payload)
    return beta, _run_one(config, beta, run_dir)


def cmd_sweep(config: ExperimentConfig) -> int:
    if not config.beta_list:
        raise ValueError("sweep needs a nonempty beta_list")
    out = config.output_dir or _default_output("sweep")
    os.makedirs(out, exist_ok=True)
    tasks = []
    for beta in config.beta_list:
        run_dir = os.path.join(out, f"run_beta_{beta:g}")
        tasks.append((config.to_json_dict(), float(beta), run_dir))
    jobs = config.jobs or os.cpu_count() or 1
    results = {}
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            for beta, summary in pool.map(_sweep_worker, tasks):
                results[beta] = summary
    else:
        for task in tasks:
            beta, summary = _sweep_worker(task)
            results[beta] = summary

    limit = clusters.MASS_LIMIT
    sweep_lines = ["beta,sqrt_beta,n_clusters,largest_mass,energy_final,terminated"]
    mass_lines = ["beta,sqrt_beta,mass,diameter,is_largest,bound_limit,bound_finite_beta"]
    for beta in sorted(results):
        s = results[beta]
        sweep_lines.append(
            f"{repr(beta)},{repr(math.sqrt(beta))},{s['n_clusters']},"
            f"{repr(s['largest_mass'])},{repr(s['energy_final'])},{s['termination']}"
        )
        finite = clusters.mass_bound(beta, 0.5, s["c_theta"])
        largest = s["largest_mass"]
        for c in s["cluster_report"]["clusters"]:
            mass_lines.append(
                f"{repr(beta)},{repr(math.sqrt(beta))},{repr(c['mass'])},{repr(c['diameter'])},"
                f"{int(c['mass'] == largest)},{repr(limit)},{repr(finite)}"
            )
    with open(os.path.join(out, "sweep.csv"), "w") as fh:
        fh.write("\n".join(sweep_lines) + "\n")
    with open(os.path.join(out, "masses.csv"), "w") as fh:
        fh.write("\n".join(mass_lines) + "\n")
    budget = [b for b in results if results[b]["termination"] != "converged"]
    print(f"sweep over {len(results)} betas -> {out}"
          + (f" ({len(budget)} hit the step budget)" if budget else ""))
    return 2 if budget else 0


ANALYZE_CHECKS = ("hessian", "bounds", "spectrum", "extrema")


def cmd_analyze(run_dir, checks) -> int:
    summary_path = os.path.join(run_dir, "summary.json")
    final_path = os.path.join(run_dir, "final_state.csv")
    if not (os.path.exists(summary_path) and os.path.exists(final_path)):
        print(f"error: {run_dir} is missing summary.json or final_state.csv", file=sys.stderr)
        return 1
    with open(summary_path) as fh:
        summary = json.load(fh)
    config = ExperimentConfig.from_json_dict(summary["config"])
    beta = summary["beta"]
    final = Ensemble.from_csv(final_path)
    theta_path = os.path.join(run_dir, "theta.json")
    if os.path.exists(theta_path):
        params = pc.PerceptronParams.load(theta_path)
    else:
        params = load_perceptron(config, base_dir=run_dir)

    analysis = {}
    for check in checks:
        if check == "hessian":
            if final.d != 2:
                analysis[check] = {"applicable": False, "note": "angular Hessian is circle-only"}
                continue
            state = clusters.merge_coincident(final, tol=1e-8)
            polished = config.mode == "descent"
            if polished:
                # stability is judged at the exact critical point the run approached
                state = dynamics.polish_minimum(state, beta, params)
            H = attention.hessian_d2(state, beta, params)
            passed, min_eig = attention.sopd_check(H, 1e-6)
            eigs = np.linalg.eigvalsh(H)
            analysis[check] = {
                "applicable": True,
                "polished": polished,
                "n_atoms": state.n,
                "min_eigenvalue": min_eig,
                "spectral_radius": float(max(abs(eigs[0]), abs(eigs[-1]))),
                "pass": bool(passed),
            }
        elif check == "bounds":
            report = clusters.detect(final, beta, final.d)
            diag = clusters.verify_bounds(report, final, beta, params)
            payload = diag.to_json_dict()
            payload["pass"] = bool(diag.all_masses_ok and not diag.exclusion_flag)
            analysis[check] = payload
        elif check == "spectrum":
            if final.d != 2:
                analysis[check] = {"applicable": False, "note": "circle-Fourier analysis is d=2 only"}
                continue
            b = min(beta, spectral.BESSEL_MAX_ARG)
            payload = spectral.spectral_report(final, b, n_max=20)
            payload["pass"] = payload["residual_max"] <= 1e-8
            analysis[check] = payload
        elif check == "extrema":
            if params is None:
                analysis[check] = {"applicable": False, "note": "no perceptron in this run"}
                continue
            report = extrema.global_max(params, final.d)
            payload = report.to_json_dict()
            payload["max_energy"] = extrema.max_energy(beta, report.value)
            analysis[check] = payload
        else:
            print(f"error: unknown check {check!r}", file=sys.stderr)
            return 1
    with open(os.path.join(run_dir, "analysis.json"), "w") as fh:
        json.dump(analysis, fh, indent=2)
        fh.write("\n")
    print(f"analysis written for checks: {', '.join(checks)}")
    return 0


def cmd_extrema(params: pc.PerceptronParams, d, beta, out_path=None) -> int:
    report = extrema.global_max(params, d)
    print(f"{'cell (signs)':<20} {'active':<12} {'value':>14}")
    for cm in report.per_cell:
        signs = "".join("+" if s > 0 else "-" for s in cm.cell.sign_pattern)
        active = ",".join(str(j) for j in cm.cell.active_set) or "-"
        print(f"{signs:<20} {active:<12} {cm.value:>14.8g}")
    print(f"global max {report.value:.10g} at {len(report.maximizers)} point(s)"
          + (" [continuum suspected]" if report.continuum_suspected else ""))
    if beta is not None:
        print(f"maximizing point-mass energy at beta={beta:g}: {extrema.max_energy(beta, report.value):.10g}")
    if out_path:
        payload = report.to_json_dict()
        if beta is not None:
            payload["max_energy"] = extrema.max_energy(beta, report.value)
        with open(out_path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_gen_theta(d, n_neurons, activation, seed, out_path) -> int:
    params = dynamics.sample_perceptron(d, n_neurons, activation, seed)
    params.save(out_path)
    print(f"wrote {params.n_neurons} {params.activation.value} neurons (d={d}, seed={seed}) -> {out_path}")
    return 0


def _default_output(kind) -> str:
    root = os.environ.get("AML_OUTPUT_DIR", "aml_runs")
    return os.path.join(root, kind)


def _add_common_flags(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--beta", type=float)
    p.add_argument("--beta-list", help="comma-separated sweep betas, or 'standard'")
    p.add_argument("--mode", choices=dynamics.MODES)
    p.add_argument("--normalization", choices=dynamics.NORMALIZATIONS)
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--snapshot-every", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--speed-tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--time-scale", choices=("auto", "none", "kernel_peak"))
    p.add_argument("--perceptron", help="path to a neuron-bank JSON, or 'none'")
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--traj-stride", type=int)
    p.add_argument("--jobs", type=int)


def _config_from_args(args) -> ExperimentConfig:
    payload = {}
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
    overrides = {
        "beta": args.beta,
        "mode": args.mode,
        "normalization": args.normalization,
        "d": args.d,
        "n": args.n,
        "dt": args.dt,
        "max_steps": args.max_steps,
        "snapshot_every": args.snapshot_every,
        "window": args.window,
        "speed_tol": args.speed_tol,
        "seed": args.seed,
        "time_scale": args.time_scale,
        "output_dir": args.output_dir,
        "traj_stride": args.traj_stride,
        "jobs": args.jobs,
    }
    if args.beta_list is not None:
        if args.beta_list == "standard":
            overrides["beta_list"] = STANDARD_BETAS
        else:
            overrides["beta_list"] = tuple(float(v) for v in args.beta_list.split(","))
    if args.perceptron is not None:
        overrides["perceptron"] = None if args.perceptron == "none" else args.perceptron
    payload.update({k: v for k, v in overrides.items() if v is not None})
    payload.setdefault("beta_list", ())
    return ExperimentConfig.from_json_dict(payload)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="aml", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="one run: trajectory, summary, cluster report")
    _add_common_flags(p_sim)
    p_sweep = sub.add_parser("sweep", help="one run per beta plus sweep.csv and masses.csv")
    _add_common_flags(p_sweep)

    p_an = sub.add_parser("analyze", help="post-hoc checks on a finished run directory")
    p_an.add_argument("--run", required=True)
    p_an.add_argument("--checks", default="hessian,bounds,spectrum",
                      help=f"comma-separated subset of {ANALYZE_CHECKS}")

    p_ex = sub.add_parser("extrema", help="global maximizers of the perceptron potential")
    p_ex.add_argument("--theta", required=True, help="neuron-bank JSON file")
    p_ex.add_argument("--d", type=int, default=None)
    p_ex.add_argument("--beta", type=float, default=None)
    p_ex.add_argument("--out", default=None)

    p_gt = sub.add_parser("gen-theta", help="sample a seeded standard-normal neuron bank")
    p_gt.add_argument("--d", type=int, required=True)
    p_gt.add_argument("--neurons", type=int, default=None)
    p_gt.add_argument("--activation", choices=("relu", "gelu"), default="relu")
    p_gt.add_argument("--seed", type=int, default=0)
    p_gt.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(_config_from_args(args))
        if args.command == "sweep":
            return cmd_sweep(_config_from_args(args))
        if args.command == "analyze":
            checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
            return cmd_analyze(args.run, checks)
        if args.command == "extrema":
            params = pc.PerceptronParams.load(args.theta)
            return cmd_extrema(params, args.d or params.dim, args.beta, args.out)
        if args.command == "gen-theta":
            return cmd_gen_theta(args.d, args.neurons, args.activation, args.seed, args.out)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
