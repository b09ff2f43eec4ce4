"""Acceptance suite: one test per release criterion, each printing a verdict line.

The heavy fixtures (the two experiment sweeps) run once per session through
the command-line runner, so these tests also exercise the file formats the
plotting layer consumes.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import stats

from aml import attention, cli, clusters, dynamics, extrema, spectral
from aml import perceptron as pc
from aml.sphere import Ensemble

LADDER_BETAS = "0.01,0.05,0.1,0.5,1,3,5,7,10,15,25,35,50"
MASS_BETAS = (9.0, 16.0, 25.0, 36.0, 49.0)


def report(num, ok, detail):
    print(f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok


# -- criterion 1: concavity radius ------------------------------------------


def test_criterion_1_concavity_radius():
    t0 = time.time()
    worst = 0.0
    for beta in (0.1, 1.0, 10.0, 100.0):
        tc = attention.theta_c(beta)
        _, _, K2 = attention.kernel_derivs(beta, tc)
        worst = max(worst, abs(K2) / (beta * math.exp(beta)))
        assert abs(K2) <= 1e-10 * beta * math.exp(beta)
    scaled = math.sqrt(1e4) * attention.theta_c(1e4)
    assert 0.98 <= scaled <= 1.0
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report(1, True, f"root defect <= {worst:.1e}*beta*e^beta, sqrt(beta)*theta_c(1e4)={scaled:.5f}, {elapsed:.2f}s")


# -- criterion 2: gradient and Hessian consistency ---------------------------


def test_criterion_2_gradient_hessian_consistency():
    t0 = time.time()
    rng = np.random.Generator(np.random.Philox(key=2024))
    worst_grad = 0.0
    worst_hess = 0.0
    hess_checked = 0
    for trial in range(50):
        d = int(rng.choice([2, 3, 5]))
        n = int(rng.integers(2, 17))
        beta = float(rng.uniform(0.5, 2.5))
        pos = rng.standard_normal((n, d))
        pos /= np.linalg.norm(pos, axis=1, keepdims=True)
        w = rng.uniform(0.2, 1.0, n)
        ens = Ensemble(pos, w / w.sum())
        params = pc.PerceptronParams(rng.standard_normal((d, d)), rng.standard_normal(d), None, "gelu")

        i = int(rng.integers(0, n))
        u = rng.standard_normal(d)
        u -= (pos[i] @ u) * pos[i]
        u /= np.linalg.norm(u)
        h = 1e-6

        def energy_moved(eps):
            moved = pos.copy()
            y = pos[i] + eps * u
            moved[i] = y / np.linalg.norm(y)
            return attention.total_energy(Ensemble(moved, ens.masses), beta, params)

        fd = (energy_moved(h) - energy_moved(-h)) / (2 * h)
        field = attention.attention_field(ens, pos[i], beta).vec + pc.drift(params, pos[i]).vec
        analytic = float(ens.masses[i] * (field @ u))
        rel = abs(fd - analytic) / max(abs(analytic), abs(fd), 1e-10)
        worst_grad = max(worst_grad, rel)
        assert rel <= 1e-5

        if d == 2 and n <= 8:
            theta = np.mod(np.arctan2(pos[:, 1], pos[:, 0]), 2 * np.pi)
            ens2 = Ensemble.from_angles(theta, ens.masses)
            H = attention.hessian_d2(ens2, beta, params)
            hh = 1e-4
            fdH = np.zeros((n, n))

            def e_at(t):
                return attention.total_energy(Ensemble.from_angles(t, ens.masses), beta, params)

            for a in range(n):
                for b in range(n):
                    tpp = theta.copy(); tpp[a] += hh; tpp[b] += hh
                    tpm = theta.copy(); tpm[a] += hh; tpm[b] -= hh
                    tmp = theta.copy(); tmp[a] -= hh; tmp[b] += hh
                    tmm = theta.copy(); tmm[a] -= hh; tmm[b] -= hh
                    fdH[a, b] = (e_at(tpp) - e_at(tpm) - e_at(tmp) + e_at(tmm)) / (4 * hh * hh)
            frob = float(np.linalg.norm(fdH - H) / np.linalg.norm(H))
            worst_hess = max(worst_hess, frob)
            hess_checked += 1
            assert frob <= 1e-4
    elapsed = time.time() - t0
    assert elapsed < 30.0
    report(2, True, f"50 gradient checks (worst rel {worst_grad:.1e}), "
                    f"{hess_checked} Hessian checks (worst Frobenius {worst_hess:.1e}), {elapsed:.1f}s")


# -- criterion 3: Funk-Hecke multiplier identity -----------------------------


def test_criterion_3_funk_hecke():
    t0 = time.time()
    rng = np.random.Generator(np.random.Philox(key=3033))
    worst = 0.0
    for trial in range(20):
        n = int(rng.integers(1, 9))
        theta = rng.uniform(0, 2 * np.pi, n)
        w = rng.uniform(0.1, 1.0, n)
        ens = Ensemble.from_angles(theta, w / w.sum())
        for beta in (0.5, 1.0, 5.0):
            res = float(np.max(spectral.funk_hecke_residuals(ens, beta, 20)))
            worst = max(worst, res)
            assert res <= 1e-8
    elapsed = time.time() - t0
    assert elapsed < 10.0
    report(3, True, f"20 measures x 3 betas, max residual {worst:.1e}, {elapsed:.1f}s")


# -- criteria 4 and 5: the descent sweep at the anti-concentration betas -----


@pytest.fixture(scope="module")
def mass_sweep(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("mass_sweep")
    theta_path = tmp / "theta_gelu.json"
    assert cli.main(["gen-theta", "--d", "2", "--activation", "gelu", "--seed", "5",
                     "--out", str(theta_path)]) == 0
    out = tmp / "sweep"
    t0 = time.time()
    rc = cli.main([
        "sweep", "--beta-list", ",".join(str(b) for b in MASS_BETAS),
        "--n", "256", "--d", "2", "--seed", "42", "--mode", "descent",
        "--perceptron", str(theta_path), "--traj-stride", "50",
        "--out", str(out), "--jobs", "5",
    ])
    assert rc in (0, 2)
    return {"dir": out, "theta": theta_path, "elapsed": time.time() - t0}


def test_criterion_4_mass_anticoncentration(mass_sweep):
    out = mass_sweep["dir"]
    params = pc.PerceptronParams.load(mass_sweep["theta"])
    C = clusters.c_theta(params)
    checked = 0
    worst = 0.0
    for beta in MASS_BETAS:
        final = Ensemble.from_csv(out / f"run_beta_{beta:g}" / "final_state.csv")
        rep = clusters.detect(final, beta, 2)
        diag = clusters.verify_bounds(rep, final, beta, params, mass_tol=0.02)
        finite = clusters.mass_bound(beta, 0.5, C)
        for flag in diag.cluster_flags:
            if not flag.at_tight_scale:
                continue
            checked += 1
            worst = max(worst, flag.mass)
            assert flag.mass <= 0.5742 + 0.02
            assert flag.mass <= finite + 0.02
        assert diag.all_masses_ok
    assert mass_sweep["elapsed"] < 900.0
    report(4, True, f"{checked} tight-scale clusters across betas {MASS_BETAS}, "
                    f"heaviest {worst:.3f} vs bound 0.5742+0.02 (C_theta={C:.2f}), "
                    f"sweep took {mass_sweep['elapsed']:.0f}s")


def test_criterion_5_sopd_at_convergence(mass_sweep):
    out = mass_sweep["dir"]
    params = pc.PerceptronParams.load(mass_sweep["theta"])
    details = []
    n_converged = 0
    for beta in MASS_BETAS:
        summary = json.loads((out / f"run_beta_{beta:g}" / "summary.json").read_text())
        if summary["termination"] != "converged":
            continue
        n_converged += 1
        final = Ensemble.from_csv(out / f"run_beta_{beta:g}" / "final_state.csv")
        merged = clusters.merge_coincident(final, tol=1e-8)
        polished = dynamics.polish_minimum(merged, beta, params)
        H = attention.hessian_d2(polished, beta, params)
        passed, min_eig = attention.sopd_check(H, 1e-6)
        eigs = np.linalg.eigvalsh(H)
        radius = max(abs(eigs[0]), abs(eigs[-1]))
        details.append(f"b={beta:g}: rel {abs(min(min_eig, 0.0)) / (1 + radius):.1e}")
        assert passed
    assert n_converged >= 1, "no converged run to check"

    # analytic two-antipodal-atom case: eigenvalues {0, e^-beta / 2}
    for beta in (1.0, 3.5):
        anti = Ensemble(np.array([[1.0, 0.0], [-1.0, 0.0]]), [0.5, 0.5])
        eigs = np.linalg.eigvalsh(attention.hessian_d2(anti, beta))
        assert abs(eigs[0]) <= 1e-12
        assert abs(eigs[1] - math.exp(-beta) / 2) <= 1e-12
    report(5, True, f"{n_converged}/5 runs converged, all SOPD at 1e-6; " + "; ".join(details)
                    + "; antipodal eigenvalues {0, e^-b/2} to 1e-12")


# -- criterion 6: maximizers ---------------------------------------------------


def _grid_oracle(params, d, rng, points=200_000):
    if d == 2:
        t = 2 * np.pi * np.arange(1_000_000) / 1_000_000
        X = np.column_stack([np.cos(t), np.sin(t)])
    else:
        X = rng.standard_normal((points, d))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    vals = pc.primitive(params.activation, X @ params.a.T + params.b) @ params.omega
    best = X[int(np.argmax(vals))]
    x, val = extrema._polish(params, best)
    return max(float(np.max(vals)), val)


def test_criterion_6_maximizers():
    t0 = time.time()
    rng = np.random.Generator(np.random.Philox(key=6066))

    diag = pc.PerceptronParams(np.array([[2.0, 0.0], [0.0, 1.0]]), np.ones(2), None, "relu")
    rep = extrema.global_max(diag)
    assert math.isclose(rep.value, 4.0, abs_tol=1e-12)
    assert any(np.allclose(x, [1.0, 0.0], atol=1e-8) for x in rep.maximizers)

    worst_col = 0.0
    for _ in range(50):
        a = rng.standard_normal(2)
        alphas = rng.standard_normal(3)
        omegas = rng.standard_normal(3)
        params = pc.PerceptronParams(np.outer(alphas, a), omegas, None, "relu")
        value = extrema.global_max(params).value
        brute = _grid_oracle(params, 2, rng)
        worst_col = max(worst_col, abs(value - brute))
        assert abs(value - brute) <= 1e-6

    worst_nn = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 5))
        A = rng.uniform(0.0, 1.0, (d, d))
        params = pc.PerceptronParams(A, np.ones(d), None, "relu")
        rep = extrema.global_max(params, d)
        top = float(np.linalg.eigvalsh(A.T @ A)[-1])
        assert math.isclose(rep.value, top, rel_tol=1e-9, abs_tol=1e-9)
        assert any(np.all(x >= -1e-6) or np.all(-x >= -1e-6) for x in rep.maximizers)
        brute = _grid_oracle(params, d, rng)
        worst_nn = max(worst_nn, abs(rep.value - brute))
        assert abs(rep.value - brute) <= 1e-3
    elapsed = time.time() - t0
    assert elapsed < 120.0
    report(6, True, f"diagonal exact; 50 collinear draws (worst |err| {worst_col:.1e}); "
                    f"20 nonnegative draws (worst vs grid {worst_nn:.1e}); {elapsed:.0f}s")


# -- criterion 7: cluster-count scaling ---------------------------------------


@pytest.fixture(scope="module")
def scaling_sweep(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("scaling")
    theta_path = tmp / "theta_relu.json"
    assert cli.main(["gen-theta", "--d", "2", "--activation", "relu", "--seed", "11",
                     "--out", str(theta_path)]) == 0
    out = tmp / "sweep"
    t0 = time.time()
    rc = cli.main([
        "sweep", "--beta-list", LADDER_BETAS, "--n", "256", "--d", "2", "--seed", "42",
        "--mode", "descent", "--normalization", "softmax", "--max-steps", "30000",
        "--perceptron", str(theta_path), "--traj-stride", "100",
        "--out", str(out), "--jobs", "5",
    ])
    assert rc in (0, 2)
    return {"dir": out, "elapsed": time.time() - t0}


def test_criterion_7_cluster_count_scaling(scaling_sweep):
    out = scaling_sweep["dir"]
    rows = (out / "sweep.csv").read_text().splitlines()[1:]
    betas, counts = [], []
    for row in rows:
        parts = row.split(",")
        betas.append(float(parts[0]))
        counts.append(int(parts[2]))
    rho = float(stats.spearmanr(np.sqrt(betas), counts).statistic)
    assert rho >= 0.8

    collapse = []
    for beta in (0.01, 0.05, 0.1):
        cfg = dynamics.DynamicsConfig(beta=beta, mode="ascent", time_scale="kernel_peak",
                                      max_steps=30_000)
        res = dynamics.run(cfg, dynamics.uniform_ensemble(256, 2, seed=42), None,
                           store_state_every=1000)
        k = clusters.detect(res.final, beta, 2).n_clusters
        collapse.append(k)
        assert k == 1
    elapsed = scaling_sweep["elapsed"]
    assert elapsed < 1800.0
    report(7, True, f"spearman(sqrt(beta), clusters) = {rho:.3f} over counts {counts}; "
                    f"pure-attention ascent collapse at beta<=0.1 -> {collapse}; sweep {elapsed:.0f}s")


# -- criterion 8: exclusion constant ------------------------------------------


def test_criterion_8_exclusion_constant():
    t0 = time.time()
    two = pc.PerceptronParams(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, -1.0]), None, "relu")
    assert clusters.c_theta(two) == 4.0
    threshold = clusters.EXCLUSION_CONSTANT
    assert math.isclose(threshold, 0.330936, abs_tol=5e-7)
    assert threshold < 0.331
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report(8, True, f"c_theta(two unit neurons)=4, exclusion constant {threshold:.6f} < 0.331, {elapsed:.2f}s")


# -- criterion 9: descent/ascent energy monotonicity --------------------------


def test_criterion_9_energy_monotonicity():
    t0 = time.time()
    params = dynamics.sample_perceptron(2, activation="gelu", seed=3)
    for mode, sign in (("descent", -1.0), ("ascent", 1.0)):
        cfg = dynamics.DynamicsConfig(beta=1.0, mode=mode, dt=1e-3, max_steps=10_000,
                                      time_scale="none")
        ens = dynamics.uniform_ensemble(128, 2, seed=1)
        e_prev = attention.total_energy(ens, 1.0, params)
        for _ in range(10_000):
            V = dynamics.velocity(cfg, ens, params)
            vmax = float(np.max(np.linalg.norm(V, axis=1)))
            ens = dynamics.step(cfg, ens, params)
            e = attention.total_energy(ens, 1.0, params)
            slack = 10 * cfg.dt**2 * vmax**2
            if mode == "descent":
                assert e <= e_prev + slack
            else:
                assert e >= e_prev - slack
            e_prev = e
    elapsed = time.time() - t0
    assert elapsed < 60.0
    report(9, True, f"10^4 steps each way at dt=1e-3 stay monotone within slack, {elapsed:.0f}s")
