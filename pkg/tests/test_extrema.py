import math

import numpy as np
import pytest

from aml import dynamics, extrema
from aml import perceptron as pc
from aml.extrema import (
    TrivialSymmetryError,
    cell_max,
    enumerate_cells,
    global_max,
    max_energy,
    minimizer_symmetry_check,
)
from aml.sphere import Ensemble


def relu(a, omega):
    return pc.PerceptronParams(np.asarray(a, float), np.asarray(omega, float), None, "relu")


def potential_on_grid(params, n=1_000_000):
    t = 2 * np.pi * np.arange(n) / n
    X = np.column_stack([np.cos(t), np.sin(t)])
    vals = pc.primitive(params.activation, X @ params.a.T + params.b) @ params.omega
    return float(np.max(vals))


def test_cells_coordinate_quadrants():
    p = relu(np.eye(2), [1.0, 1.0])
    cells = enumerate_cells(p)
    assert len(cells) == 4
    actives = sorted(c.active_set for c in cells)
    assert actives == [(), (0,), (0, 1), (1,)]


def test_cells_collinear_directions():
    p = relu([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
    cells = enumerate_cells(p)
    assert len(cells) == 2
    assert sorted(c.active_set for c in cells) == [(0,), (1,)]


def test_cells_single_neuron_hemispheres_any_d():
    for d in (2, 3):
        a = np.zeros((1, d))
        a[0, 0] = 1.0
        p = relu(a, [1.0])
        cells = enumerate_cells(p)
        assert len(cells) == 2
        assert sorted(c.active_set for c in cells) == [(), (0,)]


def test_cell_max_positive_orthant_diag():
    p = relu([[2.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    cells = enumerate_cells(p)
    both = next(c for c in cells if c.active_set == (0, 1))
    x, val = cell_max(both, p)
    assert math.isclose(val, 4.0, abs_tol=1e-12)
    assert np.allclose(np.abs(x), [1.0, 0.0], atol=1e-9)


def test_cell_max_negative_form_boundary_null():
    p = relu([[1.0, 0.0]], [-1.0])
    cells = enumerate_cells(p)
    active = next(c for c in cells if c.active_set == (0,))
    x, val = cell_max(active, p)
    assert abs(val) < 1e-14
    assert abs(x[0]) < 1e-9  # a null direction on the boundary circle


def test_cell_max_collinear_both_cells():
    p = relu([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
    for cell in enumerate_cells(p):
        x, val = cell_max(cell, p)
        assert math.isclose(val, 1.0, abs_tol=1e-12)
        assert np.allclose(np.abs(x), [1.0, 0.0], atol=1e-9)


def test_global_max_diagonal_case():
    p = relu([[2.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    rep = global_max(p)
    assert math.isclose(rep.value, 4.0, abs_tol=1e-12)
    assert any(np.allclose(x, [1.0, 0.0], atol=1e-8) for x in rep.maximizers)


def test_global_max_nonnegative_rows_perron():
    A = np.array([[1.0, 0.0], [1.0, 1.0]])
    p = relu(A, [1.0, 1.0])
    rep = global_max(p)
    top = float(np.linalg.eigvalsh(A.T @ A)[-1])
    assert math.isclose(rep.value, top, rel_tol=1e-12)
    assert all(np.all(x >= -1e-9) or np.all(-x >= -1e-9) for x in rep.maximizers)


def test_global_max_dead_zone_continuum():
    p = relu(np.eye(2), [-1.0, -1.0])
    rep = global_max(p)
    assert abs(rep.value) < 1e-14
    assert rep.continuum_suspected
    assert len(rep.maximizers) >= 3  # arc endpoints plus midpoint
    for x in rep.maximizers:
        assert pc.potential(p, x / np.linalg.norm(x)) <= 1e-12


def test_global_max_matches_grid_brute_force():
    rng = np.random.Generator(np.random.Philox(key=61))
    for _ in range(10):
        p = relu(rng.standard_normal((2, 2)), rng.standard_normal(2))
        rep = global_max(p)
        brute = potential_on_grid(p)
        assert abs(rep.value - brute) < 1e-6


def test_scaling_covariance_exact_for_power_of_two():
    rng = np.random.Generator(np.random.Philox(key=62))
    p = relu(rng.standard_normal((2, 2)), rng.standard_normal(2))
    rep1 = global_max(p)
    rep2 = global_max(relu(p.a, 2.0 * p.omega))
    assert rep2.value == 2.0 * rep1.value
    m1 = sorted(tuple(np.round(x, 9)) for x in rep1.maximizers)
    m2 = sorted(tuple(np.round(x, 9)) for x in rep2.maximizers)
    assert m1 == m2


def test_rotation_equivariance():
    rng = np.random.Generator(np.random.Philox(key=63))
    for d in (2, 3):
        a = rng.standard_normal((d, d))
        omega = rng.standard_normal(d)
        p = relu(a, omega)
        if d == 2:
            phi = float(rng.uniform(0, 2 * np.pi))
            R = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        else:
            Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            R = Q if np.linalg.det(Q) > 0 else -Q
        rep = global_max(p)
        rep_rot = global_max(relu(a @ R.T, omega))
        assert math.isclose(rep.value, rep_rot.value, rel_tol=1e-9, abs_tol=1e-12)
        rotated = sorted(tuple(np.round(R @ x, 6)) for x in rep.maximizers)
        got = sorted(tuple(np.round(x, 6)) for x in rep_rot.maximizers)
        assert rotated == got


def collinear_closed_form(a, omegas, alphas):
    pos = sum(w * al * al for w, al in zip(omegas, alphas) if al > 0)
    neg = sum(w * al * al for w, al in zip(omegas, alphas) if al < 0)
    return float(np.dot(a, a)) * max(pos, neg, 0.0)


def test_collinear_closed_form_matches_pipeline():
    rng = np.random.Generator(np.random.Philox(key=64))
    for _ in range(20):
        a = rng.standard_normal(2)
        alphas = rng.standard_normal(3)
        omegas = rng.standard_normal(3)
        p = relu(np.outer(alphas, a), omegas)
        rep = global_max(p)
        assert math.isclose(rep.value, collinear_closed_form(a, omegas, alphas),
                            rel_tol=1e-9, abs_tol=1e-9)


def test_diagonal_closed_form_matches_pipeline():
    rng = np.random.Generator(np.random.Philox(key=65))
    for _ in range(20):
        alphas = rng.standard_normal(3)
        p = relu(np.diag(alphas), np.ones(3))
        rep = global_max(p)
        assert math.isclose(rep.value, float(np.max(np.abs(alphas)) ** 2), rel_tol=1e-9)


def test_gelu_falls_back_to_grid():
    p = pc.PerceptronParams(np.array([[1.0, 0.5], [-0.3, 1.2]]), np.array([1.0, 0.7]), None, "gelu")
    rep = global_max(p, grid_points=40_000)
    t = np.linspace(0, 2 * np.pi, 200_001)
    X = np.column_stack([np.cos(t), np.sin(t)])
    brute = float(np.max(pc.primitive("gelu", X @ p.a.T) @ p.omega))
    assert rep.value >= brute - 1e-9
    assert abs(rep.value - brute) < 1e-6


def test_max_energy_formula():
    assert math.isclose(max_energy(1.0, 4.0), math.e / 2 + 2.0, rel_tol=1e-15)


def test_symmetry_check_latitude_ring_passes():
    p = pc.PerceptronParams(np.array([[0.0, 0.0, 1.0]]), np.array([1.0]), None, "relu")
    t = 2 * np.pi * np.arange(400) / 400
    z = 0.4
    r = math.sqrt(1 - z * z)
    ring = Ensemble(np.column_stack([r * np.cos(t), r * np.sin(t), np.full(400, z)]), np.full(400, 1 / 400))
    rep = minimizer_symmetry_check(ring, p, tol=0.05)
    assert rep.passed and rep.max_discrepancy < 0.02


def test_symmetry_check_off_axis_dirac_fails():
    p = pc.PerceptronParams(np.array([[0.0, 0.0, 1.0]]), np.array([1.0]), None, "relu")
    dirac = Ensemble(np.array([[1.0, 0.0, 0.0]]), [1.0])
    rep = minimizer_symmetry_check(dirac, p, tol=0.05)
    assert not rep.passed


def test_symmetry_check_trivial_group_errors():
    p = relu(np.eye(3), [1.0, 1.0, 1.0])
    ens = Ensemble(np.array([[0.0, 0.0, 1.0]]), [1.0])
    with pytest.raises(TrivialSymmetryError):
        minimizer_symmetry_check(ens, p, tol=0.05)


def test_symmetry_check_on_converged_descent_run():
    p = pc.PerceptronParams(np.array([[0.0, 0.0, 1.0]]), np.array([-1.0]), None, "relu")
    cfg = dynamics.DynamicsConfig(beta=1.0, mode="descent", time_scale="kernel_peak", max_steps=60_000)
    init = dynamics.uniform_ensemble(256, 3, seed=9)
    res = dynamics.run(cfg, init, p, store_state_every=5000)
    rep = minimizer_symmetry_check(res.final, p, tol=0.05)
    assert rep.passed
