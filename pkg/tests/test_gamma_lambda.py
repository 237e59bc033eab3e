import numpy as np
import pytest
from scipy.linalg import expm

from elephantlq.errors import ConfigurationError, ConvergenceError, ShapeError
from elephantlq.feedback import synthesize_gains
from elephantlq.gamma_lambda import (ThetaPolicy, propagate_lambda, relation_defect,
                                     solve_gamma_lambda, window_integral)
from elephantlq.grid import build_time_grid
from elephantlq.oracles import gamma_lambda_picard, noise_free_boundary_solution
from elephantlq.pipeline import BAND_LIMIT_BYTES, band_bytes, check_band_memory
from elephantlq.verify import synthetic_blocks


@pytest.fixture(scope="module")
def synthetic():
    grid = build_time_grid(1.0, 0.01)
    blocks = synthetic_blocks(grid)
    xi3 = np.ones((grid.n_steps + 1, 1, 1))
    return grid, blocks, xi3


def test_theta_policy_parsing():
    assert ThetaPolicy.parse("full").kind == "full"
    p = ThetaPolicy.parse("const:0.3")
    assert p.value == 0.3
    g = build_time_grid(1.0, 0.1)
    assert p.steps(g) == 3 and p.describe(g) == "const:0.30000000000000004"
    for bad in ("const:x", "const:-1", "half"):
        with pytest.raises(ConfigurationError):
            ThetaPolicy.parse(bad)


def test_band_offsets_for_full_window():
    g = build_time_grid(1.0, 0.1)
    offs = ThetaPolicy("full").offsets(g)
    np.testing.assert_array_equal(offs, np.minimum(np.arange(11), 10 - np.arange(11)))


def test_window_integral_matches_trapezoid():
    rng = np.random.default_rng(0)
    lam = rng.normal(size=(6, 4, 2, 2))
    offsets = np.array([0, 1, 3, 2, 1, 0])
    dt = 0.1
    got = window_integral(lam, offsets, dt)
    for j, O in enumerate(offsets):
        ref = np.trapezoid(lam[j, :O + 1], dx=dt, axis=0) if O > 0 else np.zeros((2, 2))
        np.testing.assert_allclose(got[j], ref, atol=1e-15)


def test_lambda_band_follows_matrix_exponential_transport():
    grid = build_time_grid(1.0, 0.01)
    A = np.array([[-0.5, 0.3], [-0.1, -0.2]])
    A1 = np.broadcast_to(A, (grid.n_steps + 1, 2, 2)).copy()
    diag = np.array([[[1.0 + t, 0.2], [0.2, 2.0 - t]] for t in grid.head])
    field = propagate_lambda(diag, A1, grid, ThetaPolicy("full"))
    np.testing.assert_array_equal(field.diagonal, diag)
    for j in (0, 10, 30, 50):
        for o in range(0, field.offsets[j] + 1, 7):
            E = expm(A * o * grid.dt)
            ref = E.T @ diag[j + o] @ E
            np.testing.assert_allclose(field.values[j, o], ref, rtol=1e-9, atol=1e-12)


def test_fixed_point_matches_fine_grid_picard(synthetic):
    grid, blocks, xi3 = synthetic
    gl = solve_gamma_lambda(blocks, xi3, ThetaPolicy("full"), tol=1e-10, max_iter=500)
    assert gl.converged and gl.residual <= 1e-6
    _, G, D, _ = gamma_lambda_picard(blocks, 1.0, 1.0, grid.dt / 4)
    assert np.max(np.abs(G[::4] - gl.gamma.head)) <= 1e-5
    assert np.max(np.abs(D[::4] - gl.lam.diagonal)) <= 1e-5
    G0 = gl.gamma.head
    np.testing.assert_allclose(G0, np.swapaxes(G0, 1, 2), atol=1e-10)
    np.testing.assert_array_equal(gl.gamma.head[-1], 0.0)


def test_iteration_cap_is_reported_and_gains_refuse(synthetic, toy):
    grid, blocks, xi3 = synthetic
    gl = solve_gamma_lambda(blocks, xi3, ThetaPolicy("full"), tol=1e-14, max_iter=3)
    assert not gl.converged and gl.message and len(gl.trace) == 3
    from elephantlq.pipeline import solve_leader
    lead = solve_leader(toy.leader_mode().build(0.01), ThetaPolicy("full"))
    import dataclasses
    bad = dataclasses.replace(lead.gl, converged=False, message="iteration cap reached")
    with pytest.raises(ConvergenceError):
        synthesize_gains(lead.co, lead.ric, lead.blocks, bad)


def test_constant_window_relation_is_exact_up_to_discretization(synthetic):
    grid, blocks, xi3 = synthetic
    nf = blocks.noise_free()
    gl = solve_gamma_lambda(nf, xi3, ThetaPolicy("const", 0.3), tol=1e-10, max_iter=500)
    starts = np.array([[0.0, 1.0], [1.0, 0.0]])
    phi, psi = noise_free_boundary_solution(nf, np.eye(1), 1.0, grid.head, starts)
    assert relation_defect(gl, phi, psi) <= 1e-4
    with pytest.raises(ShapeError):
        relation_defect(gl, phi, psi[:1])


def test_band_memory_guard():
    fine = build_time_grid(10.0, 1e-3)
    assert band_bytes(fine, ThetaPolicy("full"), 2) > BAND_LIMIT_BYTES
    with pytest.raises(ConfigurationError, match="gamma_dt"):
        check_band_memory(fine, ThetaPolicy("full"), 2)
    check_band_memory(build_time_grid(10.0, 1e-2), ThetaPolicy("full"), 2)
    check_band_memory(fine, ThetaPolicy("const", 0.1), 2)


def test_toy_leader_has_vanishing_gamma(toy):
    from elephantlq.pipeline import solve_leader
    lead = solve_leader(toy.leader_mode().build(0.01), ThetaPolicy("full"))
    assert lead.gl.converged
    assert np.max(np.abs(lead.gl.gamma.head)) == 0.0


# ---- worked examples -------------------------------------------------------

def test_lambda_with_zero_drift_is_constant_along_rows():
    grid = build_time_grid(1.0, 0.05)
    N1 = grid.n_steps + 1
    diag = np.stack([np.array([[1.0 + t, t], [t, 2.0]]) for t in grid.head])
    field = propagate_lambda(diag, np.zeros((N1, 2, 2)), grid, ThetaPolicy("full"))
    for j in range(N1):
        for o in range(field.offsets[j] + 1):
            np.testing.assert_allclose(field.values[j, o], diag[j + o], atol=1e-15)
    zero = propagate_lambda(np.zeros_like(diag), np.zeros((N1, 2, 2)), grid, ThetaPolicy("full"))
    assert np.all(zero.values == 0.0)


def test_zero_sources_converge_immediately_to_zero():
    from elephantlq.leader import StackedBlocks
    grid = build_time_grid(1.0, 0.01)
    blocks = StackedBlocks.constant(grid, A1=[[-0.5, 0.0], [0.0, -0.3]])
    gl = solve_gamma_lambda(blocks, np.ones((grid.n_steps + 1, 1, 1)))
    assert gl.converged and gl.iterations == 1
    assert np.all(gl.gamma.head == 0.0) and np.all(gl.lam.values == 0.0)
    phi = np.random.default_rng(0).normal(size=(3, grid.n_steps + 1, 2))
    assert relation_defect(gl, phi, np.zeros_like(phi)) == 0.0


def test_residual_certificate_and_symmetry_of_lambda(synthetic):
    grid, blocks, xi3 = synthetic
    gl = solve_gamma_lambda(blocks, xi3, ThetaPolicy("full"), tol=1e-9, max_iter=500)
    assert gl.converged and gl.residual <= 1e-9
    vals = gl.lam.values
    np.testing.assert_allclose(vals, np.swapaxes(vals, -1, -2), atol=1e-10)
    assert gl.trace[-1] == pytest.approx(gl.residual) or gl.residual <= gl.trace[-1]


def test_relation_defect_at_horizon_is_zero(synthetic):
    grid, blocks, xi3 = synthetic
    nf = blocks.noise_free()
    gl = solve_gamma_lambda(nf, xi3, ThetaPolicy("const", 0.3), tol=1e-10, max_iter=500)
    phi, psi = noise_free_boundary_solution(nf, np.eye(1), 1.0, grid.head, np.array([[0.0, 1.0]]))
    assert np.max(np.abs(psi[:, -1])) <= 1e-12
    assert relation_defect(gl, phi, psi, checkpoints=[grid.n_steps]) <= 1e-12
