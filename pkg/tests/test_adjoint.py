import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from elephantlq.adjoint import (AnticipatedTerm, regularized_inverse, solve_anticipated,
                                solve_eta1, solve_eta2)
from elephantlq.errors import ConfigurationError, ShapeError
from elephantlq.grid import build_time_grid
from elephantlq.leader import assemble_barred
from elephantlq.riccati import solve_riccati


def _coefficients(t):
    P = np.stack([np.array([[0.4 + 0.2 * np.sin(2 * s), 0.1], [0.0, -0.3]]) for s in t])
    Q = np.stack([np.array([[0.5, 0.0], [0.2, 0.3 * s]]) for s in t])
    R = np.stack([np.array([[1.0, -0.4], [0.3, 0.8]]) for s in t])
    r = np.stack([[np.cos(s), 0.5] for s in t])
    p = np.stack([[1.0 + s, -np.exp(-s)] for s in t])
    return P, Q, R, r, p


def _picard_oracle(T, dt, variant, sweeps=60):
    """eta(t) = -int_t^T f(s) ds by fixed-point iteration on a fine grid."""
    t = np.linspace(0.0, T, int(round(T / dt)) + 1)
    N = len(t) - 1
    P, Q, R, r, p = _coefficients(t)
    end = np.full(N + 1, N) if variant == "adjoint" else np.minimum(2 * np.arange(N + 1), N)
    eta = np.zeros((N + 1, 2))
    for _ in range(sweeps):
        g = np.einsum("kij,kj->ki", R, eta) + r
        C = cumulative_trapezoid(g, t, axis=0, initial=0)
        star = C[end] - C
        f = np.einsum("kij,kj->ki", P, eta) + np.einsum("kij,kj->ki", Q, star) + p
        F = cumulative_trapezoid(f, t, axis=0, initial=0)
        new = -(F[-1] - F)
        if np.max(np.abs(new - eta)) < 1e-14:
            break
        eta = new
    return t, eta


@pytest.mark.parametrize("variant", ["adjoint", "window"])
def test_anticipated_solver_matches_picard_on_finer_grid(variant):
    T, dt = 1.0, 0.01
    grid = build_time_grid(T, dt)
    P, Q, R, r, p = _coefficients(grid.head)
    eta = solve_anticipated(grid, P, [AnticipatedTerm(Q, R, r)], p, variant)
    _, ref = _picard_oracle(T, dt / 4, variant)
    err = np.max(np.abs(eta - ref[::4]))
    assert err <= 5 * dt ** 2 * max(1.0, np.max(np.abs(ref)))
    # halving the step shrinks the gap at second order
    g2 = build_time_grid(T, dt / 2)
    P, Q, R, r, p = _coefficients(g2.head)
    eta2 = solve_anticipated(g2, P, [AnticipatedTerm(Q, R, r)], p, variant)
    assert np.max(np.abs(eta2[::2] - ref[::4])) < err / 2.5


def test_anticipated_solver_validates():
    grid = build_time_grid(1.0, 0.1)
    with pytest.raises(ConfigurationError):
        solve_anticipated(grid, np.zeros((11, 1, 1)), [], np.zeros((11, 1)), "sideways")
    with pytest.raises(ShapeError):
        solve_anticipated(grid, np.zeros((10, 1, 1)), [], np.zeros((11, 1)))


def test_regularized_inverse_is_close_to_inverse():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(5, 3, 3)) + 3 * np.eye(3)
    inv, lam = regularized_inverse(M)
    np.testing.assert_allclose(inv @ M, np.broadcast_to(np.eye(3), M.shape), atol=1e-8)
    assert np.all(lam > 0)
    inv0, _ = regularized_inverse(np.zeros((2, 1, 1)))
    np.testing.assert_array_equal(inv0, 0.0)


@pytest.mark.parametrize("variant", ["adjoint", "window"])
def test_follower_adjoint_is_linear_in_leader_control(toy_coeffs, toy_riccati, variant):
    zero = solve_eta1(toy_coeffs, toy_riccati, None, variant)
    np.testing.assert_array_equal(zero.head, 0.0)
    e1 = solve_eta1(toy_coeffs, toy_riccati, 1.0, variant).head
    e3 = solve_eta1(toy_coeffs, toy_riccati, 3.0, variant).head
    np.testing.assert_allclose(e3, 3 * e1, rtol=1e-10, atol=1e-14)
    assert e1[-1, 0] == 0.0 and np.max(np.abs(e1)) > 0
    with pytest.raises(ShapeError):
        solve_eta1(toy_coeffs, toy_riccati, np.ones((3, 3)), variant)


def test_variants_agree_on_second_half_of_a_forward_only_problem():
    """With no memory term both variants solve the same ODE."""
    grid = build_time_grid(1.0, 0.01)
    P, Q, R, r, p = _coefficients(grid.head)
    a = solve_anticipated(grid, P, [], p, "adjoint")
    w = solve_anticipated(grid, P, [], p, "window")
    np.testing.assert_array_equal(a, w)


def test_leader_adjoint_vanishes_without_sources(toy):
    co = toy.leader_mode().build(0.01)
    ric = solve_riccati(co)
    barred = assemble_barred(co, ric.pi1, ric.xi1)
    eta1 = solve_eta1(co, ric, None)
    eta2 = solve_eta2(barred, ric, eta1)
    np.testing.assert_array_equal(eta2.head, 0.0)
    assert eta2.equation == "leader"
