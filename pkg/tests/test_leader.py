import math

import numpy as np
import pytest

from elephantlq.advertising import AdvertisingScenario, build_scenario
from elephantlq.errors import ConditioningError
from elephantlq.grid import GameCoefficients, MatrixFunction, build_time_grid
from elephantlq.leader import (StackedBlocks, assemble_barred, assemble_omegas, assemble_stacked)
from elephantlq.riccati import check_assumptions, solve_riccati


def _solve(co):
    ric = solve_riccati(co)
    barred = assemble_barred(co, ric.pi1, ric.xi1)
    return ric, barred, assemble_stacked(barred, ric.pi2, ric.xi2)


@pytest.fixture(scope="module")
def adv():
    s = AdvertisingScenario()
    co = build_scenario(s, 0.01)
    ric, barred, blocks = _solve(co)
    pibar = ric.pi1.head[:, 0, 0] + 0.5 * s.mu_r * math.exp(-s.tau1)
    return s, co, ric, barred, blocks, pibar


def test_barred_without_follower_diffusion_control():
    grid = build_time_grid(1.0, 0.1)
    co = GameCoefficients.build(grid, x0=[1.0], g1=1.0, g2=1.0, a1=-0.3, a2=0.2, b1=0.7,
                                b2=0.4, c1=0.1, c2=0.3, d1=0.0, d2=0.5, r1=2.0, r2=1.0)
    ric, barred, _ = _solve(co)
    np.testing.assert_allclose(barred.b.head, co.b2.head)
    np.testing.assert_allclose(barred.c2.head, co.c2.head)
    np.testing.assert_allclose(barred.d.head, co.d2.head)
    np.testing.assert_allclose(barred.f.head, -0.7 * 0.7 / 2.0)
    np.testing.assert_allclose(ric.xi1.head, 2.0)


def test_scalar_barred_values_match_defining_formulas():
    rng = np.random.default_rng(11)
    a1, a2, b1, b2, c1, c2, d1, d2 = rng.uniform(-1, 1, 8)
    r1 = rng.uniform(0.5, 1.5)
    grid = build_time_grid(1.0, 0.05)
    co = GameCoefficients.build(grid, x0=[1.0], g1=1.3, g2=0.7, a1=a1, a2=a2, b1=b1, b2=b2,
                                c1=c1, c2=c2, d1=d1, d2=d2, l1=0.2, r1=r1, r2=1.0)
    ric, barred, _ = _solve(co)
    P = ric.pi1.head[:, 0, 0]
    X = r1 + d1 * d1 * P
    ref = {
        "a1": a1 + 0 * P, "a2": a2 - b1 / X * d1 * P * c2, "b": b2 - b1 / X * d1 * P * d2,
        "c1": c1 + 0 * P, "c2": c2 - d1 / X * d1 * P * c2, "d": d2 - d1 / X * d1 * P * d2,
        "f": -b1 * b1 / X, "h": -b1 * d1 / X, "k": -d1 * b1 / X, "p": -d1 * d1 / X,
        "q1": -c2 * P * (1 - d1 * d1 * P / X) * d2, "q2": -P * b2 - c1 * P * d2,
    }
    for name, vals in ref.items():
        np.testing.assert_allclose(getattr(barred, name).head[:, 0, 0], vals, rtol=1e-12,
                                   atol=1e-14, err_msg=name)


def test_singular_follower_denominator_names_the_node():
    grid = build_time_grid(1.0, 0.1)
    co = GameCoefficients.build(grid, x0=[1.0], g1=0.0, g2=1.0, b1=1.0, d1=1.0, r1=0.0)
    ric = solve_riccati(co)
    with pytest.raises(ConditioningError, match="node"):
        assemble_barred(co, ric.pi1, ric.xi1)


def test_advertising_barred_and_stacked_closed_forms(adv):
    s, co, ric, barred, blocks, pibar = adv
    c = s.c1
    P2 = ric.pi2.head[:, 0, 0]
    np.testing.assert_allclose(ric.xi1.head[:, 0, 0], pibar * co.d1.head[0, 0, 0] ** 2,
                               rtol=1e-12)
    np.testing.assert_allclose(ric.xi3.head[:, 0, 0], 0.5 * s.mu_m * math.exp(-s.tau2))
    for name in ("c2", "q1"):
        assert np.max(np.abs(getattr(barred, name).head)) == 0.0
    # B = c^2 / pibar [[Pi2 / pibar, -1], [-1, 0]]
    B = blocks.B
    np.testing.assert_allclose(B[:, 0, 0], c * c * P2 / pibar ** 2, rtol=1e-12)
    np.testing.assert_allclose(B[:, 0, 1], -c * c / pibar, rtol=1e-12)
    np.testing.assert_allclose(B[:, 1, 0], -c * c / pibar, rtol=1e-12)
    assert np.all(B[:, 1, 1] == 0)
    # A1 = -(tau / 2 + delta) I and Abar1 = c1 I because the off-diagonal terms cancel
    np.testing.assert_allclose(blocks.A1, np.broadcast_to(-0.4 * np.eye(2), B.shape), atol=1e-12)
    np.testing.assert_allclose(blocks.Abar1, np.broadcast_to(c * np.eye(2), B.shape), atol=1e-12)
    np.testing.assert_allclose(blocks.Cbar[:, 0, 0], P2 / pibar ** 2, rtol=1e-12)
    np.testing.assert_allclose(blocks.Cbar[:, 0, 1], -1 / pibar, rtol=1e-12)


def test_advertising_resolvent_matches_scalar_closed_form(adv):
    s, co, ric, barred, blocks, pibar = adv
    rng = np.random.default_rng(5)
    N1 = co.grid.n_steps + 1
    g = rng.uniform(-500, 500, size=(N1, 3))
    G = np.stack([[[a, b], [b, c]] for a, b, c in g])
    om = assemble_omegas(blocks, G, ric.xi3)
    P2 = ric.pi2.head[:, 0, 0]
    g1, g2, g3 = g.T
    den = (pibar + g2) ** 2 - g1 * P2 - g1 * g3
    ref = np.stack([[pibar ** 2 + g2 * pibar, -g1 * pibar],
                    [g2 * P2 - g3 * pibar, pibar ** 2 + g2 * pibar - g1 * P2]]).transpose(2, 0, 1)
    np.testing.assert_allclose(om.resolvent, ref / den[:, None, None], rtol=1e-10)


def test_stacked_blocks_are_symmetric_and_triangular(adv):
    *_, blocks, _ = adv
    for name in ("B", "Cbar"):
        arr = getattr(blocks, name)
        np.testing.assert_array_equal(arr, np.swapaxes(arr, 1, 2))
    assert np.all(blocks.A1[:, 1, 0] == 0.0)


def test_only_abar1_nonzero_gives_diagonal_a1():
    grid = build_time_grid(1.0, 0.1)
    co = GameCoefficients.build(grid, x0=[1.0], g1=1.0, g2=1.0, a1=-0.7, d1=0.0, b1=0.0, r1=1.0,
                                b2=0.0, d2=0.0)
    ric, barred, blocks = _solve(co)
    np.testing.assert_allclose(blocks.A1, np.broadcast_to(np.diag([-0.7, -0.7]), blocks.A1.shape))
    for name in ("A2", "Abar1", "Abar2", "B", "C", "Cbar", "H", "D", "Dbar", "G1", "G2"):
        assert np.max(np.abs(getattr(blocks, name))) == 0.0, name


def test_leader_mode_zeroes_memory_diffusion_blocks(toy):
    co = toy.leader_mode().build(0.01)
    ric, barred, blocks = _solve(co)
    assert check_assumptions(co, ric).all_passed
    for name in ("Abar2", "Dbar", "G1", "H"):
        assert np.max(np.abs(getattr(blocks, name))) <= 1e-12, name


def test_omegas_at_zero_gamma():
    grid = build_time_grid(1.0, 0.1)
    from elephantlq.verify import synthetic_blocks
    blocks = synthetic_blocks(grid)
    N1 = grid.n_steps + 1
    xi3 = np.full((N1, 1, 1), 2.0)
    om = assemble_omegas(blocks, np.zeros((N1, 2, 2)), xi3)
    D, G2 = blocks.D, blocks.G2
    T = lambda a: np.swapaxes(a, 1, 2)  # noqa: E731
    np.testing.assert_allclose(om.omega1, D @ T(G2) / 2.0)
    np.testing.assert_allclose(om.omega2, -blocks.B + D @ T(D) / 2.0)
    np.testing.assert_allclose(om.omega3, G2 @ T(G2) / 2.0)


def test_omegas_match_duplicate_formula_and_keep_symmetry():
    grid = build_time_grid(1.0, 0.1)
    from elephantlq.verify import synthetic_blocks
    blocks = synthetic_blocks(grid)
    N1 = grid.n_steps + 1
    rng = np.random.default_rng(8)
    A = rng.normal(size=(N1, 2, 2))
    G = 0.5 * (A + np.swapaxes(A, 1, 2))
    om = assemble_omegas(blocks, G, np.ones((N1, 1, 1)))
    for j in range(N1):
        Gj, B, C = G[j], blocks.B[j], blocks.C[j]
        Cb, Ab, D, G2 = blocks.Cbar[j], blocks.Abar1[j], blocks.D[j], blocks.G2[j]
        R = np.linalg.inv(np.eye(2) - Gj @ Cb)
        E = Ab + C.T @ Gj
        F = G2 - Gj @ D
        o1 = B @ Gj + C @ R @ Gj @ E + D @ F.T
        o2 = -B - C @ R @ Gj @ C.T + D @ D.T
        o3 = F @ F.T - E.T @ R @ Gj @ E - Gj @ B @ Gj
        np.testing.assert_allclose(om.omega1[j], o1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(om.omega2[j], o2, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(om.omega3[j], o3, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(om.omega3, np.swapaxes(om.omega3, 1, 2), atol=1e-10)


def test_singular_resolvent_raises():
    grid = build_time_grid(1.0, 0.5)
    N1 = grid.n_steps + 1
    blocks = StackedBlocks.constant(grid, A1=np.zeros((2, 2)), Cbar=np.eye(2))
    with pytest.raises(ConditioningError):
        assemble_omegas(blocks, np.broadcast_to(np.eye(2), (N1, 2, 2)), np.ones((N1, 1, 1)))
