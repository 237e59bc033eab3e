import dataclasses
import math

import numpy as np
import pytest

from elephantlq.advertising import AdvertisingScenario, build_scenario
from elephantlq.feedback import follower_gains, synthesize_gains
from elephantlq.gamma_lambda import GammaLambdaSolution, ThetaPolicy, propagate_lambda
from elephantlq.grid import MatrixFunction, zero_extend
from elephantlq.leader import assemble_barred, assemble_stacked
from elephantlq.pipeline import solve_leader
from elephantlq.riccati import solve_riccati


def _fake_solution(grid, G, A1, diag, policy=ThetaPolicy("full")):
    """A converged-looking Gamma/Lambda pair built from given samples."""
    gamma = zero_extend(MatrixFunction(grid, G), grid)
    lam = propagate_lambda(diag, A1, grid, policy)
    return GammaLambdaSolution(gamma=gamma, lam=lam, iterations=1, residual=0.0, converged=True,
                               trace=(0.0,), policy=policy)


@pytest.fixture(scope="module")
def adv():
    s = AdvertisingScenario()
    co = build_scenario(s, 0.01)
    ric = solve_riccati(co)
    barred = assemble_barred(co, ric.pi1, ric.xi1)
    blocks = assemble_stacked(barred, ric.pi2, ric.xi2)
    return s, co, ric, blocks


def test_follower_gains_scalar(toy_coeffs, toy_riccati, toy):
    fg = follower_gains(toy_coeffs, toy_riccati)
    X = toy.r1 + toy.d1 ** 2 * toy.g1
    np.testing.assert_allclose(fg.Kx, -toy.d1 * toy.g1 * toy.c2 / X)
    np.testing.assert_allclose(fg.Keta, toy.c1 * toy.d1 / X)


def test_zero_gamma_and_lambda_give_static_leader_gain(adv):
    s, co, ric, blocks = adv
    grid = co.grid
    N1 = grid.n_steps + 1
    gl = _fake_solution(grid, np.zeros((N1, 2, 2)), blocks.A1, np.zeros((N1, 2, 2)))
    gains = synthesize_gains(co, ric, blocks, gl)
    ref = np.linalg.inv(ric.xi3.head) @ np.swapaxes(blocks.G2, 1, 2)
    np.testing.assert_allclose(gains.Lu2, ref, rtol=1e-12)
    assert np.max(np.abs(gains.L1)) == 0.0      # c2 = 0
    assert np.max(np.abs(gains.L2)) == 0.0
    # only the static leader response survives in L3
    scale = (co.d1.head * ric.pi1.head * co.d2.head) / ric.xi1.head
    np.testing.assert_allclose(gains.L3, -scale * gains.Lu2, rtol=1e-12)


def test_advertising_gains_match_scalar_displays(adv):
    """Gains at random nodes vs hand-specialized scalar formulas."""
    s, co, ric, blocks = adv
    grid = co.grid
    N1 = grid.n_steps + 1
    rng = np.random.default_rng(21)
    g = rng.uniform(-300, 300, size=(N1, 3))
    g[-1] = 0.0
    G = np.stack([[[a, b], [b, c]] for a, b, c in g])
    dg = rng.uniform(-50, 50, size=3)
    diag = np.broadcast_to(np.array([[dg[0], dg[1]], [dg[1], dg[2]]]), (N1, 2, 2)).copy()
    gl = _fake_solution(grid, G, blocks.A1, diag)
    gains = synthesize_gains(co, ric, blocks, gl)
    W = gl.window

    c, d1, d2 = s.c1, co.d1.head[0, 0, 0], s.d2
    b1, b2 = co.b1.head[0, 0, 0], s.b2
    xi3 = 0.5 * s.mu_m * math.exp(-s.tau2)
    for j in rng.choice(N1 - 1, size=10, replace=False):
        P1, P2 = ric.pi1.head[j, 0, 0], ric.pi2.head[j, 0, 0]
        pb = P1 + 0.5 * s.mu_r * math.exp(-s.tau1)
        g1, g2, g3 = g[j]
        w1, w2, w3 = W[j, 0, 0], W[j, 0, 1], W[j, 1, 1]
        bbar = b2 + c * d2 * P1 / pb
        dbar = d2 * (1 - P1 / pb)
        D1 = c / pb * P2 * dbar
        # leader gain display plus the D1 column, which vanishes only when r1 = 0
        lu2 = -(bbar / xi3) * np.array([g2 + P1 * (b2 + c * d2) / bbar - w2, g3 - w3])
        lu2 -= (D1 / xi3) * np.array([g1 - w1, g2 - w2])
        np.testing.assert_allclose(gains.Lu2[j, 0], lu2, rtol=1e-10)
        # follower response gains from hand-built scalar blocks
        Gj = np.array([[g1, g2], [g2, g3]])
        Wj = np.array([[w1, w2], [w2, w3]])
        C = np.array([[-c * P2 / pb ** 2, c / pb], [c / pb, 0.0]])
        Cbar = np.array([[P2 / pb ** 2, -1 / pb], [-1 / pb, 0.0]])
        D = np.array([D1, bbar])
        G2 = np.array([-P1 * b2 - c * P1 * d2, 0.0])
        den = (pb + g2) ** 2 - g1 * P2 - g1 * g3
        Z = np.array([[pb ** 2 + g2 * pb, -g1 * pb],
                      [g2 * P2 - g3 * pb, pb ** 2 + g2 * pb - g1 * P2]]) / den
        X1 = d1 * d1 * pb
        row = d1 * (Z @ Gj)[0]                       # [d1, 0] Z Gamma
        L2 = (-b1 * Gj[0] - row @ (c * np.eye(2) + C.T @ Gj)) / X1
        k = d1 * P1 * d2 / xi3
        L3 = (k * (D @ Gj - G2) - (k * D - np.array([b1, 0.0]) - row @ C.T) @ Wj) / X1
        np.testing.assert_allclose(gains.L2[j, 0], L2, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(gains.L3[j, 0], L3, rtol=1e-10, atol=1e-12)
        assert np.all(gains.L1[j] == 0.0)


def test_zero_window_removes_lambda_terms(toy):
    co = toy.leader_mode().build(0.01)
    lead = solve_leader(co, ThetaPolicy("const", 0.0))
    gains = lead.gains()
    assert np.max(np.abs(gains.W)) == 0.0
    np.testing.assert_allclose(gains.P, lead.gl.gamma.head)


def test_non_finite_gain_is_rejected(adv):
    s, co, ric, blocks = adv
    N1 = co.grid.n_steps + 1
    gl = _fake_solution(co.grid, np.zeros((N1, 2, 2)), blocks.A1, np.zeros((N1, 2, 2)))
    gains = synthesize_gains(co, ric, blocks, gl)
    bad = gains.L2.copy()
    bad[3, 0, 0] = np.nan
    from elephantlq.errors import ShapeError
    with pytest.raises(ShapeError):
        dataclasses.replace(gains, L2=bad)
