import numpy as np
import pytest
from scipy.integrate import simpson, solve_ivp

from elephantlq.costs import (CostEstimate, evaluate_cost, follower_closed_form_cost,
                              leader_closed_form_cost, path_costs,
                              stationarity_check)
from elephantlq.errors import ConfigurationError, SimulationError
from elephantlq.feedback import follower_gains
from elephantlq.grid import GameCoefficients, build_time_grid
from elephantlq.kernels import available_backends
from elephantlq.adjoint import solve_eta1
from elephantlq.simulate import (LinearSystem, QuadraticCost, brownian_increments, follower_system,
                                 run_systems, simulate_open_loop)


def test_increments_depend_only_on_path_index():
    a = brownian_increments(7, 0, 10, 5, 0.01)
    b = brownian_increments(7, 4, 3, 5, 0.01)
    np.testing.assert_array_equal(a[4:7], b)
    assert np.std(brownian_increments(7, 0, 2000, 50, 0.01)) == pytest.approx(0.1, rel=0.02)


def test_open_loop_mean_matches_memory_ode():
    """Mean of dX = (a X + a2 M) dt + c X dW solves the deterministic memory ODE."""
    T, dt = 1.0, 1e-3
    grid = build_time_grid(T, dt)
    co = GameCoefficients.build(grid, x0=[1.0], g1=1.0, g2=1.0, a1=-0.4, a2=0.5, c1=0.3)
    ens = simulate_open_loop(co, n_paths=4000, seed=3)
    mx, vx, _, _ = ens.moments()
    # deterministic recursion with the same Euler/trapezoid scheme
    x, m = 1.0, 0.0
    for _ in range(grid.n_steps):
        xn = x + dt * (-0.4 * x + 0.5 * m)
        m += 0.5 * dt * (x + xn)
        x = xn
    se = np.sqrt(vx[-1, 0] / 4000)
    assert abs(mx[-1, 0] - x) <= 4 * se


def test_cost_estimate_requires_finite_samples():
    est = CostEstimate.from_samples(np.array([1.0, 2.0, 3.0]), 0.1, 1)
    assert est.value == 2.0 and est.std_error == pytest.approx(np.std([1, 2, 3], ddof=1) / np.sqrt(3))
    with pytest.raises((SimulationError, ValueError)):
        CostEstimate.from_samples(np.array([1.0, np.nan]), 0.1, 1)


@pytest.mark.parametrize("backend", available_backends())
def test_exploding_path_is_reported(backend):
    grid = build_time_grid(1.0, 0.01)
    N1 = grid.n_steps + 1
    sys = LinearSystem(grid, np.array([1.0]), np.full((N1, 1, 1), 1e6), np.zeros((N1, 1, 1)))
    with pytest.raises(SimulationError):
        run_systems([sys], 5, 0, backend=backend)


def test_run_systems_validates():
    grid = build_time_grid(1.0, 0.1)
    sys = LinearSystem(grid, np.array([1.0]), np.zeros((11, 1, 1)), np.zeros((11, 1, 1)))
    with pytest.raises(ConfigurationError):
        run_systems([sys], 0, 0)
    with pytest.raises(ConfigurationError):
        run_systems([sys], 5, -1)


@pytest.fixture(scope="module")
def follower_setup():
    from elephantlq.config import ToyScenario
    from elephantlq.riccati import solve_riccati
    co = ToyScenario().build(0.01)
    ric = solve_riccati(co)
    eta1 = solve_eta1(co, ric, 1.0)
    return co, ric, eta1, follower_system(co, follower_gains(co, ric), eta1, 1.0)


def test_follower_cost_matches_closed_form(follower_setup):
    co, ric, eta1, sys = follower_setup
    closed = follower_closed_form_cost(ric, eta1, co, 1.0)
    (res,), _ = run_systems([sys], 20000, 11)
    samples = res.costs[:, 0]
    se = samples.std(ddof=1) / np.sqrt(len(samples))
    assert abs(samples.mean() - closed) <= 4 * se


def test_stationarity_detects_a_suboptimal_control(follower_setup):
    co, ric, eta1, sys = follower_setup
    t = co.grid.head
    dirs = [np.sin(np.pi * t)[:, None]]
    good = stationarity_check(sys, dirs, 0.1, slice(0, 1), "J1", n_paths=4000, seed=5)
    assert good.passed
    import dataclasses
    worse = dataclasses.replace(sys, k0=sys.k0 + 0.5)
    bad = stationarity_check(worse, dirs, 0.1, slice(0, 1), "J1", n_paths=4000, seed=5)
    assert not bool(bad.stationary.all())
    with pytest.raises(ConfigurationError):
        stationarity_check(sys, dirs, -1.0, slice(0, 1), "J1", n_paths=10)


# ---- worked examples -------------------------------------------------------

def _scalar_system(T, dt, x0=1.0, F=0.0, G=0.0, Fd=0.0, costs=()):
    grid = build_time_grid(T, dt)
    return LinearSystem(grid, np.array([x0]), np.full((1, 1), F), np.zeros((1, 1)),
                        G=np.full((1, 1), G), Fd=np.full((1, 1), Fd), costs=costs)


def _cost(name, lx=0.0, lm=0.0, ru=0.0, g=0.0):
    f = lambda v: np.full((1, 1), v)  # noqa: E731
    return QuadraticCost(name, f(lx), f(lm), f(ru), f(g))


def test_zero_initial_state_stays_at_zero():
    grid = build_time_grid(1.0, 0.01)
    co = GameCoefficients.build(grid, x0=[0.0], g1=1.0, g2=1.0, a1=-0.4, a2=0.5, c1=0.3)
    ens = simulate_open_loop(co, n_paths=50, seed=1, store=True)
    assert np.all(ens.paths == 0.0) and np.all(ens.memory == 0.0)
    est = evaluate_cost(ens, co, 1)
    assert est.value == 0.0 and est.std_error == 0.0


def test_noise_free_memory_system_matches_ode_solver():
    F, G = -0.4, 0.5
    ref = solve_ivp(lambda t, y: [F * y[0] + G * y[1], y[0]], (0.0, 1.0), [1.0, 0.0],
                    rtol=1e-12, atol=1e-12, dense_output=True)
    errs = []
    for dt in (2e-3, 1e-3):
        sys = _scalar_system(1.0, dt, F=F, G=G)
        (res,), _ = run_systems([sys], 1, 0, store=True, noise=False)
        exact = ref.sol(sys.grid.head)
        errs.append(max(np.max(np.abs(res.X[0, :, 0] - exact[0])),
                        np.max(np.abs(res.M[0, :, 0] - exact[1]))))
    assert errs[1] <= 5e-4
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)   # Euler is first order


def test_pure_diffusion_second_moment():
    sys = _scalar_system(1.0, 1e-3, Fd=1.0)
    P = 20000
    (res,), _ = run_systems([sys], P, 9, store=True)
    xT2 = res.X[:, -1, 0] ** 2
    se = xT2.std(ddof=1) / np.sqrt(P)
    assert abs(xT2.mean() - np.e) <= 4 * se + np.e * 1e-3


def test_zero_cost_weights_give_zero():
    sys = _scalar_system(1.0, 0.01, Fd=0.5, costs=(_cost("J"),))
    (res,), _ = run_systems([sys], 200, 3)
    est = CostEstimate.from_samples(res.costs[:, 0], 0.01, 1)
    assert est.value == 0.0 and est.std_error == 0.0


def test_frozen_state_cost_closed_form():
    l, lb, g, T = 0.7, 1.3, 2.0, 2.0
    for dt in (0.01, 0.005):
        sys = _scalar_system(T, dt, costs=(_cost("J", lx=l, lm=lb, g=g),))
        (res,), _ = run_systems([sys], 1, 0, noise=False)
        exact = l * T + lb * T ** 3 / 3 + g
        assert res.costs[0, 0] == pytest.approx(exact, abs=lb * T * dt ** 2)


def test_path_costs_equal_independent_requadrature():
    grid = build_time_grid(1.0, 0.01)
    co = GameCoefficients.build(grid, x0=[1.0], g1=0.8, g2=0.3, a1=-0.2, a2=0.4, c1=0.5,
                                l1=1.1, lbar1=0.6, l2=0.4, lbar2=0.9, r1=1.0, r2=1.0)
    ens = simulate_open_loop(co, u1=0.3, u2=-0.2, n_paths=64, seed=4, store=True)
    X, M, U = ens.paths[:, :, 0], ens.memory[:, :, 0], ens.result.U
    t = grid.head
    for i, (l, lb, g, u) in enumerate([(1.1, 0.6, 0.8, U[:, :, 0]), (0.4, 0.9, 0.3, U[:, :, 1])], 1):
        ref = np.trapezoid(l * X ** 2 + lb * M ** 2 + u ** 2, t, axis=1) + g * X[:, -1] ** 2
        np.testing.assert_allclose(path_costs(ens.paths, ens.memory, U[:, :, i - 1:i], co, i),
                                   ref, rtol=1e-8)
        # accumulated-on-the-fly costs agree with re-integration
        np.testing.assert_allclose(ens.cost_samples(f"J{i}"), ref, rtol=1e-8)
        # Simpson is a loose check: Euler paths are rough
        simp = simpson(l * X ** 2 + lb * M ** 2 + u ** 2, x=t, axis=1) + g * X[:, -1] ** 2
        assert np.max(np.abs(simp - ref) / np.abs(ref)) < 0.05


def test_follower_closed_form_degenerate_cases(follower_setup):
    co, ric, _, _ = follower_setup
    eta0 = solve_eta1(co, ric, None)
    assert np.all(eta0.head == 0.0)
    x0 = co.x0
    assert follower_closed_form_cost(ric, eta0, co, None) == pytest.approx(
        float(x0 @ ric.pi1.head[0] @ x0), rel=1e-12)
    assert follower_closed_form_cost(ric, eta0, co, None, x0=np.zeros_like(x0)) == 0.0


def test_leader_closed_form_degenerate_cases(follower_setup):
    co, ric, _, _ = follower_setup
    eta2 = solve_eta1(co, ric, None)   # zero path of the right shape
    x0 = co.x0
    assert leader_closed_form_cost(ric, eta2, np.zeros_like(x0)) == 0.0
    assert leader_closed_form_cost(ric, eta2, x0) == pytest.approx(
        float(x0 @ ric.pi2.head[0] @ x0), rel=1e-12)


def test_noise_free_quadratic_is_exactly_stationary():
    grid = build_time_grid(1.0, 0.01)
    sys = LinearSystem(grid, np.array([1.0]), np.zeros((1, 1)), np.ones((1, 1)),
                       costs=(_cost("J", ru=1.0),))
    v = np.sin(np.pi * grid.head)[:, None]
    rep = stationarity_check(sys, [v], [0.1, 0.05], slice(0, 1), "J", n_paths=1, noise=False)
    np.testing.assert_allclose(rep.derivative, 0.0, atol=1e-14)
    assert np.all(rep.curvature > 0)
