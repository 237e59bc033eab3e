import numpy as np
import pytest

from elephantlq.advertising import (AdvertisingScenario, build_scenario, displayed_kernels,
                                    export_figure_data, ode_kernels)
from elephantlq.riccati import check_assumptions, solve_riccati


@pytest.fixture(scope="module")
def adv():
    s = AdvertisingScenario()
    co = build_scenario(s, 1e-3)
    return s, co, solve_riccati(co)


def test_coefficient_mapping(adv):
    s, co, _ = adv
    assert co.a1.head[0, 0, 0] == pytest.approx(-0.5 * s.tau - s.delta)
    assert co.b1.head[0, 0, 0] == pytest.approx(-s.lam_r * np.exp(-s.tau1))
    assert co.b2.head[0, 0, 0] == pytest.approx(s.lam_m * np.exp(-s.tau2))
    # d1 default cancels b1 + c1 d1
    assert co.b1.head[0, 0, 0] + co.c1.head[0, 0, 0] * co.d1.head[0, 0, 0] == pytest.approx(0.0)
    assert co.g1[0, 0] == s.m1 and co.g2[0, 0] == s.m2


def test_kernels_match_integrating_factor(adv):
    s, co, ric = adv
    r1, r2 = ode_kernels(s, co.grid.head)
    np.testing.assert_allclose(ric.pi1.head[:, 0, 0], r1, rtol=1e-8)
    np.testing.assert_allclose(ric.pi2.head[:, 0, 0], r2, rtol=1e-8)
    assert ric.pi1.head[0, 0, 0] == pytest.approx(7385.86, abs=0.005)
    assert ric.pi2.head[0, 0, 0] == pytest.approx(14778.048307300312, rel=1e-9)


def test_terminal_values(adv):
    s, co, ric = adv
    assert ric.pi1.head[-1, 0, 0] == s.m1
    assert ric.pi2.head[-1, 0, 0] == s.m2


def test_displayed_columns_at_zero():
    d1, d2 = displayed_kernels(AdvertisingScenario(), np.array([0.0, 10.0]))
    assert d1[0] == pytest.approx(996.81, abs=0.005)
    assert d2[0] == pytest.approx(1999.94, abs=0.005)
    assert d1[1] == pytest.approx(1000.0) and d2[1] == pytest.approx(2000.0)


def test_default_parameters_violate_memory_cancellation(adv):
    s, co, ric = adv
    rep = check_assumptions(co, ric)
    assert not rep.passed("A3")
    assert rep.max_residual("A3", 0) == pytest.approx(4.52e-4, rel=0.01)
    assert not s.violations()          # hard constraints hold; only the cancellation fails


def test_hard_constraint_violations_are_listed():
    from elephantlq.errors import ConfigurationError
    bad = AdvertisingScenario(delta=2.0, m2=-1.0)
    msgs = bad.violations()
    assert any("c1^2" in m for m in msgs) and any("m2" in m for m in msgs)
    with pytest.raises(ConfigurationError):
        build_scenario(bad)


def test_figure_export(tmp_path, adv):
    s, co, ric = adv
    path = tmp_path / "fig.csv"
    export_figure_data(s, ric.pi1, ric.pi2, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,pi1,pi2,pi1_display,pi2_display"
    assert len(lines) == co.grid.n_steps + 2
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.all(np.diff(data[:, 1]) < 0) and np.all(np.diff(data[:, 2]) < 0)
