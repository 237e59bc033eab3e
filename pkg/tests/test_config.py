import numpy as np
import pytest

from elephantlq.config import (RunConfig, bundled_config, load_config, parse_config_text,
                               parse_matrix)
from elephantlq.errors import ConfigurationError


def test_parse_matrix():
    np.testing.assert_array_equal(parse_matrix("1 2; 3 4"), [[1, 2], [3, 4]])
    np.testing.assert_array_equal(parse_matrix("1, 2"), [[1, 2]])
    for bad in ("", "1 2; 3", "a b"):
        with pytest.raises(ConfigurationError):
            parse_matrix(bad)


def test_sections_and_types():
    cfg = parse_config_text("scenario = toy\ntoy.r1 = 0.25  # comment\npaths = 10\ntheta = const:0.3")
    assert cfg.scenario == "toy" and cfg.toy.r1 == 0.25 and cfg.paths == 10
    assert cfg.policy.kind == "const"


@pytest.mark.parametrize("text", [
    "bogus = 1", "toy.bogus = 1", "paths = 1.5", "dt = fast", "paths = 3\npaths = 4",
    "scenario = nope", "star = sideways", "theta = half", "no equals sign", "damping = 0",
    "seed = -1", "advertising.delta = x",
])
def test_bad_configs_raise(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_raw_scenario_builds():
    cfg = bundled_config("case2.cfg")
    co = cfg.coefficients(0.01)
    assert co.n == 1 and co.b2.head[0, 0, 0] == pytest.approx(0.7)
    with pytest.raises(ConfigurationError):
        parse_config_text("scenario = raw\nraw.a1 = 1").coefficients()


@pytest.mark.parametrize("name", ["advertising.cfg", "scalar_toy.cfg", "case2.cfg", "unsolvable.cfg"])
def test_bundled_configs_load(name):
    cfg = load_config(name)
    assert cfg.source == name


def test_missing_config():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/x.cfg")


def test_leader_dt_and_overrides():
    cfg = bundled_config("advertising.cfg")
    assert cfg.leader_dt == 0.01 and cfg.dt == 0.001
    assert cfg.with_overrides(seed=None) is cfg
    assert cfg.with_overrides(seed=7).seed == 7
    assert RunConfig().leader_dt == RunConfig().dt
