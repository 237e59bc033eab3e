"""Flat ``key = value`` run configuration.

Lines hold one ``key = value`` pair; ``#`` starts a comment.  Matrices are
written row by row with ``;`` between rows (``1 0; 0 1``); a scalar stands
for a ``1 x 1`` matrix.  Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import math
import os

import numpy as np

from .advertising import AdvertisingScenario, build_scenario
from .errors import ConfigurationError
from .gamma_lambda import ThetaPolicy
from .grid import GameCoefficients, build_time_grid
from .memory import STAR_VARIANTS

SCENARIOS = ("advertising", "raw", "toy")
COEFFS = ("a1", "a2", "b1", "b2", "c1", "c2", "d1", "d2", "l1", "l2", "lbar1", "lbar2", "r1", "r2")


@dataclasses.dataclass(frozen=True)
class ToyScenario:
    """Scalar game whose follower data satisfy the follower assumptions.

    ``Pi1`` is constant (``l1 = -(2 a + c1^2) g1``); ``a2 = -c1 c2`` and
    ``b1 = -c1 d1`` make the first two lines vanish and ``lbar1`` is chosen
    so the third one does.  With ``b2 = -c1 d2`` and ``r1 = 0`` the leader
    assumptions hold as well (see :meth:`leader_mode`).
    """

    a: float = -0.5
    c1: float = 0.3
    c2: float = 0.4
    d1: float = 0.5
    d2: float = 0.3
    b2: float | None = None
    r1: float = 0.5
    r2: float = 0.5
    g1: float = 1.0
    g2: float = 1.0
    l2: float = 0.2
    x0: float = 1.0
    T: float = 1.0

    def leader_mode(self) -> "ToyScenario":
        """Variant with ``r1 = 0`` and ``b2 = -c1 d2``."""
        return dataclasses.replace(self, r1=0.0, b2=-self.c1 * self.d2)

    def build(self, dt: float) -> GameCoefficients:
        if self.d1 == 0:
            raise ConfigurationError("toy scenario needs d1 != 0")
        if self.g1 <= 0:
            raise ConfigurationError("toy scenario needs g1 > 0")
        if self.r1 < 0 or self.r2 <= 0:
            raise ConfigurationError("toy scenario needs r1 >= 0 and r2 > 0")
        grid = build_time_grid(self.T, dt)
        Pi = self.g1
        Xi = self.r1 + self.d1 ** 2 * Pi
        b2 = -self.c1 * self.d2 if self.b2 is None else self.b2
        return GameCoefficients.build(
            grid, x0=[self.x0], g1=[[self.g1]], g2=[[self.g2]],
            a1=self.a, a2=-self.c1 * self.c2, b1=-self.c1 * self.d1, b2=b2,
            c1=self.c1, c2=self.c2, d1=self.d1, d2=self.d2,
            l1=-(2 * self.a + self.c1 ** 2) * self.g1, l2=self.l2,
            lbar1=-self.c2 ** 2 * Pi * self.r1 / Xi, lbar2=0.0,
            r1=self.r1, r2=self.r2)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs."""

    scenario: str = "advertising"
    advertising: AdvertisingScenario = AdvertisingScenario()
    toy: ToyScenario = ToyScenario()
    raw: dict = dataclasses.field(default_factory=dict)
    dt: float = 1e-3
    gamma_dt: float | None = None
    paths: int = 100_000
    seed: int = 42
    threads: int = 1
    u2: float = 1.0
    tol: float = 1e-8
    max_iter: int = 200
    damping: float = 0.5
    theta: str = "full"
    star: str = "adjoint"
    memory_mode: str = "integral"
    eps: float = 0.1
    directions: int = 5
    summary_every: int = 10
    source: str = "<defaults>"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.star not in STAR_VARIANTS:
            raise ConfigurationError(f"star must be one of {STAR_VARIANTS}, got {self.star!r}")
        ThetaPolicy.parse(self.theta)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError("dt must be positive")
        if self.gamma_dt is not None and not self.gamma_dt > 0:
            raise ConfigurationError("gamma_dt must be positive")
        if self.paths < 1:
            raise ConfigurationError("paths must be >= 1")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if not (0 < self.damping <= 1):
            raise ConfigurationError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")
        if self.memory_mode not in ("integral", "average"):
            raise ConfigurationError("memory_mode must be integral or average")
        if not self.eps > 0:
            raise ConfigurationError("eps must be positive")
        if self.directions < 1:
            raise ConfigurationError("directions must be >= 1")

    @property
    def policy(self) -> ThetaPolicy:
        return ThetaPolicy.parse(self.theta)

    @property
    def leader_dt(self) -> float:
        return self.gamma_dt if self.gamma_dt is not None else self.dt

    def coefficients(self, dt: float | None = None) -> GameCoefficients:
        """Model coefficients on a grid of step ``dt`` (default ``self.dt``)."""
        dt = self.dt if dt is None else dt
        if self.scenario == "advertising":
            co = build_scenario(self.advertising, dt)
        elif self.scenario == "toy":
            co = self.toy.build(dt)
        else:
            co = _raw_coefficients(self.raw, dt)
        return co.with_memory_mode(self.memory_mode) if self.memory_mode != "integral" else co

    @property
    def horizon(self) -> float:
        if self.scenario == "advertising":
            return self.advertising.T
        if self.scenario == "toy":
            return self.toy.T
        return float(self.raw.get("T", 1.0))

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw) if kw else self


def parse_matrix(text: str) -> np.ndarray:
    """``"1 2; 3 4"`` -> 2x2 array; commas are accepted as separators."""
    rows = [r.replace(",", " ").split() for r in text.split(";") if r.strip()]
    if not rows:
        raise ConfigurationError(f"empty matrix {text!r}")
    try:
        arr = np.array([[float(v) for v in r] for r in rows])
    except ValueError:
        raise ConfigurationError(f"cannot parse matrix {text!r}") from None
    if len({len(r) for r in rows}) != 1:
        raise ConfigurationError(f"ragged matrix {text!r}")
    return arr


def _raw_coefficients(raw: dict, dt: float) -> GameCoefficients:
    T = float(raw.get("T", 1.0))
    grid = build_time_grid(T, dt)
    if "x0" not in raw:
        raise ConfigurationError("raw scenario needs x0")
    x0 = parse_matrix(raw["x0"]).reshape(-1)
    n = x0.shape[0]
    g1 = parse_matrix(raw.get("g1", " ;".join(["0 " * n] * n))).reshape(n, n)
    g2 = parse_matrix(raw.get("g2", " ;".join(["0 " * n] * n))).reshape(n, n)
    coeffs = {}
    for k in COEFFS:
        if k in raw:
            coeffs[k] = parse_matrix(raw[k])
    return GameCoefficients.build(grid, x0=x0, g1=g1, g2=g2, **coeffs)


_INT = ("paths", "seed", "threads", "max_iter", "directions", "summary_every")
_FLOAT = ("dt", "gamma_dt", "u2", "tol", "damping", "eps")
_STR = ("scenario", "theta", "star", "memory_mode")
_ADV = tuple(f.name for f in dataclasses.fields(AdvertisingScenario))
_TOY = tuple(f.name for f in dataclasses.fields(ToyScenario))
_RAW = COEFFS + ("g1", "g2", "x0", "T")


def _section_value(key: str, value: str, target: dict):
    try:
        target[key] = float(value)
    except ValueError:
        raise ConfigurationError(f"{key} needs a number, got {value!r}") from None


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    """Parse config text.

    Scenario parameters are prefixed by the scenario name
    (``advertising.delta = 0.3``, ``toy.r1 = 0.5``, ``raw.a1 = -0.5``).
    """
    top: dict = {}
    adv: dict = {}
    toy: dict = {}
    raw: dict = {}
    seen: set = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key or not value:
            raise ConfigurationError(f"{source}:{lineno}: empty key or value")
        where = f"{source}:{lineno}"
        if key in seen:
            raise ConfigurationError(f"{where}: duplicate key {key!r}")
        seen.add(key)
        if key.startswith("advertising."):
            k = key.split(".", 1)[1]
            if k not in _ADV:
                raise ConfigurationError(f"{where}: unknown advertising parameter {k!r}")
            _section_value(k, value, adv)
        elif key.startswith("toy."):
            k = key.split(".", 1)[1]
            if k not in _TOY:
                raise ConfigurationError(f"{where}: unknown toy parameter {k!r}")
            _section_value(k, value, toy)
        elif key.startswith("raw."):
            k = key.split(".", 1)[1]
            if k not in _RAW:
                raise ConfigurationError(f"{where}: unknown raw coefficient {k!r}")
            raw[k] = value
        elif key in _INT:
            try:
                top[key] = int(value)
            except ValueError:
                raise ConfigurationError(f"{where}: {key} needs an integer, got {value!r}") from None
        elif key in _FLOAT:
            try:
                top[key] = float(value)
            except ValueError:
                raise ConfigurationError(f"{where}: {key} needs a number, got {value!r}") from None
        elif key in _STR:
            top[key] = value
        else:
            raise ConfigurationError(f"{where}: unknown key {key!r}")
    try:
        return RunConfig(advertising=AdvertisingScenario(**adv), toy=ToyScenario(**toy),
                         raw=raw, source=source, **top)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


BUNDLED = os.path.join(os.path.dirname(__file__), "configs")


def resolve_config_path(path) -> str:
    """``path`` itself if it exists, else the bundled config of that name."""
    path = os.fspath(path)
    if os.path.exists(path):
        return path
    bundled = os.path.join(BUNDLED, os.path.basename(path))
    if os.path.dirname(path) == "" and os.path.exists(bundled):
        return bundled
    raise ConfigurationError(f"config file not found: {path}")


def bundled_config(name: str) -> RunConfig:
    return load_config(os.path.join(BUNDLED, name))


def load_config(path) -> RunConfig:
    path = resolve_config_path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, os.path.basename(path))
