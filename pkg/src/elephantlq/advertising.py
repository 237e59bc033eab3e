"""Cooperative advertising channel: a manufacturer (leader) and a retailer (follower).

The brand-image state ``x = exp(tau t / 2) p`` follows a scalar SDE whose
coefficients are assembled here from the economic parameters.  The value
kernels of both players solve scalar linear ODEs, which are exported for
plotting next to the closed-form expressions quoted with the model (those
expressions drop the growth factor of the terminal term and therefore do
not solve the ODEs; both are written so the gap is visible).
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import ConfigurationError
from .grid import GameCoefficients, MatrixFunction, build_time_grid
from .util import write_csv


@dataclasses.dataclass(frozen=True)
class AdvertisingScenario:
    """Economic parameters of the channel.

    ``d1`` defaults to ``lam_r exp(-tau1) / c1`` so that ``b1 + c1 d1 = 0``.
    """

    lam_m: float = 1.0
    lam_r: float = 1.0
    delta: float = 0.3
    tau: float = 0.2
    tau1: float = 0.1
    tau2: float = 0.1
    mu_m: float = 1.0
    mu_r: float = 1.0
    pi_m: float = 0.002
    pi_r: float = 0.1
    sigma_m: float = 0.3
    sigma_r: float = 0.7
    m1: float = 1000.0
    m2: float = 2000.0
    c1: float = 1.0
    d1: float | None = None
    d2: float = 0.5
    lbar1: float = 0.0
    lbar2: float = 0.0
    x0: float = 1.0
    T: float = 10.0

    @property
    def b1(self) -> float:
        return -self.lam_r * math.exp(-self.tau1)

    @property
    def b2(self) -> float:
        return self.lam_m * math.exp(-self.tau2)

    @property
    def d1_value(self) -> float:
        if self.d1 is not None:
            return float(self.d1)
        if self.c1 == 0:
            return math.nan
        return self.lam_r * math.exp(-self.tau1) / self.c1

    @property
    def growth(self) -> float:
        """``c1^2 - tau - 2 delta``."""
        return self.c1 ** 2 - self.tau - 2 * self.delta

    @property
    def demand_scale(self) -> float:
        return math.sqrt(self.sigma_m + self.sigma_r)

    def violations(self) -> list[str]:
        """Every violated standing constraint, as readable messages."""
        out = []
        d1 = self.d1_value
        if not np.isfinite(d1) or d1 == 0:
            out.append("d1 must be non-zero")
        if self.growth < 0:
            out.append(f"c1^2 - tau - 2 delta = {self.growth:.6g} must be >= 0")
        if np.isfinite(d1):
            gap = self.b1 + self.c1 * d1
            if abs(gap) > 1e-12 * max(1.0, abs(self.b1)):
                out.append(f"b1 + c1 d1 = {gap:.6g} must vanish (b1 = -lam_r exp(-tau1))")
        bound = self.pi_r * self.demand_scale * math.exp(self.growth * self.T)
        if self.m1 < bound:
            out.append(f"m1 = {self.m1:.6g} is below pi_r sqrt(sigma_m + sigma_r) "
                       f"exp((c1^2 - tau - 2 delta) T) = {bound:.6g}")
        for name in ("lam_m", "mu_m", "mu_r", "m1", "m2", "T"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive")
        for name in ("delta", "sigma_m", "sigma_r"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be non-negative")
        return out


def build_scenario(s: AdvertisingScenario, dt: float = 1e-3) -> GameCoefficients:
    """Model coefficients of the channel on a grid of step ``dt``.

    Raises
    ------
    ConfigurationError
        Listing every violated standing constraint.
    """
    bad = s.violations()
    if bad:
        raise ConfigurationError("advertising scenario is invalid: " + "; ".join(bad))
    grid = build_time_grid(s.T, dt)
    d1 = s.d1_value
    return GameCoefficients.build(
        grid, x0=[s.x0], g1=[[s.m1]], g2=[[s.m2]],
        a1=-0.5 * s.tau - s.delta, a2=0.0, c2=0.0,
        b1=s.b1, b2=s.b2, c1=s.c1, d1=d1, d2=s.d2,
        l1=-s.pi_r * s.demand_scale, l2=-s.pi_m * s.demand_scale,
        lbar1=-s.lbar1, lbar2=-s.lbar2,
        r1=0.5 * s.mu_r * math.exp(-s.tau1) * d1 * d1,
        r2=0.5 * s.mu_m * math.exp(-s.tau2))


def displayed_kernels(s: AdvertisingScenario, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The closed-form expressions quoted alongside the model.

    ``-pi sqrt(sigma_m + sigma_r) int_t^T exp(k (s - t)) ds + m`` with
    ``k = c1^2 - tau - 2 delta``.  They are evaluated as written.
    """
    k = s.growth
    t = np.asarray(t, dtype=float)
    tail = (np.expm1(k * (s.T - t)) / k) if k != 0 else (s.T - t)
    return (-s.pi_r * s.demand_scale * tail + s.m1,
            -s.pi_m * s.demand_scale * tail + s.m2)


def ode_kernels(s: AdvertisingScenario, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Integrating-factor solutions of the two value-kernel ODEs.

    ``P' = -k P + pi sqrt(sigma_m + sigma_r)``, ``P(T) = m`` with
    ``k = c1^2 - tau - 2 delta``.
    """
    k = s.growth
    t = np.asarray(t, dtype=float)
    e = np.exp(k * (s.T - t))
    tail = (np.expm1(k * (s.T - t)) / k) if k != 0 else (s.T - t)
    return (s.m1 * e - s.pi_r * s.demand_scale * tail,
            s.m2 * e - s.pi_m * s.demand_scale * tail)


def export_figure_data(s: AdvertisingScenario, pi1: MatrixFunction, pi2: MatrixFunction, path) -> None:
    """CSV ``t, pi1, pi2, pi1_display, pi2_display`` on ``[0, T]``."""
    grid = pi1.grid
    t = grid.head
    disp1, disp2 = displayed_kernels(s, t)
    rows = np.column_stack([t, pi1.head[:, 0, 0], pi2.head[:, 0, 0], disp1, disp2])
    try:
        write_csv(path, ["t", "pi1", "pi2", "pi1_display", "pi2_display"], rows)
    except OSError as exc:
        raise ConfigurationError(f"cannot write figure data to {path}: {exc}") from exc
