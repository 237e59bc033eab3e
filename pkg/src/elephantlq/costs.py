"""Cost functionals: Monte Carlo estimates, closed forms and stationarity checks."""
from __future__ import annotations

import dataclasses

import numpy as np

from .adjoint import AdjointSolution
from .errors import ConditioningError, ConfigurationError, ShapeError
from .grid import GameCoefficients
from .memory import trapezoid_weights
from .riccati import RiccatiSolution
from .simulate import LinearSystem, PathEnsemble, run_systems


def _T(a):
    return np.swapaxes(a, -1, -2)


@dataclasses.dataclass(frozen=True)
class CostEstimate:
    """Sample mean of a cost with its standard error."""

    value: float
    std_error: float
    n_paths: int
    dt: float
    which: int

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ConfigurationError("cost estimate is not finite")
        if self.std_error < 0:
            raise ConfigurationError("negative standard error")

    @classmethod
    def from_samples(cls, samples, dt: float, which: int) -> "CostEstimate":
        s = np.asarray(samples, dtype=float)
        P = s.shape[0]
        se = float(np.std(s, ddof=1) / np.sqrt(P)) if P > 1 else 0.0
        return cls(float(np.mean(s)), se, P, dt, which)


def path_costs(X, M, U, co: GameCoefficients, i: int) -> np.ndarray:
    """Per-path trapezoid quadrature of player ``i``'s cost.

    ``X`` and ``M`` are ``(paths, N+1, n)`` state and memory samples and
    ``U`` is ``(paths, N+1, k_i)``.
    """
    if i not in (1, 2):
        raise ConfigurationError(f"player must be 1 or 2, got {i!r}")
    if U is None:
        raise ConfigurationError(f"controls of player {i} are missing")
    l = getattr(co, f"l{i}").head
    lb = getattr(co, f"lbar{i}").head
    r = getattr(co, f"r{i}").head
    g = getattr(co, f"g{i}")
    w = trapezoid_weights(co.grid.n_steps, co.grid.dt)
    run = (np.einsum("pki,kij,pkj->pk", X, l, X) + np.einsum("pki,kij,pkj->pk", M, lb, M)
           + np.einsum("pki,kij,pkj->pk", U, r, U))
    return run @ w + np.einsum("pi,ij,pj->p", X[:, -1], g, X[:, -1])


def evaluate_cost(ensemble: PathEnsemble, co: GameCoefficients, i: int) -> CostEstimate:
    """Monte Carlo estimate of ``J^i`` on an ensemble.

    With stored paths the cost is re-integrated from the trajectories;
    otherwise the per-path values accumulated during the simulation are used.
    """
    if i not in (1, 2):
        raise ConfigurationError(f"player must be 1 or 2, got {i!r}")
    if ensemble.result.X is not None:
        xs = ensemble.x_slice
        us = slice(0, co.k1) if i == 1 else slice(co.k1, co.k1 + co.k2)
        samples = path_costs(ensemble.result.X[:, :, xs], ensemble.result.M[:, :, xs],
                             ensemble.result.U[:, :, us], co, i)
    else:
        samples = ensemble.cost_samples(f"J{i}")
    return CostEstimate.from_samples(samples, co.grid.dt, i)


def follower_closed_form_cost(ric: RiccatiSolution, eta1: AdjointSolution, co: GameCoefficients,
                              u2=None, x0=None) -> float:
    """Optimal follower cost for a deterministic leader control ``u2``."""
    from .adjoint import _opponent_path

    x0 = co.x0 if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    u = _opponent_path(u2, co.grid, co.k2)
    Pi = ric.pi1.head
    Xi = ric.xi1.head
    if np.min(np.linalg.eigvalsh(0.5 * (Xi + _T(Xi)))) <= 0:
        k = int(np.argmin(np.linalg.eigvalsh(0.5 * (Xi + _T(Xi)))[:, 0]))
        raise ConditioningError(f"Xi1 is not positive definite at node {k}", node=k)
    eta = eta1.head
    d2u = np.einsum("kij,kj->ki", co.d2.head, u)
    v = np.einsum("kji,kj->ki", co.b1.head, eta) + np.einsum("kji,kj->ki", co.d1.head,
                                                              np.einsum("kij,kj->ki", Pi, d2u))
    run = (np.einsum("ki,kij,kj->k", d2u, Pi, d2u)
           + 2 * np.einsum("kji,kj,ki->k", co.b2.head, eta, u)
           - np.einsum("ki,ki->k", v, np.linalg.solve(Xi, v[..., None])[..., 0]))
    w = trapezoid_weights(co.grid.n_steps, co.grid.dt)
    return float(x0 @ (Pi[0] @ x0 + 2 * eta[0]) + run @ w)


def leader_closed_form_cost(ric: RiccatiSolution, eta2: AdjointSolution, x0) -> float:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    return float(x0 @ (ric.pi2.head[0] @ x0 + eta2.head[0]))


@dataclasses.dataclass(frozen=True)
class StationarityReport:
    """Central and second differences of a cost along control directions.

    ``derivative[d, e]`` and ``std_error[d, e]`` refer to direction ``d`` and
    step ``eps[e]``.  The ``+eps``, ``-eps`` and base runs are copies in one
    simulation, so they consume identical Brownian increments
    (``common_increments``).
    """

    eps: tuple
    derivative: np.ndarray
    std_error: np.ndarray
    curvature: np.ndarray
    curvature_se: np.ndarray
    multiple: float
    seed: int
    n_paths: int
    common_increments: bool
    base_samples: np.ndarray | None = None

    def base_estimate(self, dt: float, which: int) -> CostEstimate:
        """Cost of the unperturbed copy, which is simulated alongside the shifts."""
        if self.base_samples is None:
            raise ConfigurationError("report carries no base samples")
        return CostEstimate.from_samples(self.base_samples, dt, which)

    @property
    def stationary(self) -> np.ndarray:
        return np.abs(self.derivative) <= self.multiple * self.std_error

    @property
    def convex(self) -> np.ndarray:
        return self.curvature > 0

    @property
    def passed(self) -> bool:
        return bool(np.all(self.stationary) and np.all(self.convex))

    def rows(self):
        for d in range(self.derivative.shape[0]):
            for e, eps in enumerate(self.eps):
                yield (d, eps, self.derivative[d, e], self.std_error[d, e],
                       self.curvature[d, e], self.curvature_se[d, e],
                       bool(self.stationary[d, e]), bool(self.convex[d, e]))


def stationarity_check(base: LinearSystem, directions, eps, control: slice, cost_name: str,
                       n_paths: int = 100_000, seed: int = 42, multiple: float = 2.0,
                       threads: int = 1, noise: bool = True, backend: str | None = None
                       ) -> StationarityReport:
    """Finite-difference stationarity of one cost along control directions.

    Parameters
    ----------
    base : system simulated under the candidate optimal control.
    directions : iterable of ``(N+1, k)`` arrays on the ``[0, T]`` nodes,
        ``k`` being the width of ``control``.
    eps : positive step or list of steps.
    control : columns of the control vector that are perturbed.
    cost_name : which of ``base.costs`` is differentiated.
    """
    eps = tuple(float(e) for e in np.atleast_1d(eps))
    if any(not (e > 0) for e in eps):
        raise ConfigurationError("finite-difference steps must be positive")
    names = [c.name for c in base.costs]
    if cost_name not in names:
        raise ConfigurationError(f"system has no cost named {cost_name!r}")
    N1 = base.grid.n_steps + 1
    q = base.n_controls
    width = len(range(q)[control])
    dirs = []
    for v in directions:
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape != (N1, width):
            raise ShapeError(f"direction has shape {v.shape}, expected {(N1, width)}")
        full = np.zeros((N1, q))
        full[:, control] = v
        dirs.append(full)
    shifts = [np.zeros((N1, q))]
    for v in dirs:
        for e in eps:
            shifts += [e * v, -e * v]
    sysm = dataclasses.replace(base, shifts=np.stack(shifts))
    (res,), _ = run_systems([sysm], n_paths, seed, threads, noise=noise, backend=backend)
    c = names.index(cost_name)
    J = res.copy_costs[:, :, c]
    J0 = J[:, 0]
    nd, ne = len(dirs), len(eps)
    der = np.zeros((nd, ne))
    se = np.zeros((nd, ne))
    cur = np.zeros((nd, ne))
    cse = np.zeros((nd, ne))
    sq = np.sqrt(n_paths)
    idx = 1
    for d in range(nd):
        for j, e in enumerate(eps):
            Jp = J[:, idx]
            Jm = J[:, idx + 1]
            idx += 2
            diff = (Jp - Jm) / (2 * e)
            curv = (Jp - 2 * J0 + Jm) / (e * e)
            der[d, j] = diff.mean()
            cur[d, j] = curv.mean()
            if n_paths > 1:
                se[d, j] = diff.std(ddof=1) / sq
                cse[d, j] = curv.std(ddof=1) / sq
    return StationarityReport(eps, der, se, cur, cse, multiple, seed, n_paths, True, J0.copy())
