"""Monte Carlo simulation of linear memory SDEs under feedback.

Every simulation is expressed as one or more :class:`LinearSystem`
instances sharing the same Brownian increments.  Paths are processed in
fixed-size chunks; path ``i`` draws its increments from
``SeedSequence(seed, spawn_key=(i,))``, so results do not depend on the
chunking of work across threads.
"""
from __future__ import annotations

import concurrent.futures
import dataclasses
import logging

import numpy as np

from . import kernels
from .errors import ConfigurationError, ShapeError, SimulationError
from .feedback import FeedbackGains, FollowerGains
from .grid import GameCoefficients, TimeGrid
from .leader import StackedBlocks
from .memory import trapezoid_weights
from .util import write_csv

log = logging.getLogger(__name__)

CHUNK = 4096


@dataclasses.dataclass(frozen=True)
class QuadraticCost:
    """``int x^T lx x + M^T lm M + u^T ru u dt + x(T)^T g x(T)`` on a system.

    Arrays are node samples on ``[0, T]`` in the full system coordinates.
    """

    name: str
    lx: np.ndarray
    lm: np.ndarray
    ru: np.ndarray
    g: np.ndarray


@dataclasses.dataclass
class LinearSystem:
    """Coefficients of ``dX = (F X + G M + Bu u + f) dt + (Fd X + Gd M + Du u + fd) dW``
    with control ``u = Kx X + Km M + k0``.  Missing entries are zero."""

    grid: TimeGrid
    x0: np.ndarray
    F: np.ndarray
    Bu: np.ndarray
    G: np.ndarray | None = None
    f: np.ndarray | None = None
    Fd: np.ndarray | None = None
    Gd: np.ndarray | None = None
    Du: np.ndarray | None = None
    fd: np.ndarray | None = None
    Kx: np.ndarray | None = None
    Km: np.ndarray | None = None
    k0: np.ndarray | None = None
    costs: tuple = ()
    shifts: np.ndarray | None = None

    def __post_init__(self):
        N1 = self.grid.n_steps + 1
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        m = self.x0.shape[0]
        q = np.asarray(self.Bu).shape[-1]
        shapes = {"F": (m, m), "G": (m, m), "Fd": (m, m), "Gd": (m, m), "Bu": (m, q),
                  "Du": (m, q), "f": (m,), "fd": (m,), "Kx": (q, m), "Km": (q, m), "k0": (q,)}
        for name, shp in shapes.items():
            v = getattr(self, name)
            v = np.zeros((N1,) + shp) if v is None else np.asarray(v, dtype=float)
            if v.shape == shp:
                v = np.broadcast_to(v, (N1,) + shp)
            if v.shape != (N1,) + shp:
                raise ShapeError(f"{name} has shape {v.shape}, expected {(N1,) + shp}")
            setattr(self, name, np.ascontiguousarray(v))
        if self.shifts is None:
            self.shifts = np.zeros((1, N1, q))
        self.shifts = np.ascontiguousarray(self.shifts, dtype=float)
        if self.shifts.ndim != 3 or self.shifts.shape[1:] != (N1, q):
            raise ShapeError(f"shifts must have shape (S, {N1}, {q}), got {self.shifts.shape}")

    @property
    def dim(self) -> int:
        return self.x0.shape[0]

    @property
    def n_controls(self) -> int:
        return self.Bu.shape[-1]

    def weights(self):
        """Cost weights with trapezoid factors folded in."""
        N = self.grid.n_steps
        m, q = self.dim, self.n_controls
        C = max(len(self.costs), 1)
        w = trapezoid_weights(N, self.grid.dt)[:, None, None]
        Wx = np.zeros((C, N + 1, m, m))
        Wm = np.zeros((C, N + 1, m, m))
        Wu = np.zeros((C, N + 1, q, q))
        Gt = np.zeros((C, m, m))
        for c, cost in enumerate(self.costs):
            Wx[c] = w * cost.lx
            Wm[c] = w * cost.lm
            Wu[c] = w * cost.ru
            Gt[c] = cost.g
        return Wx, Wm, Wu, Gt


def brownian_increments(seed: int, first: int, count: int, n_steps: int, dt: float) -> np.ndarray:
    """Increments of paths ``first .. first+count-1``, one generator per path."""
    out = np.empty((count, n_steps))
    sq = np.sqrt(dt)
    for j in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(first + j,)))
        out[j] = rng.standard_normal(n_steps) * sq
    return out


@dataclasses.dataclass
class SystemResult:
    """Merged output for one system of an ensemble run."""

    costs: np.ndarray        # (paths, C) for copy 0
    copy_costs: np.ndarray   # (paths, S, C)
    sx: np.ndarray
    sx2: np.ndarray
    su: np.ndarray
    su2: np.ndarray
    X: np.ndarray | None = None
    M: np.ndarray | None = None
    U: np.ndarray | None = None


def run_systems(systems, n_paths: int, seed: int, threads: int = 1, store: bool = False,
                noise: bool = True, backend: str | None = None, chunk: int = CHUNK,
                keep_increments: bool = False):
    """Simulate every system on the same Brownian increments.

    Returns ``(results, increments)`` where ``increments`` is ``None``
    unless ``keep_increments``.
    """
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    systems = list(systems)
    grid = systems[0].grid
    for s in systems:
        if s.grid != grid:
            raise ShapeError("systems of one ensemble must share the grid")
    N = grid.n_steps
    prepared = [(s, s.weights()) for s in systems]
    starts = list(range(0, n_paths, chunk))

    def work(start):
        count = min(chunk, n_paths - start)
        if noise:
            dW = brownian_increments(seed, start, count, N, grid.dt)
        else:
            dW = np.zeros((count, N))
        outs = []
        for s, (Wx, Wm, Wu, Gt) in prepared:
            r = kernels.euler_chunk(s.x0, s.F, s.G, s.Bu, s.f, s.Fd, s.Gd, s.Du, s.fd,
                                    s.Kx, s.Km, s.k0, s.shifts, Wx, Wm, Wu, Gt, dW, grid.dt,
                                    store=store, backend=backend)
            if r["bad"][0] >= 0:
                p, k = r["bad"]
                raise SimulationError(f"non-finite state on path {start + p} at step {k}",
                                      path=start + p, step=k)
            outs.append(r)
        return outs, (dW if keep_increments else None)

    if threads > 1 and len(starts) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]

    results = []
    for i in range(len(systems)):
        chunks = [p[0][i] for p in parts]
        all_costs = np.concatenate([c["costs"] for c in chunks])
        res = SystemResult(
            costs=all_costs[:, 0, :],
            copy_costs=all_costs,
            sx=_ordered_sum([c["sx"] for c in chunks]),
            sx2=_ordered_sum([c["sx2"] for c in chunks]),
            su=_ordered_sum([c["su"] for c in chunks]),
            su2=_ordered_sum([c["su2"] for c in chunks]),
        )
        if store:
            res.X = np.concatenate([c["X"] for c in chunks])
            res.M = np.concatenate([c["M"] for c in chunks])
            res.U = np.concatenate([c["U"] for c in chunks])
        results.append(res)
    incr = np.concatenate([p[1] for p in parts]) if keep_increments else None
    return results, incr


def _ordered_sum(arrs):
    total = np.zeros_like(arrs[0])
    for a in arrs:
        total = total + a
    return total


@dataclasses.dataclass
class PathEnsemble:
    """Result of a closed- or open-loop run.

    ``state`` names the simulated variable (``phi`` for the stacked leader
    system, ``x`` otherwise).  Full paths are present only when requested;
    per-path costs and per-node moment sums are always kept.
    """

    grid: TimeGrid
    n_paths: int
    seed: int
    state: str
    control_names: tuple
    result: SystemResult
    cost_names: tuple
    x_slice: slice
    controls: dict
    increments: np.ndarray | None = None

    @property
    def seed_record(self) -> str:
        return f"path i uses numpy SeedSequence({self.seed}, spawn_key=(i,)) with PCG64"

    @property
    def paths(self) -> np.ndarray | None:
        return self.result.X

    @property
    def memory(self) -> np.ndarray | None:
        return self.result.M

    def cost_samples(self, name: str) -> np.ndarray:
        try:
            c = self.cost_names.index(name)
        except ValueError:
            raise ConfigurationError(f"ensemble carries no cost named {name!r}") from None
        return self.result.costs[:, c]

    def moments(self):
        """Per-node mean and unbiased variance of the state and the controls."""
        P = self.n_paths
        r = self.result
        mx = r.sx / P
        mu = r.su / P
        denom = max(P - 1, 1)
        vx = np.maximum(r.sx2 - P * mx * mx, 0.0) / denom
        vu = np.maximum(r.su2 - P * mu * mu, 0.0) / denom
        return mx, vx, mu, vu

    def summary_csv(self, path, every: int = 1) -> None:
        mx, vx, mu, vu = self.moments()
        ks = np.arange(0, self.grid.n_steps + 1, max(1, every))
        if ks[-1] != self.grid.n_steps:
            ks = np.append(ks, self.grid.n_steps)
        m = mx.shape[1]
        header = ["t"]
        header += [f"mean_{self.state}{i}" for i in range(m)]
        header += [f"var_{self.state}{i}" for i in range(m)]
        header += [f"mean_{c}" for c in self.control_names]
        header += [f"var_{c}" for c in self.control_names]
        rows = np.column_stack([self.grid.head[ks], mx[ks], vx[ks], mu[ks], vu[ks]])
        write_csv(path, header, rows)

    def paths_csv(self, path) -> None:
        """Full dump: path index, t, state components, controls."""
        if self.result.X is None:
            raise ConfigurationError("ensemble was simulated without store=True")
        X, U = self.result.X, self.result.U
        P, N1, m = X.shape
        header = ["path", "t"] + [f"{self.state}{i}" for i in range(m)] + list(self.control_names)
        t = self.grid.head

        def rows():
            for p in range(P):
                for k in range(N1):
                    yield [p, t[k], *X[p, k], *U[p, k]]
        write_csv(path, header, rows())


def _pad(arr, rows, cols, r0, c0):
    N1 = arr.shape[0]
    out = np.zeros((N1, rows, cols))
    out[:, r0:r0 + arr.shape[1], c0:c0 + arr.shape[2]] = arr
    return out


def _player_cost(co: GameCoefficients, i: int, m: int, q: int, xs: slice, us: slice,
                 name: str) -> QuadraticCost:
    l = getattr(co, f"l{i}").head
    lb = getattr(co, f"lbar{i}").head
    r = getattr(co, f"r{i}").head
    g = getattr(co, f"g{i}")
    N1 = co.grid.n_steps + 1
    lx = np.zeros((N1, m, m))
    lm = np.zeros((N1, m, m))
    ru = np.zeros((N1, q, q))
    gt = np.zeros((m, m))
    lx[:, xs, xs] = l
    lm[:, xs, xs] = lb
    ru[:, us, us] = r
    gt[xs, xs] = g
    return QuadraticCost(name, lx, lm, ru, gt)


def _path_values(u, grid: TimeGrid, k: int) -> np.ndarray:
    N1 = grid.n_steps + 1
    if u is None:
        return np.zeros((N1, k))
    if callable(u):
        return np.array([np.atleast_1d(u(t)) for t in grid.head], dtype=float).reshape(N1, k)
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.shape == (k,):
        return np.broadcast_to(u, (N1, k)).copy()
    return u.reshape(N1, k)


def open_loop_system(co: GameCoefficients, u1=None, u2=None) -> LinearSystem:
    """Original state equation with deterministic control values ``u1, u2``."""
    n, k1, k2 = co.n, co.k1, co.k2
    grid = co.grid
    k0 = np.concatenate([_path_values(u1, grid, k1), _path_values(u2, grid, k2)], axis=1)
    q = k1 + k2
    costs = (_player_cost(co, 1, n, q, slice(0, n), slice(0, k1), "J1"),
             _player_cost(co, 2, n, q, slice(0, n), slice(k1, q), "J2"))
    return LinearSystem(grid, co.x0.reshape(-1), F=co.a1.head, G=co.a2.head,
                        Bu=np.concatenate([co.b1.head, co.b2.head], axis=2),
                        Fd=co.c1.head, Gd=co.c2.head,
                        Du=np.concatenate([co.d1.head, co.d2.head], axis=2),
                        k0=k0, costs=costs)


def follower_system(co: GameCoefficients, gains: FollowerGains, eta1, u2=None) -> LinearSystem:
    """State under the follower's best response to a deterministic ``u2``."""
    sys = open_loop_system(co, None, u2)
    n, k1 = co.n, co.k1
    u2v = sys.k0[:, k1:]
    eta = eta1.head if hasattr(eta1, "head") else np.asarray(eta1, dtype=float)
    k0 = sys.k0.copy()
    k0[:, :k1] = (np.einsum("kij,kj->ki", gains.Keta, eta)
                  + np.einsum("kij,kj->ki", gains.Ku, u2v))
    Km = np.zeros_like(sys.Km)
    Km[:, :k1, :n] = gains.Kx
    return dataclasses.replace(sys, Km=Km, k0=k0)


def closed_loop_system(co: GameCoefficients, blocks: StackedBlocks, gains: FeedbackGains) -> LinearSystem:
    """Stacked ``phi = (xi, x)`` system under the Stackelberg feedback."""
    n, k1, k2 = co.n, co.k1, co.k2
    m, q = 2 * n, k1 + k2
    N1 = co.grid.n_steps + 1
    P, Q = gains.P, gains.Q
    Kx = np.concatenate([gains.L2 + gains.L3, gains.Lu2], axis=1)
    Km = np.concatenate([gains.L1, np.zeros((N1, k2, m))], axis=1)
    zero1 = np.zeros((N1, m, k1))
    x0 = np.concatenate([np.zeros(n), co.x0.reshape(-1)])
    xs = slice(n, 2 * n)
    costs = (_player_cost(co, 1, m, q, xs, slice(0, k1), "J1"),
             _player_cost(co, 2, m, q, xs, slice(k1, q), "J2"))
    return LinearSystem(
        co.grid, x0,
        F=blocks.A1 + blocks.B @ P + blocks.C @ Q, G=blocks.A2,
        Bu=np.concatenate([zero1, blocks.D], axis=2),
        Fd=blocks.Abar1 + np.swapaxes(blocks.C, 1, 2) @ P + blocks.Cbar @ Q, Gd=blocks.Abar2,
        Du=np.concatenate([zero1, blocks.Dbar], axis=2),
        Kx=Kx, Km=Km, costs=costs)


def _ensemble(sys, res, n_paths, seed, state, ctrl, xs, incr=None):
    return PathEnsemble(sys.grid, n_paths, seed, state, ctrl, res,
                        tuple(c.name for c in sys.costs), xs, {}, incr)


def _ctrl_names(k1, k2):
    return tuple(f"u1_{i}" for i in range(k1)) + tuple(f"u2_{i}" for i in range(k2))


def simulate_open_loop(co: GameCoefficients, u1=None, u2=None, n_paths: int = 1000,
                       seed: int = 0, threads: int = 1, store: bool = False,
                       backend: str | None = None) -> PathEnsemble:
    sys = open_loop_system(co, u1, u2)
    (res,), _ = run_systems([sys], n_paths, seed, threads, store, backend=backend)
    return _ensemble(sys, res, n_paths, seed, "x", _ctrl_names(co.k1, co.k2), slice(0, co.n))


def simulate_follower(co: GameCoefficients, gains: FollowerGains, eta1, u2=None,
                      n_paths: int = 1000, seed: int = 0, threads: int = 1,
                      store: bool = False, backend: str | None = None) -> PathEnsemble:
    sys = follower_system(co, gains, eta1, u2)
    (res,), _ = run_systems([sys], n_paths, seed, threads, store, backend=backend)
    return _ensemble(sys, res, n_paths, seed, "x", _ctrl_names(co.k1, co.k2), slice(0, co.n))


def simulate_closed_loop(co: GameCoefficients, blocks: StackedBlocks, gains: FeedbackGains,
                         n_paths: int = 1000, seed: int = 0, threads: int = 1,
                         store: bool = False, noise_free: bool = False,
                         backend: str | None = None,
                         keep_increments: bool = False) -> PathEnsemble:
    """Stacked closed loop; ``noise_free`` drops the Brownian increments.

    In noise-free mode the diffusion blocks are irrelevant and every path is
    identical, so a single path suffices.
    """
    sys = closed_loop_system(co, blocks, gains)
    (res,), incr = run_systems([sys], n_paths, seed, threads, store, noise=not noise_free,
                               backend=backend, keep_increments=keep_increments)
    return _ensemble(sys, res, n_paths, seed, "phi", _ctrl_names(co.k1, co.k2),
                     slice(co.n, 2 * co.n), incr)
