"""Time grids, sampled matrix functions and the model coefficients.

Every solver in the package works on a uniform grid covering ``[0, 2T]``.
The second half exists only to host the zero extension used by the
anticipated (forward-looking) terms: coefficients, value kernels and
adjoint processes are identically zero on ``(T, 2T]`` while the node at
``T`` keeps the value of the ``[0, T]`` piece.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, RangeError, ShapeError

_NODE_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, 2T]`` with step ``dt``."""

    T: float
    dt: float
    n_steps: int

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(2 * self.n_steps + 1) * self.dt

    @property
    def head(self) -> np.ndarray:
        """Nodes of the ``[0, T]`` piece."""
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def size(self) -> int:
        return 2 * self.n_steps + 1

    def index(self, t: float, span: float | None = None) -> float:
        """Fractional node index of ``t``; raises outside ``[0, span]``."""
        span = 2 * self.T if span is None else span
        if not (-_NODE_TOL * self.dt <= t <= span + _NODE_TOL * self.dt):
            raise RangeError(f"t={t!r} outside [0, {span!r}]")
        return min(max(t / self.dt, 0.0), span / self.dt)

    def node_of(self, t: float) -> int:
        """Index of the node at ``t``; raises if ``t`` is not a node."""
        k = self.index(t)
        j = int(round(k))
        if abs(k - j) > 1e-7:
            raise RangeError(f"t={t!r} is not a grid node (dt={self.dt!r})")
        return j

    def refine(self, factor: int) -> "TimeGrid":
        return build_time_grid(self.T, self.dt / factor)


def build_time_grid(T: float, dt: float) -> TimeGrid:
    """Build the ``[0, 2T]`` grid; ``T`` must be an integer multiple of ``dt``."""
    if not (np.isfinite(T) and T > 0):
        raise ConfigurationError(f"horizon T must be positive, got {T!r}")
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigurationError(f"step dt must be positive, got {dt!r}")
    ratio = T / dt
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ConfigurationError(f"T={T!r} is not an integer multiple of dt={dt!r}")
    return TimeGrid(T=float(T), dt=float(T) / n, n_steps=n)


class MatrixFunction:
    """Matrix-valued function sampled on grid nodes, linearly interpolated.

    ``values`` has shape ``(K, rows, cols)`` where ``K`` is either
    ``n_steps + 1`` (defined on ``[0, T]``) or ``2 n_steps + 1`` (defined on
    ``[0, 2T]``).
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: TimeGrid, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None, None]
        elif values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3:
            raise ShapeError(f"values must be (K, rows, cols), got {values.shape}")
        if values.shape[0] not in (grid.n_steps + 1, grid.size):
            raise ShapeError(
                f"{values.shape[0]} samples do not match grid with {grid.n_steps} steps"
            )
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    @property
    def extended(self) -> bool:
        return self.values.shape[0] == self.grid.size

    @property
    def span(self) -> float:
        return 2 * self.grid.T if self.extended else self.grid.T

    @property
    def head(self) -> np.ndarray:
        """Samples on the ``[0, T]`` nodes."""
        return self.values[: self.grid.n_steps + 1]

    def eval(self, t: float) -> np.ndarray:
        k = self.grid.index(t, self.span)
        j = int(math.floor(k))
        frac = k - j
        if frac <= 1e-12 or j + 1 >= self.values.shape[0]:
            return self.values[min(j, self.values.shape[0] - 1)].copy()
        if frac >= 1 - 1e-12:
            return self.values[j + 1].copy()
        return (1 - frac) * self.values[j] + frac * self.values[j + 1]

    __call__ = eval

    def midpoints(self) -> np.ndarray:
        """Interpolated values at ``t_k + dt/2`` for ``k = 0..N-1`` on ``[0, T]``."""
        h = self.head
        return 0.5 * (h[:-1] + h[1:])

    def transpose(self) -> "MatrixFunction":
        return MatrixFunction(self.grid, np.swapaxes(self.values, 1, 2))

    def __repr__(self):
        return f"MatrixFunction(shape={self.shape}, span={self.span})"

    @classmethod
    def constant(cls, grid: TimeGrid, value, extended: bool = True) -> "MatrixFunction":
        value = np.atleast_2d(np.asarray(value, dtype=float))
        K = grid.n_steps + 1
        vals = np.broadcast_to(value, (K,) + value.shape).copy()
        f = cls(grid, vals)
        return zero_extend(f, grid) if extended else f

    @classmethod
    def from_callable(cls, grid: TimeGrid, func: Callable[[float], object],
                      extended: bool = True) -> "MatrixFunction":
        vals = np.stack([np.atleast_2d(np.asarray(func(t), dtype=float)) for t in grid.head])
        f = cls(grid, vals)
        return zero_extend(f, grid) if extended else f


def zero_extend(f: MatrixFunction, grid: TimeGrid) -> MatrixFunction:
    """Extend a ``[0, T]`` function by zero on ``(T, 2T]``; ``f(T)`` is kept."""
    if f.grid.n_steps != grid.n_steps or f.grid.dt != grid.dt:
        raise ShapeError("function and grid disagree")
    if f.extended:
        tail = f.values[grid.n_steps + 1:]
        if np.any(tail != 0.0):
            raise ShapeError("function is already defined (non-zero) beyond T")
        return f
    vals = np.zeros((grid.size,) + f.shape)
    vals[: grid.n_steps + 1] = f.values
    return MatrixFunction(grid, vals)


def as_function(grid: TimeGrid, value, extended: bool = True) -> MatrixFunction:
    """Coerce a constant, callable, node array or MatrixFunction."""
    if isinstance(value, MatrixFunction):
        return zero_extend(value, grid) if extended else value
    if callable(value):
        return MatrixFunction.from_callable(grid, value, extended)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 3 or (arr.ndim >= 1 and arr.shape[0] in (grid.n_steps + 1, grid.size)
                         and arr.ndim == 3):
        f = MatrixFunction(grid, arr)
        return zero_extend(f, grid) if extended and not f.extended else f
    return MatrixFunction.constant(grid, arr, extended)


# name -> (rows, cols) expressed through the dimension symbols
_COEFF_SHAPES = {
    "a1": ("n", "n"), "a2": ("n", "n"), "c1": ("n", "n"), "c2": ("n", "n"),
    "b1": ("n", "k1"), "d1": ("n", "k1"), "b2": ("n", "k2"), "d2": ("n", "k2"),
    "l1": ("n", "n"), "l2": ("n", "n"), "lbar1": ("n", "n"), "lbar2": ("n", "n"),
    "r1": ("k1", "k1"), "r2": ("k2", "k2"),
}
_SYMMETRIC = ("l1", "l2", "lbar1", "lbar2", "r1", "r2")


@dataclasses.dataclass(frozen=True)
class GameCoefficients:
    """All model data of the two-player game with elephant memory.

    Coefficient functions are zero-extended to ``[0, 2T]``.  Memory terms
    enter through the running integral of the state (see
    :mod:`elephantlq.memory`); ``memory_mode`` records whether the
    coefficients have been rescaled for the running-average convention.
    """

    grid: TimeGrid
    a1: MatrixFunction
    a2: MatrixFunction
    b1: MatrixFunction
    b2: MatrixFunction
    c1: MatrixFunction
    c2: MatrixFunction
    d1: MatrixFunction
    d2: MatrixFunction
    l1: MatrixFunction
    l2: MatrixFunction
    lbar1: MatrixFunction
    lbar2: MatrixFunction
    r1: MatrixFunction
    r2: MatrixFunction
    g1: np.ndarray
    g2: np.ndarray
    x0: np.ndarray
    memory_mode: str = "integral"

    def __post_init__(self):
        n = self.n
        dims = {"n": n, "k1": self.k1, "k2": self.k2}
        for name, (r, c) in _COEFF_SHAPES.items():
            f = getattr(self, name)
            if not isinstance(f, MatrixFunction):
                raise ConfigurationError(f"{name} must be a MatrixFunction")
            if f.shape != (dims[r], dims[c]):
                raise ShapeError(f"{name} has shape {f.shape}, expected {(dims[r], dims[c])}")
            if not f.extended:
                raise ConfigurationError(f"{name} is not zero-extended to [0, 2T]")
            if not np.all(np.isfinite(f.values)):
                raise ConfigurationError(f"{name} has non-finite samples")
            if np.any(f.values[self.grid.n_steps + 1:] != 0.0):
                raise ConfigurationError(f"{name} is not zero on (T, 2T]")
        for name in _SYMMETRIC:
            v = getattr(self, name).values
            asym = np.max(np.abs(v - np.swapaxes(v, 1, 2)), initial=0.0)
            if asym > 1e-12 * max(1.0, np.max(np.abs(v), initial=0.0)):
                raise ConfigurationError(f"{name} is not symmetric (defect {asym:.3g})")
        for name in ("g1", "g2"):
            g = getattr(self, name)
            if g.shape != (n, n):
                raise ShapeError(f"{name} has shape {g.shape}, expected {(n, n)}")
            if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
                raise ConfigurationError(f"{name} is not symmetric")
            if not np.all(np.isfinite(g)):
                raise ConfigurationError(f"{name} has non-finite entries")
        if self.x0.shape != (n,):
            raise ShapeError(f"x0 has shape {self.x0.shape}, expected {(n,)}")
        if self.memory_mode not in ("integral", "average"):
            raise ConfigurationError(f"unknown memory_mode {self.memory_mode!r}")

    @property
    def n(self) -> int:
        return self.a1.shape[0]

    @property
    def k1(self) -> int:
        return self.b1.shape[1]

    @property
    def k2(self) -> int:
        return self.b2.shape[1]

    @property
    def T(self) -> float:
        return self.grid.T

    @classmethod
    def build(cls, grid: TimeGrid, x0, g1, g2, **coeffs) -> "GameCoefficients":
        """Build from constants, callables of ``t`` or node arrays.

        Missing coefficients default to zero once ``n``, ``k1`` and ``k2`` can
        be inferred from ``a1``/``x0``, ``b1``/``d1``/``r1`` and
        ``b2``/``d2``/``r2``.
        """
        unknown = set(coeffs) - set(_COEFF_SHAPES)
        if unknown:
            raise ConfigurationError(f"unknown coefficients: {sorted(unknown)}")
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        n = x0.shape[0]
        funcs = {k: as_function(grid, v) for k, v in coeffs.items()}
        k1 = _infer(funcs, ("b1", "d1"), 1, "r1", 1)
        k2 = _infer(funcs, ("b2", "d2"), 1, "r2", 1)
        dims = {"n": n, "k1": k1, "k2": k2}
        for name, (r, c) in _COEFF_SHAPES.items():
            if name not in funcs:
                funcs[name] = MatrixFunction.constant(grid, np.zeros((dims[r], dims[c])))
        g1 = np.atleast_2d(np.asarray(g1, dtype=float))
        g2 = np.atleast_2d(np.asarray(g2, dtype=float))
        return cls(grid=grid, g1=g1, g2=g2, x0=x0, **funcs)

    def replace(self, **changes) -> "GameCoefficients":
        conv = {}
        for k, v in changes.items():
            if k in _COEFF_SHAPES:
                conv[k] = as_function(self.grid, v)
            elif k in ("g1", "g2"):
                conv[k] = np.atleast_2d(np.asarray(v, dtype=float))
            elif k == "x0":
                conv[k] = np.atleast_1d(np.asarray(v, dtype=float))
            else:
                conv[k] = v
        return dataclasses.replace(self, **conv)

    def with_memory_mode(self, mode: str) -> "GameCoefficients":
        """Rescale memory coefficients for the running-average convention.

        With ``M̄[x](t) = M[x](t) / max(t, dt)`` every memory coefficient is
        divided by ``max(t, dt)`` (``lbar`` by its square), so the solvers can
        keep working with the plain running integral.
        """
        if mode == self.memory_mode:
            return self
        if mode != "average" or self.memory_mode != "integral":
            raise ConfigurationError(f"cannot convert memory mode {self.memory_mode!r} -> {mode!r}")
        w = 1.0 / np.maximum(self.grid.nodes, self.grid.dt)
        scale = {"a2": w, "c2": w, "lbar1": w * w, "lbar2": w * w}
        conv = {k: MatrixFunction(self.grid, getattr(self, k).values * s[:, None, None])
                for k, s in scale.items()}
        return dataclasses.replace(self, memory_mode="average", **conv)

    def coefficient_names(self) -> tuple[str, ...]:
        return tuple(_COEFF_SHAPES)


def _infer(funcs: Mapping[str, MatrixFunction], rect: tuple[str, ...], axis: int,
           square: str, default: int) -> int:
    for name in rect:
        if name in funcs:
            return funcs[name].shape[axis]
    if square in funcs:
        return funcs[square].shape[0]
    if default:
        return default
    raise ConfigurationError(f"cannot infer control dimension from {rect + (square,)}")
