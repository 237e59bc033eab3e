"""Running-integral memory functional and its dual (star) operators.

A path history ``x_t = {x(s)}_{0<=s<=t}`` enters the model only through
``M[x](t) = int_0^t x(s) ds``.  Two dual operators are provided:

``star_adjoint``
    ``int_t^T phi(s) ds``, the exact adjoint of ``M`` under the pairing
    ``int_0^T <phi(t), M[x](t)> dt``.
``star_window``
    ``int_t^{min(2t, T)} phi(s) ds``, the forward window of length ``t``
    truncated by the zero extension beyond ``T``.

Both coincide for ``t >= T/2``.
"""
from __future__ import annotations

import dataclasses

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ConfigurationError, RangeError, ShapeError
from .grid import MatrixFunction, TimeGrid

STAR_VARIANTS = ("adjoint", "window")


def running_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid cumulative integral along axis 0, starting at zero."""
    return cumulative_trapezoid(np.asarray(values, dtype=float), dx=dt, axis=0, initial=0.0)


def tail_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """``int_{t_k}^{t_N} values`` at every node ``k`` (trapezoid)."""
    c = running_integral(values, dt)
    return c[-1] - c


def window_end(n_steps: int, variant: str) -> np.ndarray:
    """Index of the upper integration limit of the star window at each node."""
    k = np.arange(n_steps + 1)
    if variant == "adjoint":
        return np.full_like(k, n_steps)
    if variant == "window":
        return np.minimum(2 * k, n_steps)
    raise ConfigurationError(f"unknown star variant {variant!r}; expected one of {STAR_VARIANTS}")


def star_nodes(values: np.ndarray, dt: float, variant: str = "adjoint") -> np.ndarray:
    """Apply a star operator to node samples on ``[0, T]``.

    ``values`` has shape ``(N+1, ...)``.  The cumulative integral is taken
    over ``[0, T]`` only, so the jump of the zero extension at ``T`` is not
    smeared over the last interval.
    """
    values = np.asarray(values, dtype=float)
    c = running_integral(values, dt)
    hi = window_end(values.shape[0] - 1, variant)
    return c[hi] - c


def window_length(grid: TimeGrid, variant: str = "adjoint") -> np.ndarray:
    """Length of the star window at every ``[0, T]`` node."""
    hi = window_end(grid.n_steps, variant)
    return (hi - np.arange(grid.n_steps + 1)) * grid.dt


@dataclasses.dataclass(frozen=True)
class PathSample:
    """A vector path sampled on the ``[0, T]`` nodes of a grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n_steps + 1:
            raise ShapeError(
                f"path needs shape ({self.grid.n_steps + 1}, n), got {np.shape(self.values)}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        ri = running_integral(v, self.grid.dt)
        ri.setflags(write=False)
        object.__setattr__(self, "_running", ri)

    @property
    def running_integral(self) -> np.ndarray:
        return self._running

    @classmethod
    def from_callable(cls, grid: TimeGrid, func) -> "PathSample":
        return cls(grid, np.array([np.atleast_1d(func(t)) for t in grid.head], dtype=float))


def _interp_nodes(arr: np.ndarray, grid: TimeGrid, t: float) -> np.ndarray:
    k = grid.index(t, grid.T)
    j = min(int(np.floor(k)), grid.n_steps)
    frac = k - j
    if frac <= 1e-12 or j >= grid.n_steps:
        return arr[j].copy()
    return (1 - frac) * arr[j] + frac * arr[j + 1]


def memory_integral(x: PathSample, t: float) -> np.ndarray:
    """``M[x](t)``; exact trapezoid value at nodes, interpolated between."""
    if t > x.grid.T * (1 + 1e-12) or t < 0:
        raise RangeError(f"memory_integral needs 0 <= t <= T, got {t!r}")
    return _interp_nodes(x.running_integral, x.grid, min(max(t, 0.0), x.grid.T))


def _star(phi: MatrixFunction, t: float, variant: str) -> np.ndarray:
    if not isinstance(phi, MatrixFunction):
        raise ShapeError("star operators act on MatrixFunction inputs")
    grid = phi.grid
    if not (0 <= t <= grid.T * (1 + 1e-12)):
        raise RangeError(f"star operator needs 0 <= t <= T, got {t!r}")
    return _interp_nodes(star_nodes(phi.head, grid.dt, variant), grid, min(t, grid.T))


def star_window(phi: MatrixFunction, t: float) -> np.ndarray:
    """``int_t^{min(2t,T)} phi(s) ds`` using the zero extension beyond ``T``."""
    if isinstance(phi, MatrixFunction) and not phi.extended:
        raise ConfigurationError("star_window needs a function zero-extended to [0, 2T]")
    return _star(phi, t, "window")


def star_adjoint(phi: MatrixFunction, t: float) -> np.ndarray:
    """``int_t^T phi(s) ds``."""
    return _star(phi, t, "adjoint")


def star(phi: MatrixFunction, t: float, variant: str = "adjoint") -> np.ndarray:
    if variant == "window":
        return star_window(phi, t)
    if variant == "adjoint":
        return star_adjoint(phi, t)
    raise ConfigurationError(f"unknown star variant {variant!r}")


def trapezoid_weights(n_steps: int, dt: float) -> np.ndarray:
    w = np.full(n_steps + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def duality_residual(phi: MatrixFunction, x: PathSample) -> float:
    """Gap between ``int <phi, M[x]> dt`` and ``int <star_adjoint(phi), x> dt``.

    ``phi`` is ``n x m``; the pairing is ``phi(t)^T v`` so the two sides are
    ``m``-vectors and the Euclidean norm of their difference is returned.
    """
    if phi.grid.n_steps != x.grid.n_steps or phi.grid.dt != x.grid.dt:
        raise ShapeError("phi and x live on different grids")
    n = x.values.shape[1]
    if phi.shape[0] != n:
        raise ShapeError(f"phi has {phi.shape[0]} rows, path has dimension {n}")
    dt = x.grid.dt
    w = trapezoid_weights(x.grid.n_steps, dt)
    head = phi.head
    lhs = np.einsum("k,kij,ki->j", w, head, x.running_integral)
    rhs = np.einsum("k,kij,ki->j", w, star_nodes(head, dt, "adjoint"), x.values)
    return float(np.linalg.norm(lhs - rhs))
