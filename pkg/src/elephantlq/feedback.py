"""Feedback gains for both players.

The leader's strategy acts on the stacked forward state ``phi = (xi, x)``
and its running integral; the follower's best response acts on ``M[x]``,
its adjoint ``eta1`` and the leader's control value.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConvergenceError, ShapeError
from .gamma_lambda import GammaLambdaSolution
from .grid import GameCoefficients, TimeGrid
from .leader import COND_CAP, StackedBlocks, checked_inverse
from .riccati import RiccatiSolution


def _T(a):
    return np.swapaxes(a, -1, -2)


@dataclasses.dataclass(frozen=True)
class FollowerGains:
    """Best response ``u1 = Kx M[x] + Keta eta1 + Ku u2`` (node arrays)."""

    Kx: np.ndarray
    Keta: np.ndarray
    Ku: np.ndarray


def follower_gains(co: GameCoefficients, ric: RiccatiSolution,
                   cond_cap: float = COND_CAP) -> FollowerGains:
    d1, d2, c2, b1 = co.d1.head, co.d2.head, co.c2.head, co.b1.head
    Pi = ric.pi1.head
    Xinv = checked_inverse(ric.xi1.head, "Xi1", cond_cap)
    d1tP = _T(d1) @ Pi
    return FollowerGains(Kx=-Xinv @ d1tP @ c2, Keta=-Xinv @ _T(b1), Ku=-Xinv @ d1tP @ d2)


@dataclasses.dataclass(frozen=True)
class FeedbackGains:
    """Open-loop Stackelberg strategy in feedback form.

    ``u1 = L1 M[phi] + (L2 + L3) phi`` and ``u2 = Lu2 phi``.  ``P`` and
    ``Q`` reconstruct the backward variables, ``psi = P phi`` and
    ``psi_bar = Q phi``; ``W`` is the window integral of Lambda.
    """

    grid: TimeGrid
    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    Lu2: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    follower: FollowerGains
    theta: str

    def __post_init__(self):
        for name in ("L1", "L2", "L3", "Lu2", "P", "Q", "W"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"gain {name} has non-finite entries")

    @property
    def leader_u1(self) -> np.ndarray:
        """``L2 + L3``, the gain on ``phi`` in the follower's response."""
        return self.L2 + self.L3


def synthesize_gains(co: GameCoefficients, ric: RiccatiSolution, blocks: StackedBlocks,
                     gl: GammaLambdaSolution, cond_cap: float = COND_CAP) -> FeedbackGains:
    """Assemble every gain from converged Gamma/Lambda.

    Raises
    ------
    ConvergenceError
        If the Gamma/Lambda iteration did not converge.
    ConditioningError
        If ``Xi1``, ``Xi3`` or ``I - Gamma Cbar`` cannot be inverted safely.
    """
    if not gl.converged:
        raise ConvergenceError(
            f"refusing gains from a non-converged Gamma/Lambda solve: {gl.message} "
            f"(residual {gl.residual:.3e} after {gl.iterations} sweeps)")
    grid = co.grid
    N1 = grid.n_steps + 1
    n = co.n
    G = gl.gamma.head
    W = gl.window
    Pi1 = ric.pi1.head
    X1inv = checked_inverse(ric.xi1.head, "Xi1", cond_cap)
    X3inv = checked_inverse(ric.xi3.head, "Xi3", cond_cap)
    eye = np.broadcast_to(np.eye(2 * n), G.shape)
    Z = checked_inverse(eye - G @ blocks.Cbar, "I - Gamma Cbar", cond_cap)
    b1, c2, d1, d2 = co.b1.head, co.c2.head, co.d1.head, co.d2.head
    zk = np.zeros((N1, co.k1, n))
    b1_pick = np.concatenate([_T(b1), zk], axis=2)    # [b1^T, 0]
    d1_pick = np.concatenate([_T(d1), zk], axis=2)    # [d1^T, 0]
    d1Pd2 = _T(d1) @ Pi1 @ d2
    D, Ct = blocks.D, _T(blocks.C)
    ZG = Z @ G
    L1 = -X1inv @ np.concatenate([zk, _T(d1) @ Pi1 @ c2], axis=2)
    L2 = X1inv @ (-b1_pick @ G - d1_pick @ ZG @ (blocks.Abar1 + Ct @ G))
    L3 = X1inv @ (d1Pd2 @ X3inv @ (_T(D) @ G - _T(blocks.G2))
                  - (d1Pd2 @ X3inv @ _T(D) - b1_pick - d1_pick @ ZG @ Ct) @ W)
    Lu2 = -X3inv @ (_T(D) @ G - _T(blocks.G2) - _T(D) @ W)
    P = G - W
    Q = ZG @ (blocks.Abar1 + Ct @ P)
    return FeedbackGains(grid, L1, L2, L3, Lu2, P, Q, W, follower_gains(co, ric, cond_cap),
                         gl.policy.describe(grid))
