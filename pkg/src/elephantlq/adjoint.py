"""Deterministic reduction of the anticipated backward equations.

With deterministic coefficients, a deterministic opponent control and zero
terminal data the martingale integrand vanishes and the conditional
expectations are the identity, so each backward equation becomes an
anticipated ODE

    eta'(t) = P(t) eta(t) + sum_i Q_i(t) star(R_i eta + r_i)(t) + p(t),
    eta(t) = 0 on [T, 2T].

It is solved by one backward Crank-Nicolson sweep.  The star integrals
only reach forward in time, so every value they need except the current
node is already known; the current-node contribution of the trapezoid
enters the implicit solve.
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .errors import ConfigurationError, DivergenceError, ShapeError
from .grid import GameCoefficients, MatrixFunction, TimeGrid, zero_extend
from .leader import BarredCoefficients
from .memory import STAR_VARIANTS, running_integral, star_nodes, window_end
from .riccati import RiccatiSolution
from .util import write_csv

log = logging.getLogger(__name__)

REG_SCALE = 1e-10


def _T(a):
    return np.swapaxes(a, -1, -2)


@dataclasses.dataclass(frozen=True)
class AnticipatedTerm:
    """One ``Q(t) star(R eta + r)(t)`` contribution.

    ``Q`` is ``(N+1, n, q)``, ``R`` is ``(N+1, q, n)`` and ``r`` is
    ``(N+1, q)`` or ``None``.
    """

    Q: np.ndarray
    R: np.ndarray
    r: np.ndarray | None = None


def solve_anticipated(grid: TimeGrid, P: np.ndarray, terms, p: np.ndarray,
                      variant: str = "adjoint") -> np.ndarray:
    """Backward Crank-Nicolson sweep for an anticipated linear ODE.

    Returns node values of ``eta`` on ``[0, T]`` with shape ``(N+1, n)``.
    The star integrals of the result coincide with trapezoid stars of the
    returned samples.
    """
    if variant not in STAR_VARIANTS:
        raise ConfigurationError(f"unknown star variant {variant!r}")
    N = grid.n_steps
    h = grid.dt
    P = np.asarray(P, dtype=float)
    p = np.asarray(p, dtype=float)
    n = P.shape[-1]
    if P.shape != (N + 1, n, n) or p.shape != (N + 1, n):
        raise ShapeError(f"P/p shapes {P.shape}/{p.shape} do not match {N + 1} nodes")
    terms = list(terms)
    for t in terms:
        if t.Q.shape[0] != N + 1 or t.R.shape[0] != N + 1 or t.Q.shape[-1] != t.R.shape[1]:
            raise ShapeError("anticipated term shapes are inconsistent")
    hi = window_end(N, variant)
    eye = np.eye(n)
    eta = np.zeros((N + 1, n))
    # tail[i][k] = int_{t_k}^{T} (R_i eta + r_i) ds
    tails = [np.zeros((N + 1, t.R.shape[1])) for t in terms]
    g_next = []
    for t in terms:
        g = t.R[N] @ eta[N]
        if t.r is not None:
            g = g + t.r[N]
        g_next.append(g)
    f_next = p[N].copy()
    for k in range(N - 1, -1, -1):
        lhs = eye + 0.5 * h * P[k]
        rhs = eta[k + 1] - 0.5 * h * f_next - 0.5 * h * p[k]
        for i, t in enumerate(terms):
            if hi[k] == k:
                continue
            rk = t.r[k] if t.r is not None else 0.0
            known = tails[i][k + 1] - tails[i][hi[k]] + 0.5 * h * (g_next[i] + rk)
            lhs = lhs + 0.25 * h * h * t.Q[k] @ t.R[k]
            rhs = rhs - 0.5 * h * t.Q[k] @ known
        eta[k] = np.linalg.solve(lhs, rhs)
        if not np.all(np.isfinite(eta[k])):
            raise DivergenceError(f"anticipated solve diverged at t={grid.head[k]:.6g}",
                                  time=float(grid.head[k]))
        f_k = P[k] @ eta[k] + p[k]
        for i, t in enumerate(terms):
            g = t.R[k] @ eta[k]
            if t.r is not None:
                g = g + t.r[k]
            tails[i][k] = tails[i][k + 1] + 0.5 * h * (g + g_next[i])
            g_next[i] = g
            f_k = f_k + t.Q[k] @ (tails[i][k] - tails[i][hi[k]])
        f_next = f_k
    return eta


def regularized_inverse(mats: np.ndarray, scale: float = REG_SCALE) -> tuple[np.ndarray, np.ndarray]:
    """Tikhonov inverse ``(M^T M + lam^2 I)^{-1} M^T`` with ``lam = scale (1 + |M|)``.

    Returns the inverses and the per-node ``lam`` that was used.
    """
    mats = np.asarray(mats, dtype=float)
    lam = scale * (1.0 + np.linalg.norm(mats, ord=2, axis=(-2, -1)))
    q = mats.shape[-1]
    MtM = _T(mats) @ mats + (lam ** 2)[:, None, None] * np.eye(q)
    return np.linalg.solve(MtM, _T(mats)), lam


@dataclasses.dataclass(frozen=True)
class AdjointSolution:
    """Node values of ``eta`` zero-extended to ``[0, 2T]``.

    ``eta_bar`` is identically zero in the deterministic reduction and is
    kept so that callers can use the full formulas unchanged.
    """

    eta: MatrixFunction
    eta_bar: MatrixFunction
    equation: str
    variant: str
    reg_scale: float

    @property
    def grid(self) -> TimeGrid:
        return self.eta.grid

    @property
    def head(self) -> np.ndarray:
        """``(N+1, n)`` samples on ``[0, T]``."""
        return self.eta.head[:, :, 0]


def _wrap(grid: TimeGrid, eta: np.ndarray, equation: str, variant: str, reg: float) -> AdjointSolution:
    eta = eta.copy()
    eta[-1] = 0.0
    f = zero_extend(MatrixFunction(grid, eta[:, :, None]), grid)
    z = zero_extend(MatrixFunction(grid, np.zeros_like(eta)[:, :, None]), grid)
    return AdjointSolution(f, z, equation, variant, reg)


def _opponent_path(u2, grid: TimeGrid, k2: int) -> np.ndarray:
    N1 = grid.n_steps + 1
    if u2 is None:
        return np.zeros((N1, k2))
    if callable(u2):
        u = np.array([np.atleast_1d(u2(t)) for t in grid.head], dtype=float)
    else:
        u = np.asarray(u2, dtype=float)
        if u.ndim == 0:
            u = np.full((N1, k2), float(u))
        elif u.ndim == 1 and u.shape[0] == N1 and k2 == 1:
            u = u[:, None]
        elif u.ndim == 1 and u.shape[0] == k2:
            u = np.broadcast_to(u, (N1, k2)).copy()
    if u.shape != (N1, k2):
        raise ShapeError(f"control path needs shape {(N1, k2)}, got {u.shape}")
    return u


def solve_eta1(co: GameCoefficients, ric: RiccatiSolution, u2=None, variant: str = "adjoint",
               reg_scale: float = REG_SCALE) -> AdjointSolution:
    """Follower backward equation driven by a deterministic leader control.

    ``u2`` may be ``None`` (zero), a scalar, a constant vector, a callable of
    ``t`` or node samples ``(N+1, k2)``.
    """
    grid = co.grid
    N1 = grid.n_steps + 1
    dt = grid.dt
    u = _opponent_path(u2, grid, co.k2)
    a1, a2 = co.a1.head, co.a2.head
    b1, b2 = co.b1.head, co.b2.head
    c1, c2 = co.c1.head, co.c2.head
    d1, d2 = co.d1.head, co.d2.head
    Pi = ric.pi1.head
    Xi = ric.xi1.head
    d1tPd2u = np.einsum("kij,kj->ki", _T(d1) @ Pi @ d2, u)
    gain_star = star_nodes(_T(c2) @ Pi @ d1, dt, variant)
    xi_star_inv, lam = regularized_inverse(star_nodes(Xi, dt, variant), reg_scale)
    log.debug("eta1 regularization max %.3e", float(lam.max(initial=0.0)))
    K = gain_star @ xi_star_inv
    n = co.n
    terms = [
        AnticipatedTerm(np.broadcast_to(-np.eye(n), (N1, n, n)), _T(a2)),
        AnticipatedTerm(K, _T(b1), d1tPd2u),
    ]
    p = (-np.einsum("kij,kj->ki", Pi @ b2 + _T(c1) @ Pi @ d2, u)
         - star_nodes(np.einsum("kij,kj->ki", _T(c2) @ Pi @ d2, u), dt, variant))
    eta = solve_anticipated(grid, -_T(a1), terms, p, variant)
    return _wrap(grid, eta, "follower", variant, reg_scale)


def solve_eta2(barred: BarredCoefficients, ric: RiccatiSolution, eta1: AdjointSolution,
               xi=None, variant: str = "adjoint", reg_scale: float = REG_SCALE) -> AdjointSolution:
    """Leader backward equation in the deterministic reduction.

    ``xi`` is a deterministic path for the leader's forward adjoint (zero by
    default); its memory enters through ``M[xi]``.
    """
    grid = barred.grid
    N1 = grid.n_steps + 1
    dt = grid.dt
    n = barred.a1.shape[0]
    P2 = ric.pi2.head
    X2 = ric.xi2.head
    a1, a2 = barred.a1.head, barred.a2.head
    b, c2, d = barred.b.head, barred.c2.head, barred.d.head
    k, q1, q2 = barred.k.head, barred.q1.head, barred.q2.head
    S = lambda arr: star_nodes(arr, dt, variant)  # noqa: E731
    xi_star_inv, lam = regularized_inverse(S(X2), reg_scale)
    log.debug("eta2 regularization max %.3e", float(lam.max(initial=0.0)))
    K2 = S(_T(c2) @ P2 @ d) @ xi_star_inv
    Q = K2 @ S(_T(b)) - S(_T(a2))
    terms = [AnticipatedTerm(Q, np.broadcast_to(np.eye(n), (N1, n, n)))]
    if xi is None:
        xi_v = np.zeros((N1, n))
    else:
        xi_v = np.asarray(xi, dtype=float).reshape(N1, n)
    xi_src = np.einsum("kij,kj->ki", _T(q1), running_integral(xi_v, dt)) \
        + np.einsum("kij,kj->ki", _T(q2), xi_v)
    couple = K2 @ S(_T(d) @ P2 @ k) - S(_T(c2) @ P2 @ k)
    p = (-np.einsum("kij,kj->ki", K2, S(xi_src))
         + np.einsum("kij,kj->ki", couple, S(eta1.head)))
    eta = solve_anticipated(grid, -_T(a1), terms, p, variant)
    return _wrap(grid, eta, "leader", variant, reg_scale)


def write_eta_csv(path, eta1: AdjointSolution, eta2: AdjointSolution | None = None) -> None:
    """CSV with ``t`` and the components of ``eta1`` (and ``eta2``)."""
    grid = eta1.grid
    cols = [grid.head]
    n = eta1.head.shape[1]
    header = ["t"] + [f"eta1_{i}" for i in range(n)]
    cols.append(eta1.head)
    if eta2 is not None:
        header += [f"eta2_{i}" for i in range(eta2.head.shape[1])]
        cols.append(eta2.head)
    write_csv(path, header, np.column_stack(cols))
