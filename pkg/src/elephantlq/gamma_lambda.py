"""Coupled solve for Gamma(t) and the two-time kernel Lambda(t, s).

Lambda is only needed on the band ``t <= s <= min(t + theta(t), T)``.  It
is stored per row ``j`` as ``lam[j, o] = Lambda(t_j, t_{j+o})`` for
``o = 0..O_j``.  Along each line ``s = const`` the kernel follows the linear
flow ``-d/dt Lambda = Lambda A1 + A1^T Lambda`` backward from its diagonal
value, so row ``j`` is one RK4 step applied to row ``j+1``.

The diagonal is tied to Gamma and to the window integral
``W(t) = int_t^{min(t+theta,T)} Lambda(t, s) ds`` through a quadratic
relation, and Gamma integrates the band end-point Lambda(t, t+theta).  The
system is solved by damped fixed-point iteration.
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .errors import ConditioningError, ConfigurationError, ShapeError
from .grid import MatrixFunction, TimeGrid, zero_extend
from .leader import COND_CAP, StackedBlocks, assemble_omegas, diagonal_map
from .util import write_csv

log = logging.getLogger(__name__)


def _T(a):
    return np.swapaxes(a, -1, -2)


def _sym(a):
    return 0.5 * (a + _T(a))


@dataclasses.dataclass(frozen=True)
class ThetaPolicy:
    """Window length ``theta(t)``: ``full`` means ``theta(t) = t``.

    A constant window is snapped to the nearest grid multiple.
    """

    kind: str = "full"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("full", "const"):
            raise ConfigurationError(f"unknown theta policy {self.kind!r}")
        if self.kind == "const" and not (self.value >= 0 and np.isfinite(self.value)):
            raise ConfigurationError(f"constant theta must be >= 0, got {self.value!r}")

    @classmethod
    def parse(cls, text: str) -> "ThetaPolicy":
        text = text.strip()
        if text == "full":
            return cls("full")
        if text.startswith("const:"):
            try:
                return cls("const", float(text[6:]))
            except ValueError as exc:
                raise ConfigurationError(f"bad theta value in {text!r}") from exc
        raise ConfigurationError(f"theta must be 'full' or 'const:VALUE', got {text!r}")

    def describe(self, grid: TimeGrid | None = None) -> str:
        if self.kind == "full":
            return "full"
        v = self.value if grid is None else self.steps(grid) * grid.dt
        return f"const:{v:.17g}"

    def steps(self, grid: TimeGrid) -> int:
        return int(round(self.value / grid.dt))

    def theta_index(self, grid: TimeGrid) -> np.ndarray:
        """``theta(t_j) / dt`` at every ``[0, T]`` node."""
        j = np.arange(grid.n_steps + 1)
        if self.kind == "full":
            return j
        return np.full_like(j, self.steps(grid))

    def offsets(self, grid: TimeGrid) -> np.ndarray:
        """Band width ``O_j``: index extent of ``min(t_j + theta_j, T) - t_j``."""
        j = np.arange(grid.n_steps + 1)
        return np.minimum(self.theta_index(grid), grid.n_steps - j)

    def active(self, grid: TimeGrid) -> np.ndarray:
        """Indicator ``t_j + theta(t_j) <= T`` at every node."""
        j = np.arange(grid.n_steps + 1)
        return j + self.theta_index(grid) <= grid.n_steps


@dataclasses.dataclass(frozen=True)
class TriangleField:
    """Banded samples of ``Lambda(t_j, t_{j+o})``, ``0 <= o <= offsets[j]``.

    Entries beyond a row's band are zero.
    """

    grid: TimeGrid
    policy: ThetaPolicy
    offsets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        N1 = self.grid.n_steps + 1
        if self.values.shape[:2] != (N1, int(self.offsets.max(initial=0)) + 1):
            raise ShapeError(f"band storage has shape {self.values.shape[:2]}")

    @property
    def diagonal(self) -> np.ndarray:
        return self.values[:, 0]

    def at(self, j: int, k: int) -> np.ndarray:
        """``Lambda(t_j, t_k)``; ``k`` must lie in row ``j``'s band."""
        o = k - j
        if not (0 <= o <= self.offsets[j]):
            raise ShapeError(f"(t_{j}, t_{k}) lies outside the stored band")
        return self.values[j, o]

    def window_integral(self) -> np.ndarray:
        return window_integral(self.values, self.offsets, self.grid.dt)

    def endpoint(self) -> np.ndarray:
        """``Lambda(t_j, t_j + theta_j)`` where that point lies in ``[0, T]``, else zero."""
        act = self.policy.active(self.grid)
        idx = self.offsets
        out = self.values[np.arange(len(idx)), idx].copy()
        out[~act] = 0.0
        return out

    def to_csv(self, path) -> None:
        m = self.values.shape[-1]
        header = ["t", "s"] + [f"lambda_{a}{b}" for a in range(m) for b in range(m)]
        dt = self.grid.dt
        rows = []
        for j, O in enumerate(self.offsets):
            for o in range(O + 1):
                rows.append([j * dt, (j + o) * dt] + list(self.values[j, o].ravel()))
        write_csv(path, header, rows)


def window_integral(lam: np.ndarray, offsets: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid integral of each band row over ``o = 0..O_j``."""
    N1, Omax1 = lam.shape[:2]
    o = np.arange(Omax1)
    w = np.where(o[None, :] <= offsets[:, None], dt, 0.0)
    w[:, 0] *= 0.5
    w[np.arange(N1), offsets] *= 0.5
    w[offsets == 0, 0] = 0.0
    return np.einsum("jo,joab->jab", w, lam)


def _lyap(X, A):
    return -X @ A - _T(A) @ X


def _rk4_back(X, A1, Am, A0, h, S1=0.0, Sm=0.0, S0=0.0):
    """One RK4 step of ``X' = -X A - A^T X + S`` from ``t+h`` down to ``t``."""
    k1 = _lyap(X, A1) + S1
    k2 = _lyap(X - 0.5 * h * k1, Am) + Sm
    k3 = _lyap(X - 0.5 * h * k2, Am) + Sm
    k4 = _lyap(X - h * k3, A0) + S0
    return X - h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate_lambda(diagonal: np.ndarray, A1, grid: TimeGrid, policy: ThetaPolicy) -> TriangleField:
    """Fill the band from its diagonal by the backward Lyapunov flow.

    ``diagonal`` has shape ``(N+1, m, m)``; ``A1`` is a MatrixFunction or a
    node array.
    """
    A = A1.values if isinstance(A1, MatrixFunction) else np.asarray(A1, dtype=float)
    N = grid.n_steps
    A = A[:N + 1]
    diagonal = np.asarray(diagonal, dtype=float)
    if diagonal.shape[0] != N + 1:
        raise ShapeError("diagonal must be sampled on the [0, T] nodes")
    offs = policy.offsets(grid)
    m = diagonal.shape[-1]
    lam = np.zeros((N + 1, int(offs.max(initial=0)) + 1, m, m))
    lam[:, 0] = _sym(diagonal)
    h = grid.dt
    for j in range(N - 1, -1, -1):
        O = offs[j]
        if O == 0:
            continue
        prev = lam[j + 1, :O]
        Am = 0.5 * (A[j] + A[j + 1])
        nxt = _rk4_back(prev, A[j + 1], Am, A[j], h)
        lam[j, 1:O + 1] = _sym(nxt)
    if not np.all(np.isfinite(lam)):
        from .errors import DivergenceError
        raise DivergenceError("Lambda propagation produced non-finite values")
    return TriangleField(grid, policy, offs, lam)


def integrate_gamma(A1, source: np.ndarray, grid: TimeGrid, policy: ThetaPolicy) -> np.ndarray:
    """Backward RK4 for ``Gamma' = -Gamma A1 - A1^T Gamma + S``, ``Gamma(T) = 0``.

    ``source`` holds ``Lambda(t_j, t_j + theta_j)`` at active nodes.  The
    indicator is applied per interval: ``[t_j, t_{j+1}]`` carries the source
    iff ``t_{j+1} + theta(t_{j+1}) <= T``, with the source linearly
    interpolated inside the interval.
    """
    A = A1.values if isinstance(A1, MatrixFunction) else np.asarray(A1, dtype=float)
    N = grid.n_steps
    h = grid.dt
    act = policy.active(grid)
    m = source.shape[-1]
    G = np.zeros((N + 1, m, m))
    X = np.zeros((m, m))
    for j in range(N - 1, -1, -1):
        if act[j + 1]:
            S1, S0 = source[j + 1], source[j]
        else:
            S1 = S0 = 0.0
        Sm = 0.5 * (S1 + S0)
        X = _sym(_rk4_back(X, A[j + 1], 0.5 * (A[j] + A[j + 1]), A[j], h, S1, Sm, S0))
        G[j] = X
    return G


@dataclasses.dataclass(frozen=True)
class GammaLambdaSolution:
    """Result of :func:`solve_gamma_lambda` with its convergence record."""

    gamma: MatrixFunction
    lam: TriangleField
    iterations: int
    residual: float
    converged: bool
    trace: tuple
    policy: ThetaPolicy
    message: str = ""

    @property
    def window(self) -> np.ndarray:
        return self.lam.window_integral()

    def to_csv(self, path) -> None:
        grid = self.gamma.grid
        N1 = grid.n_steps + 1
        m = self.gamma.shape[0]
        header = ["t"] + [f"gamma_{a}{b}" for a in range(m) for b in range(m)] + ["residual"]
        rows = np.column_stack([grid.head, self.gamma.values[:N1].reshape(N1, -1),
                                np.full(N1, self.residual)])
        write_csv(path, header, rows)


def _defects(blocks, xi3, G, lam, offs, grid, policy, cond_cap):
    om = assemble_omegas(blocks, G, xi3, cond_cap)
    W = window_integral(lam, offs, grid.dt)
    diag_target = _sym(diagonal_map(om, W))
    d_def = np.max(np.abs(lam[:, 0] - diag_target), initial=0.0)
    field = TriangleField(grid, policy, offs, lam)
    G_target = integrate_gamma(blocks.A1, field.endpoint(), grid, policy)
    g_def = np.max(np.abs(G - G_target), initial=0.0)
    scale = 1.0 + np.max(np.abs(lam[:, 0]), initial=0.0) + np.max(np.abs(G), initial=0.0)
    return max(d_def, g_def) / scale, diag_target


def solve_gamma_lambda(blocks: StackedBlocks, xi3, policy: ThetaPolicy | None = None,
                       tol: float = 1e-8, max_iter: int = 200, damping: float = 0.5,
                       cond_cap: float = COND_CAP, patience: int = 5) -> GammaLambdaSolution:
    """Damped fixed-point iteration for ``(Gamma, Lambda)``.

    Each sweep: Omega terms from the current Gamma; new diagonal from the
    quadratic relation with the current window integrals; propagate the
    band; integrate Gamma; blend old and new with weight ``damping``.  The
    reported residual is the scaled sup-norm defect of both defining
    equations evaluated at the returned pair.

    A run that hits ``max_iter`` or whose defect grows ``patience`` times in
    a row returns ``converged=False``; nothing is silently accepted.
    """
    policy = policy or ThetaPolicy()
    if not (0 < damping <= 1):
        raise ConfigurationError(f"damping must lie in (0, 1], got {damping!r}")
    if max_iter < 1:
        raise ConfigurationError("max_iter must be >= 1")
    grid = blocks.grid
    N1 = grid.n_steps + 1
    m = blocks.dim
    offs = policy.offsets(grid)
    X3 = xi3.values[:N1] if isinstance(xi3, MatrixFunction) else np.asarray(xi3)[:N1]

    G = np.zeros((N1, m, m))
    lam = np.zeros((N1, int(offs.max(initial=0)) + 1, m, m))
    trace = []
    converged = False
    message = ""
    rising = 0
    it = 0
    defect, target = _defects(blocks, X3, G, lam, offs, grid, policy, cond_cap)
    if defect <= tol:
        converged, it = True, 1
        trace.append(defect)
    while not converged and it < max_iter:
        it += 1
        diag = (1 - damping) * lam[:, 0] + damping * target
        field = propagate_lambda(diag, blocks.A1, grid, policy)
        G_new = integrate_gamma(blocks.A1, field.endpoint(), grid, policy)
        lam = field.values
        G = _sym((1 - damping) * G + damping * G_new)
        prev = defect
        try:
            defect, target = _defects(blocks, X3, G, lam, offs, grid, policy, cond_cap)
        except ConditioningError as exc:
            defect = float("inf")
            trace.append(defect)
            message = f"sweep {it}: {exc}"
            break
        trace.append(defect)
        log.debug("gamma/lambda sweep %d defect %.3e", it, defect)
        if not np.isfinite(defect):
            message = f"defect became non-finite at sweep {it}"
            break
        if defect <= tol:
            converged = True
            break
        rising = rising + 1 if defect > prev else 0
        if rising >= patience:
            message = f"defect increased {patience} consecutive sweeps (oscillation)"
            break
    if not converged and not message:
        message = f"no convergence within {max_iter} sweeps (defect {defect:.3e})"
    G[-1] = 0.0
    gamma = zero_extend(MatrixFunction(grid, G), grid)
    return GammaLambdaSolution(gamma, TriangleField(grid, policy, offs, lam), it,
                               float(defect), converged, tuple(trace), policy, message)


def relation_defect(sol: GammaLambdaSolution, phi: np.ndarray, psi: np.ndarray,
                    checkpoints=None) -> float:
    """Largest root-mean-square gap ``psi - (Gamma - W) phi`` over checkpoints.

    ``phi`` and ``psi`` have shape ``(paths, N+1, 2n)``; ``W`` is the window
    integral of Lambda.  The conditional expectation of the adapted
    ``phi(t)`` is ``phi(t)`` itself.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != psi.shape or phi.ndim != 3:
        raise ShapeError(f"ensembles differ in shape: {phi.shape} vs {psi.shape}")
    N1 = sol.gamma.grid.n_steps + 1
    if phi.shape[1] != N1:
        raise ShapeError("ensembles must be sampled on the [0, T] nodes")
    P = sol.gamma.values[:N1] - sol.window
    ks = np.arange(N1) if checkpoints is None else np.asarray(checkpoints)
    gap = psi[:, ks] - np.einsum("kab,pkb->pka", P[ks], phi[:, ks])
    rms = np.sqrt(np.mean(np.sum(gap * gap, axis=-1), axis=0))
    return float(np.max(rms))
