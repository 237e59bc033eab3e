"""Backward Riccati (Lyapunov-type) solver, gain denominators and assumption checks."""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .errors import DivergenceError
from .grid import GameCoefficients, MatrixFunction, TimeGrid, zero_extend
from .leader import barred_arrays
from .util import write_csv

log = logging.getLogger(__name__)


def _T(a):
    return np.swapaxes(a, -1, -2)


def _sym(a):
    return 0.5 * (a + _T(a))


def _lyapunov_operator(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Matrix of ``P -> -P a - a^T P - c^T P c`` acting on row-major ``vec(P)``."""
    n = a.shape[-1]
    I = np.eye(n)
    aT, cT = _T(a), _T(c)
    # vec(X P Y) = (X kron Y^T) vec(P) for row-major vec
    return -(np.einsum("ij,kab->kiajb", I, aT).reshape(-1, n * n, n * n)
             + np.einsum("kij,ab->kiajb", aT, I).reshape(-1, n * n, n * n)
             + np.einsum("kij,kab->kiajb", cT, cT).reshape(-1, n * n, n * n))


def _rk4_affine_maps(K1, Km, K0, s1, sm, s0, h):
    """Per-step affine map ``y_k = Phi y_{k+1} + psi`` of one RK4 step with step ``h``.

    For a linear right-hand side ``K(t) y + s(t)`` each RK4 stage is affine in
    the starting value, so the whole step can be assembled in batch.
    """
    I = np.eye(K1.shape[-1])
    mv = lambda A, v: np.einsum("kij,kj->ki", A, v)
    A1, b1 = K1, s1
    A2, b2 = Km @ (I + 0.5 * h * A1), mv(Km, 0.5 * h * b1) + sm
    A3, b3 = Km @ (I + 0.5 * h * A2), mv(Km, 0.5 * h * b2) + sm
    A4, b4 = K0 @ (I + h * A3), mv(K0, h * b3) + s0
    Phi = I + h / 6.0 * (A1 + 2 * A2 + 2 * A3 + A4)
    psi = h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    return Phi, psi


def solve_backward_matrix_ode(a: MatrixFunction, c: MatrixFunction, l: MatrixFunction,
                              g, grid: TimeGrid, block: int = 1024) -> MatrixFunction:
    """Solve ``P' = -P a - a^T P - c^T P c - l`` backward from ``P(T) = g``.

    Classical RK4 on the grid with coefficients linearly interpolated at the
    half steps; the iterate is symmetrized after every step.  The terminal
    sample is ``g`` itself and the result is zero on ``(T, 2T]``.  Since the
    equation is linear, each RK4 step is an affine map of ``vec(P)``; the maps
    are built in batches and applied sequentially.

    Raises
    ------
    DivergenceError
        If the integration produces non-finite values.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    n = g.shape[0]
    N = grid.n_steps
    h = -grid.dt
    A, Cc, L = a.values[:N + 1], c.values[:N + 1], l.values[:N + 1]
    out = np.empty((N + 1, n, n))
    out[N] = g
    perm = np.arange(n * n).reshape(n, n).T.ravel()
    y = g.ravel().copy()
    for hi in range(N, 0, -block):
        lo = max(hi - block, 0)
        # steps t_{k+1} -> t_k for k = lo..hi-1
        Ak1, Ak0 = A[lo + 1:hi + 1], A[lo:hi]
        Ck1, Ck0 = Cc[lo + 1:hi + 1], Cc[lo:hi]
        Lk1, Lk0 = L[lo + 1:hi + 1], L[lo:hi]
        K1, K0 = _lyapunov_operator(Ak1, Ck1), _lyapunov_operator(Ak0, Ck0)
        Km = _lyapunov_operator(0.5 * (Ak1 + Ak0), 0.5 * (Ck1 + Ck0))
        s1, s0 = -Lk1.reshape(-1, n * n), -Lk0.reshape(-1, n * n)
        Phi, psi = _rk4_affine_maps(K1, Km, K0, s1, 0.5 * (s1 + s0), s0, h)
        for k in range(hi - 1, lo - 1, -1):
            y = Phi[k - lo] @ y + psi[k - lo]
            y = 0.5 * (y + y[perm])
            out[k] = y.reshape(n, n)
        if not np.all(np.isfinite(out[lo:hi])):
            bad = lo + int(np.max(np.nonzero(~np.all(np.isfinite(out[lo:hi]), axis=(1, 2)))[0]))
            raise DivergenceError(f"Riccati integration diverged at t={bad * grid.dt:.6g}",
                                  time=bad * grid.dt)
    out[N] = g
    return zero_extend(MatrixFunction(grid, out), grid)


def assemble_xi(which: int, pi: MatrixFunction, co: GameCoefficients,
                dbar: MatrixFunction | np.ndarray | None = None) -> MatrixFunction:
    """Gain denominators.

    ``Xi1 = r1 + d1^T Pi1 d1``, ``Xi2 = r2 + dbar^T Pi2 dbar``, ``Xi3 = r2``.
    """
    N1 = co.grid.n_steps + 1
    P = pi.values[:N1] if pi is not None else None
    if which == 1:
        d1 = co.d1.values[:N1]
        vals = co.r1.values[:N1] + _T(d1) @ P @ d1
    elif which == 2:
        if dbar is None:
            raise ValueError("Xi2 needs dbar")
        db = dbar.values[:N1] if isinstance(dbar, MatrixFunction) else np.asarray(dbar)[:N1]
        vals = co.r2.values[:N1] + _T(db) @ P @ db
    elif which == 3:
        vals = co.r2.values[:N1].copy()
    else:
        raise ValueError(f"which must be 1, 2 or 3, got {which!r}")
    return MatrixFunction(co.grid, _sym(vals))


def min_eig(mats: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(_sym(mats))[:, 0]


@dataclasses.dataclass(frozen=True)
class RiccatiSolution:
    """Value kernels and gain denominators.

    ``pibar`` is only set in the scalar case with ``d1 != 0``, where
    ``Xi1 = pibar * d1**2``.
    """

    pi1: MatrixFunction
    pi2: MatrixFunction
    xi1: MatrixFunction
    xi2: MatrixFunction
    xi3: MatrixFunction
    pibar: MatrixFunction | None
    min_eig_xi1: np.ndarray
    min_eig_xi2: np.ndarray

    @property
    def grid(self) -> TimeGrid:
        return self.pi1.grid

    def to_csv(self, path) -> None:
        grid = self.grid
        N1 = grid.n_steps + 1
        n = self.pi1.shape[0]
        header = ["t"]
        header += [f"pi1_{i}{j}" for i in range(n) for j in range(n)]
        header += [f"pi2_{i}{j}" for i in range(n) for j in range(n)]
        header += ["min_eig_xi1", "min_eig_xi2"]
        rows = np.column_stack([
            grid.head,
            self.pi1.values[:N1].reshape(N1, -1),
            self.pi2.values[:N1].reshape(N1, -1),
            self.min_eig_xi1,
            self.min_eig_xi2,
        ])
        write_csv(path, header, rows)


def _pinv_flag(mats: np.ndarray, tol: float = 1e-12):
    """Pseudo-inverse per node plus a mask of nodes where the matrix is singular."""
    eig = np.linalg.eigvalsh(_sym(mats))
    scale = np.maximum(1.0, np.max(np.abs(eig), axis=1))
    singular = np.min(np.abs(eig), axis=1) <= tol * scale
    return np.linalg.pinv(mats), singular


def solve_riccati(co: GameCoefficients) -> RiccatiSolution:
    """Solve for ``Pi1`` and ``Pi2`` and assemble ``Xi1, Xi2, Xi3``.

    ``Pi2`` uses the barred coefficients ``abar1 = a1`` and ``cbar1 = c1``.
    ``Xi2`` needs ``dbar``, which is formed with a pseudo-inverse of ``Xi1``
    so that a singular ``Xi1`` is reported by the assumption checker rather
    than aborting here.
    """
    grid = co.grid
    N1 = grid.n_steps + 1
    pi1 = solve_backward_matrix_ode(co.a1, co.c1, co.l1, co.g1, grid)
    pi2 = solve_backward_matrix_ode(co.a1, co.c1, co.l2, co.g2, grid)
    xi1 = assemble_xi(1, pi1, co)
    inv1, _ = _pinv_flag(xi1.values)
    dbar = barred_arrays(co, pi1.values, inv1)["d"]
    xi2 = assemble_xi(2, pi2, co, dbar)
    xi3 = assemble_xi(3, None, co)
    pibar = None
    if co.n == 1 and co.k1 == 1:
        d1 = co.d1.values[:N1, 0, 0]
        if np.all(d1 != 0):
            pibar = MatrixFunction(grid, xi1.values[:, 0, 0] / d1 ** 2)
    return RiccatiSolution(pi1, pi2, xi1, xi2, xi3, pibar,
                           min_eig(xi1.values), min_eig(xi2.values))


ASSUMPTION_LINES = {
    "A1": ("c1^T Pi1 d1 + Pi1 b1",
           "c1^T Pi1 c2 + Pi1 a2",
           "c2^T Pi1 c2 + lbar1 - c2^T Pi1 d1 Xi1^-1 d1^T Pi1 c2"),
    "A2": ("c1^T Pi2 d1 + Pi2 b1",
           "c1^T Pi2 c2 + Pi2 a2",
           "c1^T Pi2 d2 + Pi2 b2",
           "cbar2^T Pi2 cbar2 + lbar2 - cbar2^T Pi2 dbar Xi2^-1 dbar^T Pi2 cbar2"),
    "A3": ("I - d1 Xi1^-1 d1^T Pi1",
           "a2 - b1 Xi1^-1 d1^T Pi1 c2"),
}


@dataclasses.dataclass(frozen=True)
class AssumptionReport:
    """Per-node operator-norm residuals of every assumption line.

    ``residuals[name]`` has shape ``(n_lines, N+1)``; ``line_pass[name]`` is
    a boolean per line.  A line that needs an inverse of a singular ``Xi`` is
    marked as failing regardless of its residual.
    """

    tol: float
    residuals: dict
    line_pass: dict
    min_eig_xi1: np.ndarray
    min_eig_xi2: np.ndarray

    @property
    def xi1_positive(self) -> bool:
        return bool(np.all(self.min_eig_xi1 > 0))

    @property
    def xi2_positive(self) -> bool:
        return bool(np.all(self.min_eig_xi2 > 0))

    def passed(self, name: str) -> bool:
        ok = all(self.line_pass[name])
        if name == "A1":
            ok = ok and self.xi1_positive
        if name == "A2":
            ok = ok and self.xi2_positive
        return bool(ok)

    @property
    def all_passed(self) -> bool:
        return all(self.passed(k) for k in ("A1", "A2", "A3"))

    def max_residual(self, name: str, line: int) -> float:
        return float(np.max(self.residuals[name][line]))

    def summary_rows(self):
        """(assumption, line index, description, max residual, pass) tuples."""
        rows = []
        for name, lines in ASSUMPTION_LINES.items():
            for i, desc in enumerate(lines):
                rows.append((name, i + 1, desc, self.max_residual(name, i), self.line_pass[name][i]))
        return rows

    def to_csv(self, path, grid: TimeGrid) -> None:
        header = ["t"]
        cols = [grid.head]
        for name, lines in ASSUMPTION_LINES.items():
            for i in range(len(lines)):
                header.append(f"{name}_line{i + 1}")
                cols.append(self.residuals[name][i])
        header += ["min_eig_xi1", "min_eig_xi2"]
        cols += [self.min_eig_xi1, self.min_eig_xi2]
        write_csv(path, header, np.column_stack(cols))


def _opnorm(mats: np.ndarray) -> np.ndarray:
    if mats.shape[-1] == 1 or mats.shape[-2] == 1:
        return np.sqrt(np.sum(mats * mats, axis=(-2, -1)))
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


def check_assumptions(co: GameCoefficients, sol: RiccatiSolution, tol: float = 1e-8) -> AssumptionReport:
    """Evaluate every line of (A1)-(A3) at every ``[0, T]`` node."""
    N1 = co.grid.n_steps + 1
    get = lambda name: getattr(co, name).values[:N1]
    a2, b1, b2 = get("a2"), get("b1"), get("b2")
    c1, c2, d1, d2 = get("c1"), get("c2"), get("d1"), get("d2")
    lbar1, lbar2 = get("lbar1"), get("lbar2")
    P1, P2 = sol.pi1.values[:N1], sol.pi2.values[:N1]
    inv1, sing1 = _pinv_flag(sol.xi1.values[:N1])
    inv2, sing2 = _pinv_flag(sol.xi2.values[:N1])
    bar = barred_arrays(co, sol.pi1.values, inv1)
    cb2, db = bar["c2"], bar["d"]

    d1tP1 = _T(d1) @ P1
    res = {
        "A1": [
            _T(c1) @ P1 @ d1 + P1 @ b1,
            _T(c1) @ P1 @ c2 + P1 @ a2,
            _T(c2) @ P1 @ c2 + lbar1 - _T(c2) @ _T(d1tP1) @ inv1 @ d1tP1 @ c2,
        ],
        "A2": [
            _T(c1) @ P2 @ d1 + P2 @ b1,
            _T(c1) @ P2 @ c2 + P2 @ a2,
            _T(c1) @ P2 @ d2 + P2 @ b2,
            _T(cb2) @ P2 @ cb2 + lbar2 - _T(cb2) @ P2 @ db @ inv2 @ _T(db) @ P2 @ cb2,
        ],
        "A3": [
            np.eye(co.n) - d1 @ inv1 @ d1tP1,
            a2 - b1 @ inv1 @ d1tP1 @ c2,
        ],
    }
    # lines that go through an inverse of Xi1 (or Xi2) cannot pass where it is singular
    uses_xi1 = {("A1", 2), ("A2", 3), ("A3", 0), ("A3", 1)}
    uses_xi2 = {("A2", 3)}
    residuals, line_pass = {}, {}
    for name, mats in res.items():
        r = np.stack([_opnorm(m) for m in mats])
        residuals[name] = r
        flags = []
        for i in range(r.shape[0]):
            ok = bool(np.all(r[i] <= tol))
            if (name, i) in uses_xi1 and np.any(sing1):
                ok = False
            if (name, i) in uses_xi2 and np.any(sing2):
                ok = False
            flags.append(ok)
        line_pass[name] = flags
    return AssumptionReport(tol, residuals, line_pass, sol.min_eig_xi1, sol.min_eig_xi2)
