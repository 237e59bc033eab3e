"""Leader-side coefficients: barred data, stacked blocks and Omega terms.

Substituting the follower's best response into the state equation yields
the "barred" coefficients.  Stacking the leader's adjoint ``xi`` with the
state gives a ``2n``-dimensional forward variable ``phi = (xi, x)`` and a
backward variable ``psi = (eta1, eta2)``; the block matrices below are the
coefficients of that stacked system.  All functions are sampled on the
``[0, T]`` nodes.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConditioningError, ShapeError
from .grid import GameCoefficients, MatrixFunction, TimeGrid

COND_CAP = 1e12


def _T(a):
    return np.swapaxes(a, -1, -2)


def checked_inverse(mats: np.ndarray, what: str, cond_cap: float = COND_CAP,
                    offset: int = 0) -> np.ndarray:
    """Batched inverse with a condition-number guard.

    Raises :class:`ConditioningError` naming the first offending node.
    """
    mats = np.asarray(mats, dtype=float)
    cond = np.linalg.cond(mats)
    bad = ~np.isfinite(cond) | (cond > cond_cap)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ConditioningError(
            f"{what} is singular or ill-conditioned at node {k + offset} "
            f"(condition {cond[k]:.3g})", node=k + offset, condition=float(cond[k]))
    return np.linalg.inv(mats)


def _mf(grid: TimeGrid, arr: np.ndarray) -> MatrixFunction:
    return MatrixFunction(grid, arr)


@dataclasses.dataclass(frozen=True)
class BarredCoefficients:
    """Coefficients of the leader's state equation (follower response inserted)."""

    a1: MatrixFunction
    a2: MatrixFunction
    b: MatrixFunction
    c1: MatrixFunction
    c2: MatrixFunction
    d: MatrixFunction
    f: MatrixFunction
    h: MatrixFunction
    k: MatrixFunction
    p: MatrixFunction
    q1: MatrixFunction
    q2: MatrixFunction

    @property
    def grid(self) -> TimeGrid:
        return self.a1.grid


def barred_arrays(co: GameCoefficients, pi1: np.ndarray, xi1_inv: np.ndarray) -> dict:
    """Barred coefficients as node arrays on ``[0, T]`` given ``[Xi1]^{-1}``."""
    N1 = co.grid.n_steps + 1
    a1, a2 = co.a1.values[:N1], co.a2.values[:N1]
    b1, b2 = co.b1.values[:N1], co.b2.values[:N1]
    c1, c2 = co.c1.values[:N1], co.c2.values[:N1]
    d1, d2 = co.d1.values[:N1], co.d2.values[:N1]
    P = pi1[:N1]
    d1tP = _T(d1) @ P
    b1X = b1 @ xi1_inv
    d1X = d1 @ xi1_inv
    eye = np.eye(co.n)
    return {
        "a1": a1.copy(),
        "a2": a2 - b1X @ d1tP @ c2,
        "b": b2 - b1X @ d1tP @ d2,
        "c1": c1.copy(),
        "c2": c2 - d1X @ d1tP @ c2,
        "d": d2 - d1X @ d1tP @ d2,
        "f": -b1X @ _T(b1),
        "h": -b1X @ _T(d1),
        "k": -d1X @ _T(b1),
        "p": -d1X @ _T(d1),
        "q1": -_T(c2) @ P @ (eye - d1X @ d1tP) @ d2,
        "q2": -P @ b2 - _T(c1) @ P @ d2,
    }


def assemble_barred(co: GameCoefficients, pi1: MatrixFunction, xi1: MatrixFunction,
                    cond_cap: float = COND_CAP) -> BarredCoefficients:
    """Barred coefficients; ``Xi1`` must be invertible at every node."""
    N1 = co.grid.n_steps + 1
    inv = checked_inverse(xi1.values[:N1], "Xi1", cond_cap)
    arrs = barred_arrays(co, pi1.values, inv)
    return BarredCoefficients(**{k: _mf(co.grid, v) for k, v in arrs.items()})


@dataclasses.dataclass(frozen=True)
class StackedBlocks:
    """Block matrices of the stacked forward-backward system.

    ``A1, A2, Abar1, Abar2, B, C, Cbar, H`` are ``2n x 2n``;
    ``D, Dbar, G1, G2`` are ``2n x k2``.  Arrays have a leading node axis.
    """

    grid: TimeGrid
    A1: np.ndarray
    A2: np.ndarray
    Abar1: np.ndarray
    Abar2: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Cbar: np.ndarray
    D: np.ndarray
    Dbar: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        N1 = self.grid.n_steps + 1
        m = self.A1.shape[-1]
        for name in ("A1", "A2", "Abar1", "Abar2", "B", "C", "Cbar", "H"):
            arr = getattr(self, name)
            if arr.shape != (N1, m, m):
                raise ShapeError(f"{name} has shape {arr.shape}, expected {(N1, m, m)}")
        k2 = self.D.shape[-1]
        for name in ("D", "Dbar", "G1", "G2"):
            arr = getattr(self, name)
            if arr.shape != (N1, m, k2):
                raise ShapeError(f"{name} has shape {arr.shape}, expected {(N1, m, k2)}")

    @property
    def dim(self) -> int:
        return self.A1.shape[-1]

    @property
    def k2(self) -> int:
        return self.D.shape[-1]

    @classmethod
    def constant(cls, grid: TimeGrid, **blocks) -> "StackedBlocks":
        """Time-invariant blocks; missing entries default to zero."""
        m = np.atleast_2d(blocks["A1"]).shape[0]
        k2 = np.atleast_2d(blocks.get("D", np.zeros((m, 1)))).reshape(m, -1).shape[1]
        N1 = grid.n_steps + 1
        out = {}
        for name in ("A1", "A2", "Abar1", "Abar2", "B", "C", "Cbar", "H"):
            v = np.asarray(blocks.get(name, np.zeros((m, m))), dtype=float).reshape(m, m)
            out[name] = np.broadcast_to(v, (N1, m, m)).copy()
        for name in ("D", "Dbar", "G1", "G2"):
            v = np.asarray(blocks.get(name, np.zeros((m, k2))), dtype=float).reshape(m, k2)
            out[name] = np.broadcast_to(v, (N1, m, k2)).copy()
        return cls(grid=grid, **out)

    def noise_free(self) -> "StackedBlocks":
        """Copy with every diffusion-side block set to zero."""
        z = np.zeros_like
        return dataclasses.replace(self, Abar1=z(self.Abar1), Abar2=z(self.Abar2),
                                   C=z(self.C), Cbar=z(self.Cbar), Dbar=z(self.Dbar))


def assemble_stacked(barred: BarredCoefficients, pi2: MatrixFunction,
                     xi2: MatrixFunction | None = None) -> StackedBlocks:
    """Stack the barred coefficients with ``Pi2`` into the block matrices.

    ``xi2`` is needed only for ``H``; when omitted ``H`` is formed with a
    pseudo-inverse, which is exact whenever ``cbar2^T Pi2 dbar`` vanishes.
    """
    grid = barred.grid
    N1 = grid.n_steps + 1
    g = {f.name: getattr(barred, f.name).values[:N1] for f in dataclasses.fields(barred)}
    P2 = pi2.values[:N1]
    a1, a2, c1, c2 = g["a1"], g["a2"], g["c1"], g["c2"]
    f, h, k, p = g["f"], g["h"], g["k"], g["p"]
    b, d, q1, q2 = g["b"], g["d"], g["q1"], g["q2"]
    Z = np.zeros_like(a1)
    zk = np.zeros_like(b)

    def blk(tl, tr, bl, br):
        return np.concatenate([np.concatenate([tl, tr], axis=2),
                               np.concatenate([bl, br], axis=2)], axis=1)

    kT, pT = _T(k), _T(p)
    c2tPd = _T(c2) @ P2 @ d
    if xi2 is None:
        xi2_inv = np.linalg.pinv(_T(d) @ P2 @ d)
    else:
        xi2_inv = np.linalg.pinv(xi2.values[:N1])
    return StackedBlocks(
        grid=grid,
        A1=blk(a1, _T(f) @ P2 + kT @ P2 @ c1, Z, a1),
        A2=blk(a2, kT @ P2 @ c2, Z, a2),
        Abar1=blk(c1, _T(h) @ P2 + pT @ P2 @ c1, Z, c1),
        Abar2=blk(c2, pT @ P2 @ c2, Z, c2),
        B=blk(kT @ P2 @ k, _T(f), f, Z),
        C=blk(kT @ P2 @ p, kT, h, Z),
        Cbar=blk(pT @ P2 @ p, pT, p, Z),
        D=np.concatenate([kT @ P2 @ d, b], axis=1),
        Dbar=np.concatenate([pT @ P2 @ d, d], axis=1),
        G1=np.concatenate([q1, -c2tPd], axis=1),
        G2=np.concatenate([q2, zk], axis=1),
        H=blk(Z, Z, Z, -c2tPd @ xi2_inv @ _T(c2tPd)),
    )


@dataclasses.dataclass(frozen=True)
class OmegaTerms:
    """Omega matrices of the diagonal condition plus conditioning data."""

    omega1: np.ndarray
    omega2: np.ndarray
    omega3: np.ndarray
    resolvent: np.ndarray  # [I - Gamma Cbar]^{-1}
    condition: np.ndarray


def assemble_omegas(blocks: StackedBlocks, gamma, xi3, cond_cap: float = COND_CAP) -> OmegaTerms:
    """Omega1, Omega2, Omega3 at every ``[0, T]`` node for the given ``Gamma``.

    ``gamma`` and ``xi3`` may be MatrixFunctions or node arrays.
    """
    G = gamma.values if isinstance(gamma, MatrixFunction) else np.asarray(gamma, dtype=float)
    X3 = xi3.values if isinstance(xi3, MatrixFunction) else np.asarray(xi3, dtype=float)
    N1 = blocks.grid.n_steps + 1
    G, X3 = G[:N1], X3[:N1]
    m = blocks.dim
    I = np.broadcast_to(np.eye(m), G.shape)
    M = I - G @ blocks.Cbar
    cond = np.linalg.cond(M)
    bad = ~np.isfinite(cond) | (cond > cond_cap)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise ConditioningError(
            f"I - Gamma Cbar is singular or ill-conditioned at node {j} (condition {cond[j]:.3g})",
            node=j, condition=float(cond[j]))
    R = np.linalg.inv(M)
    X3inv = checked_inverse(X3, "Xi3", cond_cap)
    B, C, D, G2 = blocks.B, blocks.C, blocks.D, blocks.G2
    E = blocks.Abar1 + _T(C) @ G            # Abar1 + C^T Gamma
    F = G2 - G @ D                          # G2 - Gamma D
    RG = R @ G
    om1 = B @ G + C @ RG @ E + D @ X3inv @ _T(F)
    om2 = -B - C @ RG @ _T(C) + D @ X3inv @ _T(D)
    om3 = F @ X3inv @ _T(F) - _T(E) @ RG @ E - G @ B @ G
    return OmegaTerms(om1, om2, om3, R, cond)


def diagonal_map(omegas: OmegaTerms, W: np.ndarray) -> np.ndarray:
    """``W O1 + O1^T W + W O2 W + O3`` with ``W`` the window integral of Lambda."""
    o1 = omegas.omega1
    return W @ o1 + _T(o1) @ W + W @ omegas.omega2 @ W + omegas.omega3
