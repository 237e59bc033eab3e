"""Reference solutions built from matrix exponentials and plain quadrature.

These routines share no stepping code with the solvers they check: every
propagator is an exact ``expm`` and every integral a trapezoid sum, so
agreement is evidence rather than self-consistency.  All assume
time-invariant blocks.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .grid import build_time_grid
from .leader import StackedBlocks, assemble_omegas, diagonal_map


def _T(a):
    return np.swapaxes(a, -1, -2)


def _propagators(A: np.ndarray, dt: float, count: int) -> np.ndarray:
    step = expm(A * dt)
    out = np.empty((count,) + A.shape)
    out[0] = np.eye(A.shape[0])
    for k in range(1, count):
        out[k] = out[k - 1] @ step
    return out


def _trap_rows(vals: np.ndarray, lengths: np.ndarray, dt: float) -> np.ndarray:
    """Row-wise trapezoid over the first ``lengths[j] + 1`` entries of ``vals[j]``."""
    J, O = vals.shape[:2]
    o = np.arange(O)[None, :]
    L = lengths[:, None]
    w = np.where(o <= L, dt, 0.0)
    w = np.where((o == 0) | (o == L), 0.5 * dt, w)
    w = np.where(L == 0, 0.0, w)
    return np.einsum("jo,jo...->j...", w, vals)


def gamma_lambda_picard(blocks: StackedBlocks, xi3: float, T: float, dt: float,
                        max_iter: int = 500, tol: float = 1e-13, damping: float = 0.5):
    """Damped Picard iteration for ``Gamma`` and the diagonal of ``Lambda``.

    Window ``theta(t) = t``.  ``Lambda(t, s) = E(s-t)^T D(s) E(s-t)`` with
    ``E = expm(A1 .)`` and ``D`` the diagonal, so only ``D`` is iterated.
    The blocks are read at node 0 and rebuilt on a grid of step ``dt``.

    Returns ``(t, Gamma, D, iterations)`` on the oracle grid.
    """
    grid = build_time_grid(T, dt)
    N = grid.n_steps
    N1 = N + 1
    const = {name: getattr(blocks, name)[0] for name in
             ("A1", "A2", "Abar1", "Abar2", "B", "C", "Cbar", "D", "Dbar", "G1", "G2", "H")}
    bl = StackedBlocks.constant(grid, **const)
    A = const["A1"]
    m = A.shape[0]
    E = _propagators(A, dt, N1)
    X3 = np.full((N1, 1, 1), float(xi3)) if np.ndim(xi3) == 0 else np.broadcast_to(xi3, (N1,) + np.shape(xi3)[-2:])
    j = np.arange(N1)
    Ow = np.minimum(j, N - j)                 # window of Lambda rows
    Omax = int(Ow.max())
    o = np.arange(Omax + 1)
    k_idx = np.minimum(j[:, None] + o[None, :], N)
    half = N // 2
    src_nodes = np.arange(half + 1)
    og = np.arange(half + 1)
    kg = np.minimum(j[:, None] + og[None, :], half)
    Lg = np.maximum(half - j, 0)
    D = np.zeros((N1, m, m))
    G = np.zeros((N1, m, m))
    it = 0
    for it in range(1, max_iter + 1):
        om = assemble_omegas(bl, G, X3)
        vals = _T(E[o])[None] @ D[k_idx] @ E[o][None]
        W = _trap_rows(vals, Ow, dt)
        S = np.zeros((N1, m, m))
        S[src_nodes] = _T(E[src_nodes]) @ D[2 * src_nodes] @ E[src_nodes]
        gv = _T(E[og])[None] @ S[kg] @ E[og][None]
        Gn = -_trap_rows(gv, Lg, dt)
        Dn = diagonal_map(om, W)
        Dn = 0.5 * (Dn + _T(Dn))
        change = max(np.abs(Dn - D).max(), np.abs(Gn - G).max())
        D = (1 - damping) * D + damping * Dn
        G = (1 - damping) * G + damping * Gn
        if change < tol:
            break
    return grid.head, G, D, it


def noise_free_boundary_solution(blocks: StackedBlocks, xi3: float, T: float, t: np.ndarray,
                                 phi0: np.ndarray):
    """Exact forward/backward pair of the noise-free stacked system.

    Valid when the memory blocks ``A2``, ``H`` and ``G1`` vanish.  With
    ``u2 = -xi3^{-1}(D^T psi - G2^T phi)`` the pair solves a linear
    two-point problem ``phi(0) = phi0``, ``psi(T) = 0``, which is solved
    with one matrix exponential.

    Returns ``(phi, psi)``, each ``(len(phi0), len(t), m)``.
    """
    A = blocks.A1[0]
    B = blocks.B[0]
    D = blocks.D[0]
    G2 = blocks.G2[0]
    inv = np.linalg.inv(np.atleast_2d(xi3))
    m = A.shape[0]
    top = np.hstack([A + D @ inv @ G2.T, B - D @ inv @ D.T])
    bot = np.hstack([G2 @ inv @ G2.T, -A.T - G2 @ inv @ D.T])
    big = np.vstack([top, bot])
    full = expm(big * T)
    phi0 = np.atleast_2d(phi0)
    psi0 = -np.linalg.solve(full[m:, m:], full[m:, :m] @ phi0.T).T
    z0 = np.concatenate([phi0, psi0], axis=1).T
    z = np.stack([expm(big * s) @ z0 for s in t])          # (len(t), 2m, P)
    z = np.transpose(z, (2, 0, 1))
    return z[:, :, :m], z[:, :, m:]


def random_piecewise_linear(rng: np.random.Generator, T: float, pieces: int = 7):
    """Continuous piecewise-linear function with random interior breakpoints."""
    bp = np.sort(np.concatenate([[0.0, T], rng.uniform(0.0, T, pieces - 1)]))
    vals = rng.normal(size=bp.size)
    return lambda t: np.interp(t, bp, vals)
