"""Numpy Euler-Maruyama kernel for linear memory SDEs, vectorised over paths.

Both kernel backends integrate ``S`` copies of

    dX = (F X + G M + Bu u + f) dt + (Fd X + Gd M + Du u + fd) dW,
    M(t) = int_0^t X ds (trapezoid),

driven by the same increments.  Copy ``s`` uses the control
``u_s = Kx X_0 + Km M_0 + k0 + shift_s``: the feedback always reads copy 0,
so copies with a non-zero shift are the reference trajectory's control
perturbed by a deterministic path.  With ``shift_0 = 0`` copy 0 is the plain
closed loop.

Per copy and cost ``c`` the kernel accumulates ``X^T Wx X + M^T Wm M +
u^T Wu u`` at every node (quadrature weights folded into ``W*``) plus the
terminal ``X(T)^T Gt X(T)``.
"""
from __future__ import annotations

import numpy as np


def euler_chunk(*args, **kwargs):
    # overflow is detected by the finiteness check and reported as ``bad``
    with np.errstate(over="ignore", invalid="ignore"):
        return _euler_chunk(*args, **kwargs)


def _euler_chunk(x0, F, G, Bu, f, Fd, Gd, Du, fd, Kx, Km, k0, shifts,
                 Wx, Wm, Wu, Gt, dW, dt, store=False):
    """Simulate one chunk of paths.

    Parameters
    ----------
    x0 : (m,) initial state shared by all paths and copies.
    F, G, Fd, Gd : (N+1, m, m) drift and diffusion matrices.
    Bu, Du : (N+1, m, q) control loadings.
    f, fd : (N+1, m) affine terms.
    Kx, Km : (N+1, q, m) and k0 : (N+1, q) control law.
    shifts : (S, N+1, q) control shifts of the copies.
    Wx, Wm : (C, N+1, m, m), Wu : (C, N+1, q, q), Gt : (C, m, m) cost weights.
    dW : (P, N) Brownian increments.
    dt : float step.
    store : keep state, memory and control paths of copy 0.

    Returns
    -------
    dict
        ``costs`` (P, S, C); node sums ``sx, sx2`` (N+1, m) and ``su, su2``
        (N+1, q) of copy 0; ``X, M, U`` when ``store``; ``bad`` = (path, step)
        of the first non-finite state or (-1, -1).
    """
    P, N = dW.shape
    m = x0.shape[0]
    q = k0.shape[1]
    C = Wx.shape[0]
    S = shifts.shape[0]
    X = np.broadcast_to(x0, (P, S, m)).astype(float)
    M = np.zeros((P, S, m))
    costs = np.zeros((P, S, C))
    sx = np.zeros((N + 1, m))
    sx2 = np.zeros((N + 1, m))
    su = np.zeros((N + 1, q))
    su2 = np.zeros((N + 1, q))
    if store:
        Xs = np.empty((P, N + 1, m))
        Ms = np.empty((P, N + 1, m))
        Us = np.empty((P, N + 1, q))
    bad = (-1, -1)
    for k in range(N + 1):
        u0 = X[:, 0] @ Kx[k].T + M[:, 0] @ Km[k].T + k0[k]
        u = u0[:, None, :] + shifts[:, k]
        for c in range(C):
            costs[:, :, c] += (np.einsum("psi,ij,psj->ps", X, Wx[c, k], X)
                               + np.einsum("psi,ij,psj->ps", M, Wm[c, k], M)
                               + np.einsum("psi,ij,psj->ps", u, Wu[c, k], u))
        x0k = X[:, 0]
        u0k = u[:, 0]
        sx[k] = x0k.sum(axis=0)
        sx2[k] = (x0k * x0k).sum(axis=0)
        su[k] = u0k.sum(axis=0)
        su2[k] = (u0k * u0k).sum(axis=0)
        if store:
            Xs[:, k] = x0k
            Ms[:, k] = M[:, 0]
            Us[:, k] = u0k
        if k == N:
            break
        drift = X @ F[k].T + M @ G[k].T + u @ Bu[k].T + f[k]
        diff = X @ Fd[k].T + M @ Gd[k].T + u @ Du[k].T + fd[k]
        Xn = X + drift * dt + diff * dW[:, k, None, None]
        fin = np.isfinite(Xn).all(axis=(1, 2))
        if not fin.all():
            bad = (int(np.argmin(fin)), k + 1)
            break
        M = M + 0.5 * dt * (X + Xn)
        X = Xn
    for c in range(C):
        costs[:, :, c] += np.einsum("psi,ij,psj->ps", X, Gt[c], X)
    out = {"costs": costs, "sx": sx, "sx2": sx2, "su": su, "su2": su2, "bad": bad}
    if store:
        out.update(X=Xs, M=Ms, U=Us)
    return out
