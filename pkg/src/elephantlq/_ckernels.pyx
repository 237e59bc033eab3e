# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler-Maruyama kernel; same contract as ``_kernels_py.euler_chunk``."""
import numpy as np
from libc.math cimport isfinite


cdef inline double quad(const double* W, const double* v, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc, tot = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += W[i * n + j] * v[j]
        tot += v[i] * acc
    return tot


def euler_chunk(const double[::1] x0, const double[:, :, ::1] F, const double[:, :, ::1] G,
                const double[:, :, ::1] Bu, const double[:, ::1] f, const double[:, :, ::1] Fd,
                const double[:, :, ::1] Gd, const double[:, :, ::1] Du, const double[:, ::1] fd,
                const double[:, :, ::1] Kx, const double[:, :, ::1] Km, const double[:, ::1] k0,
                const double[:, :, ::1] shifts,
                const double[:, :, :, ::1] Wx, const double[:, :, :, ::1] Wm,
                const double[:, :, :, ::1] Wu, const double[:, :, ::1] Gt,
                const double[:, ::1] dW, double dt, bint store=False):
    cdef Py_ssize_t P = dW.shape[0], N = dW.shape[1]
    cdef Py_ssize_t m = x0.shape[0], q = k0.shape[1], C = Wx.shape[0]
    cdef Py_ssize_t S = shifts.shape[0]
    cdef Py_ssize_t p, k, i, j, c, s
    cdef double acc, acc2, w, cost
    costs_a = np.zeros((P, S, C))
    sx_a = np.zeros((N + 1, m))
    sx2_a = np.zeros((N + 1, m))
    su_a = np.zeros((N + 1, q))
    su2_a = np.zeros((N + 1, q))
    cdef double[:, :, ::1] costs = costs_a
    cdef double[:, ::1] sx = sx_a
    cdef double[:, ::1] sx2 = sx2_a
    cdef double[:, ::1] su = su_a
    cdef double[:, ::1] su2 = su2_a
    cdef double[::1] Xb = np.empty(S * m)
    cdef double[::1] Mb = np.empty(S * m)
    cdef double[::1] Xnb = np.empty(S * m)
    cdef double[::1] u0b = np.empty(q)
    cdef double[::1] ub = np.empty(S * q)
    cdef double* X = &Xb[0]
    cdef double* M = &Mb[0]
    cdef double* Xn = &Xnb[0]
    cdef double* u0 = &u0b[0]
    cdef double* u = &ub[0]
    cdef double* xs
    cdef double* ms
    cdef double* us
    cdef const double* A
    cdef const double* A2
    # skip cost blocks that are identically zero
    cdef unsigned char[:, ::1] use = np.stack([
        np.any(np.asarray(Wx) != 0, axis=(1, 2, 3)),
        np.any(np.asarray(Wm) != 0, axis=(1, 2, 3)),
        np.any(np.asarray(Wu) != 0, axis=(1, 2, 3)),
        np.any(np.asarray(Gt) != 0, axis=(1, 2))], axis=1).astype(np.uint8)
    cdef double[:, :, ::1] Xs
    cdef double[:, :, ::1] Ms
    cdef double[:, :, ::1] Us
    if store:
        Xs_a = np.empty((P, N + 1, m))
        Ms_a = np.empty((P, N + 1, m))
        Us_a = np.empty((P, N + 1, q))
        Xs = Xs_a
        Ms = Ms_a
        Us = Us_a
    cdef Py_ssize_t bad_p = -1, bad_k = -1
    cdef bint ok
    with nogil:
        for p in range(P):
            for s in range(S):
                for i in range(m):
                    X[s * m + i] = x0[i]
                    M[s * m + i] = 0.0
            ok = True
            for k in range(N + 1):
                A = &Kx[k, 0, 0]
                A2 = &Km[k, 0, 0]
                for i in range(q):
                    acc = k0[k, i]
                    for j in range(m):
                        acc = acc + A[i * m + j] * X[j] + A2[i * m + j] * M[j]
                    u0[i] = acc
                for s in range(S):
                    for i in range(q):
                        u[s * q + i] = u0[i] + shifts[s, k, i]
                for s in range(S):
                    xs = X + s * m
                    ms = M + s * m
                    us = u + s * q
                    for c in range(C):
                        cost = 0.0
                        if use[c, 0]:
                            cost = cost + quad(&Wx[c, k, 0, 0], xs, m)
                        if use[c, 1]:
                            cost = cost + quad(&Wm[c, k, 0, 0], ms, m)
                        if use[c, 2]:
                            cost = cost + quad(&Wu[c, k, 0, 0], us, q)
                        costs[p, s, c] += cost
                for i in range(m):
                    sx[k, i] += X[i]
                    sx2[k, i] += X[i] * X[i]
                for i in range(q):
                    su[k, i] += u[i]
                    su2[k, i] += u[i] * u[i]
                if store:
                    for i in range(m):
                        Xs[p, k, i] = X[i]
                        Ms[p, k, i] = M[i]
                    for i in range(q):
                        Us[p, k, i] = u[i]
                if k == N:
                    break
                w = dW[p, k]
                for s in range(S):
                    xs = X + s * m
                    ms = M + s * m
                    us = u + s * q
                    for i in range(m):
                        acc = f[k, i]
                        acc2 = fd[k, i]
                        for j in range(m):
                            acc = acc + F[k, i, j] * xs[j] + G[k, i, j] * ms[j]
                            acc2 = acc2 + Fd[k, i, j] * xs[j] + Gd[k, i, j] * ms[j]
                        for j in range(q):
                            acc = acc + Bu[k, i, j] * us[j]
                            acc2 = acc2 + Du[k, i, j] * us[j]
                        Xn[s * m + i] = xs[i] + acc * dt + acc2 * w
                        if not isfinite(Xn[s * m + i]):
                            ok = False
                if not ok:
                    if bad_k < 0 or k + 1 < bad_k:
                        bad_k = k + 1
                        bad_p = p
                    break
                for i in range(S * m):
                    M[i] = M[i] + 0.5 * dt * (X[i] + Xn[i])
                    X[i] = Xn[i]
            if not ok:
                continue
            for s in range(S):
                for c in range(C):
                    if use[c, 3]:
                        costs[p, s, c] += quad(&Gt[c, 0, 0], X + s * m, m)
    out = {"costs": costs_a, "sx": sx_a, "sx2": sx2_a, "su": su_a, "su2": su2_a,
           "bad": (int(bad_p), int(bad_k))}
    if store:
        out.update(X=Xs_a, M=Ms_a, U=Us_a)
    return out
