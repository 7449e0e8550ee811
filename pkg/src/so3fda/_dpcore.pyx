# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dynamic program for temporal registration (see ``_dp.py``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, asin, INFINITY

cnp.import_array()

cdef double TIE_EPS = 1e-14
cdef double SMALL_ANGLE = 1e-4


cdef inline void matmul(const double* X, const double* Y, double* out) noexcept nogil:
    cdef int r, c
    for r in range(3):
        for c in range(3):
            out[3 * r + c] = X[3 * r] * Y[c] + X[3 * r + 1] * Y[3 + c] + X[3 * r + 2] * Y[6 + c]


cdef inline void matmul_bt(const double* X, const double* Y, double* out) noexcept nogil:
    # X @ Y^T
    cdef int r, c
    for r in range(3):
        for c in range(3):
            out[3 * r + c] = X[3 * r] * Y[3 * c] + X[3 * r + 1] * Y[3 * c + 1] + X[3 * r + 2] * Y[3 * c + 2]


cdef inline void matmul_at(const double* X, const double* Y, double* out) noexcept nogil:
    # X^T @ Y
    cdef int r, c
    for r in range(3):
        for c in range(3):
            out[3 * r + c] = X[r] * Y[c] + X[3 + r] * Y[3 + c] + X[6 + r] * Y[6 + c]


cdef inline void expm(double a1, double a2, double a3, double* out) noexcept nogil:
    cdef double th2 = a1 * a1 + a2 * a2 + a3 * a3
    cdef double th = sqrt(th2)
    cdef double c1, c2
    if th < SMALL_ANGLE:
        c1 = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        c2 = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        c1 = sin(th) / th
        c2 = (1.0 - cos(th)) / th2
    # I + c1 A + c2 A^2 with A = hat(a); A^2 = a a^T - |a|^2 I
    out[0] = 1.0 + c2 * (a1 * a1 - th2)
    out[1] = -c1 * a3 + c2 * a1 * a2
    out[2] = c1 * a2 + c2 * a1 * a3
    out[3] = c1 * a3 + c2 * a1 * a2
    out[4] = 1.0 + c2 * (a2 * a2 - th2)
    out[5] = -c1 * a1 + c2 * a2 * a3
    out[6] = -c1 * a2 + c2 * a1 * a3
    out[7] = c1 * a1 + c2 * a2 * a3
    out[8] = 1.0 + c2 * (a3 * a3 - th2)


cdef inline double dist(const double* X, const double* Y) noexcept nogil:
    cdef double acc = 0.0, d
    cdef int k
    for k in range(9):
        d = X[k] - Y[k]
        acc += d * d
    d = sqrt(acc / 2.0) / 2.0
    if d > 1.0:
        d = 1.0
    return 2.0 * asin(d)


cdef void interp(const double[::1] t, const double[:, :, ::1] B, const double[:, ::1] incr,
                 Py_ssize_t m, double s, double* out) noexcept nogil:
    # m: any index with t[m] <= s; advance to the bracketing interval
    cdef Py_ssize_t K = t.shape[0] - 1
    cdef double tau
    cdef double E[9]
    cdef int k
    while m < K - 1 and t[m + 1] <= s:
        m += 1
    tau = (s - t[m]) / (t[m + 1] - t[m])
    if tau == 0.0:
        for k in range(9):
            out[k] = B[m, k // 3, k % 3]
        return
    if tau == 1.0:
        for k in range(9):
            out[k] = B[m + 1, k // 3, k % 3]
        return
    expm(tau * incr[m, 0], tau * incr[m, 1], tau * incr[m, 2], E)
    matmul(&B[m, 0, 0], E, out)


def dp_warp(t_in, A_in, B_in, incr_in, double w_right, double w_left, int window):
    cdef const double[::1] t = np.ascontiguousarray(t_in, dtype=np.float64)
    cdef const double[:, :, ::1] A = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef const double[:, :, ::1] B = np.ascontiguousarray(B_in, dtype=np.float64)
    cdef const double[:, ::1] incr = np.ascontiguousarray(incr_in, dtype=np.float64)
    cdef Py_ssize_t K = t.shape[0] - 1

    from ._dp import step_order
    steps = [st for st in step_order(window) if st[0] <= K and st[1] <= K]
    cdef Py_ssize_t nsteps = len(steps)
    cdef long[::1] su = np.array([st[0] for st in steps], dtype=np.int_)
    cdef long[::1] sv = np.array([st[1] for st in steps], dtype=np.int_)

    D_arr = np.full((K + 1, K + 1), np.inf)
    back_arr = np.zeros((K + 1, K + 1), dtype=np.int_)
    cdef double[:, ::1] D = D_arr
    cdef long[:, ::1] back = back_arr

    cdef Py_ssize_t i, j, p, s, u, v, i0, j0
    cdef double best, prev, c, f, time
    cdef double Bs[9]
    cdef double prev_r[9]
    cdef double prev_l[9]
    cdef double cur_r[9]
    cdef double cur_l[9]
    cdef int bp, k

    D[0, 0] = 0.0
    with nogil:
        for i in range(1, K + 1):
            for j in range(1, K + 1):
                best = INFINITY
                bp = -1
                for p in range(nsteps):
                    u = su[p]
                    v = sv[p]
                    if u > i or v > j:
                        continue
                    i0 = i - u
                    j0 = j - v
                    prev = D[i0, j0]
                    if prev == INFINITY:
                        continue
                    c = 0.0
                    for s in range(u + 1):
                        if s == 0:
                            for k in range(9):
                                Bs[k] = B[j0, k // 3, k % 3]
                        elif s == u:
                            for k in range(9):
                                Bs[k] = B[j, k // 3, k % 3]
                        else:
                            f = (t[i0 + s] - t[i0]) / (t[i] - t[i0])
                            time = t[j0] + f * (t[j] - t[j0])
                            interp(t, B, incr, j0, time, Bs)
                        if w_right != 0.0:
                            matmul_bt(&A[i0 + s, 0, 0], Bs, cur_r)
                        if w_left != 0.0:
                            matmul_at(&A[i0 + s, 0, 0], Bs, cur_l)
                        if s > 0:
                            if w_right != 0.0:
                                c += w_right * dist(prev_r, cur_r)
                            if w_left != 0.0:
                                c += w_left * dist(prev_l, cur_l)
                        for k in range(9):
                            prev_r[k] = cur_r[k]
                            prev_l[k] = cur_l[k]
                    c += prev
                    if c < best - TIE_EPS:
                        best = c
                        bp = p
                D[i, j] = best
                back[i, j] = bp

    ii = [K]
    jj = [K]
    i = K
    j = K
    while i > 0 or j > 0:
        p = back[i, j]
        i -= su[p]
        j -= sv[p]
        ii.append(i)
        jj.append(j)
    return np.array(ii[::-1]), np.array(jj[::-1]), float(D[K, K])
