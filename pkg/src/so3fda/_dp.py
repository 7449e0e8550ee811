"""Pure-Python dynamic program for temporal registration.

Reference implementation of the kernel in ``_dpcore.pyx``; both expose
``dp_warp(t, A, B, incr, w_right, w_left, window)`` returning the matched
grid indices ``(ii, jj)`` of the optimal lattice path and its cost.

Node ``(i, j)`` means ``phi(t_i) = t_j``. A step ``(i, j) -> (i+u, j+v)`` with
``1 <= u, v <= window`` makes ``phi`` linear on ``[t_i, t_{i+u}]``; its cost is
the chordal geodesic length, over ``t_i .. t_{i+u}``, of the relative curves
``a (b o phi)^T`` (weight ``w_right``) and ``a^T (b o phi)`` (weight ``w_left``),
with ``b`` interpolated geodesically.
"""

from __future__ import annotations

import numpy as np

from . import liegroup as lg

TIE_EPS = 1e-14


def step_order(window: int) -> list[tuple[int, int]]:
    """Candidate steps, closest to the diagonal first."""
    steps = [(u, v) for u in range(1, window + 1) for v in range(1, window + 1)]
    return sorted(steps, key=lambda s: (abs(s[0] - s[1]), s[0] + s[1], s[0]))


def _interp(t, B, incr, s):
    K = t.size - 1
    m = np.clip(np.searchsorted(t, s, side="right") - 1, 0, K - 1)
    tau = (s - t[m]) / (t[m + 1] - t[m])
    out = B[m] @ lg.exp_so3(tau[..., None] * incr[m])
    at0 = tau == 0.0
    at1 = tau == 1.0
    out[at0] = B[m[at0]]
    out[at1] = B[m[at1] + 1]
    return out


def _dist(X, Y):
    x = np.sqrt(np.einsum("...ij,...ij->...", X - Y, X - Y) / 2.0) / 2.0
    return 2.0 * np.arcsin(np.minimum(x, 1.0))


def segment_costs(t, A, B, incr, w_right, w_left, u, v):
    """Cost of every step ``(i, j) -> (i+u, j+v)``, shape ``(K+1-u, K+1-v)``."""
    K = t.size - 1
    ii = np.arange(K + 1 - u)
    jj = np.arange(K + 1 - v)
    t0, t1 = t[jj], t[jj + v]
    span_a = t[ii + u] - t[ii]
    cost = np.zeros((ii.size, jj.size))
    prev_r = prev_l = None
    for s in range(u + 1):
        Ai = A[ii + s][:, None]  # (ni, 1, 3, 3)
        if s == 0:
            Bs = B[jj][None]
        elif s == u:
            Bs = B[jj + v][None]
        else:
            f = (t[ii + s] - t[ii]) / span_a
            times = t0[None, :] + f[:, None] * (t1 - t0)[None, :]
            Bs = _interp(t, B, incr, times)
        Bs = np.broadcast_to(Bs, (ii.size, jj.size, 3, 3))
        cur_r = Ai @ np.swapaxes(Bs, -1, -2) if w_right else None
        cur_l = np.swapaxes(Ai, -1, -2) @ Bs if w_left else None
        if s > 0:
            if w_right:
                cost += w_right * _dist(prev_r, cur_r)
            if w_left:
                cost += w_left * _dist(prev_l, cur_l)
        prev_r, prev_l = cur_r, cur_l
    return cost


def dp_warp(t, A, B, incr, w_right, w_left, window):
    t = np.ascontiguousarray(t, dtype=float)
    K = t.size - 1
    steps = step_order(window)
    costs = {(u, v): segment_costs(t, A, B, incr, w_right, w_left, u, v) for (u, v) in steps if u <= K and v <= K}
    steps = [s for s in steps if s in costs]
    D = np.full((K + 1, K + 1), np.inf)
    back = np.zeros((K + 1, K + 1, 2), dtype=np.int64)
    D[0, 0] = 0.0
    for i in range(1, K + 1):
        for j in range(1, K + 1):
            best = np.inf
            bu = bv = 0
            for u, v in steps:
                if u > i or v > j:
                    continue
                prev = D[i - u, j - v]
                if prev == np.inf:
                    continue
                c = prev + costs[u, v][i - u, j - v]
                if c < best - TIE_EPS:
                    best, bu, bv = c, u, v
            D[i, j] = best
            back[i, j] = bu, bv
    ii, jj = [K], [K]
    i = j = K
    while i > 0 or j > 0:
        u, v = back[i, j]
        i, j = i - u, j - v
        ii.append(i)
        jj.append(j)
    return np.array(ii[::-1]), np.array(jj[::-1]), float(D[K, K])
