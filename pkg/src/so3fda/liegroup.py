"""Small-matrix geometry of SO(3), unit quaternions and SO(4).

All array functions broadcast over leading dimensions: a ``(..., 3)`` array of
axis-angle vectors maps to a ``(..., 3, 3)`` stack of matrices and so on.
Matrix norms are the rescaled Frobenius norm ``sqrt(trace(A A^T) / 2)``;
vectors in R^3 and R^4 use the Euclidean norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_RTOL = 1e-9
_SMALL_ANGLE = 1e-4
_NEAR_PI = 1e-4
_ASIN_SLACK = 1e-9


class ProjectionError(ValueError):
    """Raised when a matrix has no well-defined projection onto SO(n)."""


@dataclass(frozen=True)
class ProjectionResult:
    rotation: np.ndarray
    unique: bool
    singular_values: np.ndarray


def frob(A: np.ndarray) -> np.ndarray:
    """Rescaled Frobenius norm over the last two axes."""
    A = np.asarray(A, dtype=float)
    return np.sqrt(np.einsum("...ij,...ij->...", A, A) / 2.0)


def hat(a: np.ndarray) -> np.ndarray:
    """Map ``(..., 3)`` vectors to skew-symmetric ``(..., 3, 3)`` matrices."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape[:-1] + (3, 3))
    a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2]
    out[..., 0, 1] = -a3
    out[..., 0, 2] = a2
    out[..., 1, 0] = a3
    out[..., 1, 2] = -a1
    out[..., 2, 0] = -a2
    out[..., 2, 1] = a1
    return out


def vee(A: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat`; reads the skew part of ``A``."""
    A = np.asarray(A, dtype=float)
    return 0.5 * np.stack(
        [A[..., 2, 1] - A[..., 1, 2], A[..., 0, 2] - A[..., 2, 0], A[..., 1, 0] - A[..., 0, 1]],
        axis=-1,
    )


def exp_so3(a: np.ndarray) -> np.ndarray:
    """Rodrigues formula ``I + sinc|a| A + (1 - cos|a|)/|a|^2 A^2`` with ``A = hat(a)``."""
    a = np.asarray(a, dtype=float)
    theta = np.linalg.norm(a, axis=-1)
    small = theta < _SMALL_ANGLE
    th2 = theta * theta
    safe = np.where(small, 1.0, theta)
    c1 = np.where(small, 1.0 - th2 / 6.0 + th2 * th2 / 120.0, np.sin(safe) / safe)
    c2 = np.where(small, 0.5 - th2 / 24.0 + th2 * th2 / 720.0, (1.0 - np.cos(safe)) / (safe * safe))
    A = hat(a)
    return np.eye(3) + c1[..., None, None] * A + c2[..., None, None] * (A @ A)


def _axis_near_pi(R: np.ndarray, skew: np.ndarray, c: np.ndarray) -> np.ndarray:
    # sym(R) = c I + (1 - c) n n^T exactly; take the dominant column of n n^T.
    sym = 0.5 * (R + np.swapaxes(R, -1, -2))
    B = (sym - c[..., None, None] * np.eye(3)) / (1.0 - c)[..., None, None]
    idx = np.argmax(np.diagonal(B, axis1=-2, axis2=-1), axis=-1)
    col = np.take_along_axis(B, idx[..., None, None].repeat(3, axis=-2), axis=-1)[..., 0]
    n = col / np.linalg.norm(col, axis=-1, keepdims=True)
    # Sign from the (small) skew part when it carries information, else
    # first nonzero coordinate positive.
    proj = np.einsum("...i,...i->...", n, skew)
    first = np.take_along_axis(n, np.argmax(np.abs(n) > 1e-12, axis=-1)[..., None], axis=-1)[..., 0]
    sign = np.where(np.abs(proj) > 1e-12, np.sign(proj), np.sign(first))
    return n * np.where(sign == 0, 1.0, sign)[..., None]


def log_so3(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of ``R`` with norm in ``[0, pi]``.

    At angle pi both ``n*pi`` and ``-n*pi`` are valid; the returned axis has its
    first nonzero coordinate positive. Use :func:`on_cut_locus` to detect it.
    """
    R = np.asarray(R, dtype=float)
    skew = vee(R)
    s = np.linalg.norm(skew, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, np.clip(c, -1.0, 1.0))
    small = theta < _SMALL_ANGLE
    near_pi = theta > np.pi - _NEAR_PI
    safe_s = np.where(small | near_pi, 1.0, s)
    factor = np.where(small, 1.0 + theta * theta / 6.0, theta / safe_s)
    out = factor[..., None] * skew
    if np.any(near_pi):
        axis = _axis_near_pi(R, skew, np.clip(c, -1.0, 1.0))
        out = np.where(near_pi[..., None], theta[..., None] * axis, out)
    return out


def on_cut_locus(R: np.ndarray, atol: float = 1e-8) -> np.ndarray:
    """True where the rotation angle of ``R`` is pi within ``atol``."""
    return np.linalg.norm(log_so3(R), axis=-1) > np.pi - atol


def geo_dist(P: np.ndarray, Q: np.ndarray) -> np.ndarray | float:
    """Bi-invariant geodesic distance ``2 arcsin(||P - Q|| / 2)``."""
    x = frob(np.asarray(P, dtype=float) - np.asarray(Q, dtype=float)) / 2.0
    if np.any(x > 1.0 + _ASIN_SLACK):
        raise ValueError(f"inputs are not rotations: ||P-Q||/2 = {np.max(x):.3g} > 1")
    d = 2.0 * np.arcsin(np.minimum(x, 1.0))
    return float(d) if np.ndim(d) == 0 else d


def is_rotation(R: np.ndarray, atol: float = 1e-10) -> bool:
    R = np.asarray(R, dtype=float)
    n = R.shape[-1]
    if R.shape[-2:] != (n, n) or not np.all(np.isfinite(R)):
        return False
    gram = R @ np.swapaxes(R, -1, -2)
    return bool(np.all(np.abs(gram - np.eye(n)) <= atol) and np.all(np.abs(np.linalg.det(R) - 1.0) <= atol))


def _svd_projection(A: np.ndarray):
    """Batched ``U S V^T`` maximizing ``trace(A^T R)`` over SO(n)."""
    U, d, Vt = np.linalg.svd(A)
    flip = np.linalg.det(U) * np.linalg.det(Vt) < 0
    U = U.copy()
    U[..., -1] *= np.where(flip, -1.0, 1.0)[..., None]
    return U @ Vt, d, flip


def project_so3_batch(A: np.ndarray):
    """Project a ``(..., 3, 3)`` stack; returns ``(rotations, singular_values, unique)``.

    Never raises; callers decide what to do with non-unique points.
    """
    R, d, flip = _svd_projection(np.asarray(A, dtype=float))
    tol = RANK_RTOL * d[..., 0]
    unique = (d[..., 1] > tol) & (~flip | (d[..., 1] - d[..., 2] > tol))
    return R, d, unique


def project_so3(A: np.ndarray) -> ProjectionResult:
    """Nearest rotation to ``A`` in the extrinsic metric.

    Raises :class:`ProjectionError` if ``rank(A) <= 1``.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3) or not np.all(np.isfinite(A)):
        raise ValueError("expected a finite 3x3 matrix")
    R, d, unique = project_so3_batch(A)
    if d[1] <= RANK_RTOL * d[0]:
        raise ProjectionError(f"projection undefined for rank <= 1 (singular values {d})")
    return ProjectionResult(R, bool(unique), d)


def project_so4(A: np.ndarray) -> ProjectionResult:
    """Nearest SO(4) element to ``A``; ``unique`` requires ``rank(A) > 2``."""
    A = np.asarray(A, dtype=float)
    if A.shape != (4, 4) or not np.all(np.isfinite(A)):
        raise ValueError("expected a finite 4x4 matrix")
    R, d, flip = _svd_projection(A)
    if not d[0] > 0.0:
        raise ProjectionError("projection undefined for the zero matrix")
    tol = RANK_RTOL * d[0]
    unique = d[2] > tol and (not flip or d[2] - d[3] > tol)
    return ProjectionResult(R, bool(unique), d)


# --- quaternions -----------------------------------------------------------


def quat_mul(p: np.ndarray, q: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Hamilton product with ``i j = k``; components ordered ``(w, x, y, z)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p1, p2, p3, p4 = (p[..., i] for i in range(4))
    q1, q2, q3, q4 = (q[..., i] for i in range(4))
    out = np.stack(
        [
            p1 * q1 - p2 * q2 - p3 * q3 - p4 * q4,
            p1 * q2 + p2 * q1 + p3 * q4 - p4 * q3,
            p1 * q3 - p2 * q4 + p3 * q1 + p4 * q2,
            p1 * q4 + p2 * q3 - p3 * q2 + p4 * q1,
        ],
        axis=-1,
    )
    if normalize:
        out = out / np.linalg.norm(out, axis=-1, keepdims=True)
    return out


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Covering map from unit quaternions onto SO(3).

    This is the homomorphic form: ``quat_to_rot(p*q) == quat_to_rot(p) @ quat_to_rot(q)``
    and ``quat_to_rot(q) @ v`` rotates ``v`` by ``q v q^-1``.
    """
    q = np.asarray(q, dtype=float)
    x1, x2, x3, x4 = (q[..., i] for i in range(4))
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * x3 * x3 - 2 * x4 * x4
    R[..., 0, 1] = 2 * (x2 * x3 - x1 * x4)
    R[..., 0, 2] = 2 * (x2 * x4 + x1 * x3)
    R[..., 1, 0] = 2 * (x2 * x3 + x1 * x4)
    R[..., 1, 1] = 1 - 2 * x2 * x2 - 2 * x4 * x4
    R[..., 1, 2] = 2 * (x3 * x4 - x1 * x2)
    R[..., 2, 0] = 2 * (x2 * x4 - x1 * x3)
    R[..., 2, 1] = 2 * (x3 * x4 + x1 * x2)
    R[..., 2, 2] = 1 - 2 * x2 * x2 - 2 * x3 * x3
    return R


def canonical_sign(q: np.ndarray) -> np.ndarray:
    """Flip ``q`` so that its first nonzero coordinate is positive."""
    q = np.asarray(q, dtype=float)
    idx = np.argmax(np.abs(q) > 1e-12, axis=-1)
    lead = np.take_along_axis(q, idx[..., None], axis=-1)
    return np.where(lead < 0, -q, q)


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Preimage of ``R`` under :func:`quat_to_rot` with canonical sign."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R, axis1=-2, axis2=-1)
    d0, d1, d2 = R[..., 0, 0], R[..., 1, 1], R[..., 2, 2]
    # 4 q_i^2 for each component; build from the largest for stability
    cand = np.stack([1 + tr, 1 + d0 - d1 - d2, 1 - d0 + d1 - d2, 1 - d0 - d1 + d2], axis=-1)
    k = np.argmax(cand, axis=-1)
    s = np.sqrt(np.maximum(np.take_along_axis(cand, k[..., None], axis=-1)[..., 0], 0.0)) * 2.0
    w_ = (R[..., 2, 1] - R[..., 1, 2])
    x_ = (R[..., 0, 2] - R[..., 2, 0])
    y_ = (R[..., 1, 0] - R[..., 0, 1])
    xy = R[..., 0, 1] + R[..., 1, 0]
    xz = R[..., 0, 2] + R[..., 2, 0]
    yz = R[..., 1, 2] + R[..., 2, 1]
    rows = [
        np.stack([s / 4, w_ / s, x_ / s, y_ / s], axis=-1),
        np.stack([w_ / s, s / 4, xy / s, xz / s], axis=-1),
        np.stack([x_ / s, xy / s, s / 4, yz / s], axis=-1),
        np.stack([y_ / s, xz / s, yz / s, s / 4], axis=-1),
    ]
    q = np.choose(k[..., None], rows)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return canonical_sign(q)


def left_mat(p: np.ndarray) -> np.ndarray:
    """Matrix of ``v -> p v``."""
    p1, p2, p3, p4 = np.asarray(p, dtype=float)
    return np.array(
        [
            [p1, -p2, -p3, -p4],
            [p2, p1, -p4, p3],
            [p3, p4, p1, -p2],
            [p4, -p3, p2, p1],
        ]
    )


def right_mat(q: np.ndarray) -> np.ndarray:
    """Matrix of ``v -> v q``."""
    q1, q2, q3, q4 = np.asarray(q, dtype=float)
    return np.array(
        [
            [q1, -q2, -q3, -q4],
            [q2, q1, q4, -q3],
            [q3, -q4, q1, q2],
            [q4, q3, -q2, q1],
        ]
    )


def quat_pair_to_so4(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``R`` with ``R v = p v q`` for every quaternion ``v``."""
    return left_mat(p) @ right_mat(q)


def _bilinear_basis() -> np.ndarray:
    # Row (4c+d) holds vec(L_{e_c} R_{e_d}); these 16 signed permutation
    # matrices are mutually orthogonal with squared norm 4.
    E = np.eye(4)
    return np.array([(left_mat(E[c]) @ right_mat(E[d])).ravel() for c in range(4) for d in range(4)])


_BASIS = _bilinear_basis()


def so4_to_quat_pair(R: np.ndarray, atol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``R in SO(4)`` as ``v -> p v q``.

    ``R`` is linear in the outer product ``p q^T``; recover that rank-one matrix
    by the orthogonal basis change and read off its leading singular pair.
    The common sign is fixed by making ``p`` canonical.
    """
    R = np.asarray(R, dtype=float)
    M = (_BASIS @ R.ravel() / 4.0).reshape(4, 4)
    U, s, Vt = np.linalg.svd(M)
    p = U[:, 0]
    q = Vt[0] * s[0]
    q = q / np.linalg.norm(q)
    if not np.array_equal(canonical_sign(p), p):
        p, q = -p, -q
    resid = np.max(np.abs(quat_pair_to_so4(p, q) - R))
    if resid > atol:
        raise ValueError(f"matrix is not in SO(4): reconstruction residual {resid:.3g}")
    return p, q


def so4_to_isometry(R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project an SO(4) element to the pair ``(P, Q)`` acting as ``X -> P X Q``."""
    p, q = so4_to_quat_pair(R)
    return quat_to_rot(p), quat_to_rot(q)


def random_rotation(rng: np.random.Generator, size=None) -> np.ndarray:
    """Haar-distributed rotations via normalized Gaussian quaternions."""
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return quat_to_rot(q)


def random_so4(rng: np.random.Generator) -> np.ndarray:
    p = rng.standard_normal(4)
    q = rng.standard_normal(4)
    return quat_pair_to_so4(p / np.linalg.norm(p), q / np.linalg.norm(q))
