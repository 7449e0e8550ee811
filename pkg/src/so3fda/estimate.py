"""Center-curve estimation and registration of rotation curves.

* :func:`pem` -- pointwise extrinsic mean: SVD projection of the Euclidean mean.
* :func:`loss_intrinsic` / :func:`loss_l2quat` -- curve losses.
* :func:`spatial_align` -- closed-form ``(P, Q)`` via the quaternion lift and an
  SO(4) projection.
* :func:`temporal_align` -- dynamic-program time warping.
* :func:`sample_align` -- alternating spatial/temporal registration of two samples.

Functions with an ``_arr`` suffix work on raw ``(..., K, 3, 3)`` arrays sharing a
time grid and are what the permutation tests call in their inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _dp
from . import liegroup as lg
from .curves import QuatCurve, RotCurve, Warp, increments, length_array, lift_array, stack

try:
    from ._dpcore import dp_warp as _dp_compiled
except ImportError:  # pragma: no cover - exercised only without a compiler
    _dp_compiled = None

BACKEND = "cython" if _dp_compiled is not None else "python"

INTRINSIC_LOSSES = ("I1", "I2", "Imean")
LOSS_VARIANTS = INTRINSIC_LOSSES + ("L2quat",)
_WEIGHTS = {"I1": (1.0, 0.0), "I2": (0.0, 1.0), "Imean": (0.5, 0.5)}


class PemError(ValueError):
    """The pointwise projection is undefined at some grid points."""

    def __init__(self, points):
        self.points = list(map(int, points))
        super().__init__(f"PEM not unique at grid points {self.points}")


@dataclass(frozen=True, eq=False)
class PemResult:
    curve: RotCurve
    unique: np.ndarray
    min_second_singular: float


@dataclass(frozen=True, eq=False)
class AlignResult:
    P: np.ndarray
    Q: np.ndarray
    warp: Warp | None = None
    unique: bool = True
    iterations: int = 0
    converged: bool = True


@dataclass(frozen=True)
class AlignOptions:
    use_spatial: bool = True
    use_temporal: bool = True
    max_iter: int = 20
    tol: float = 1e-3
    loss: str = "Imean"
    slope_window: int = 3


# --- PEM ----------------------------------------------------------------------


def pem_arr(X: np.ndarray, strict: bool = True) -> np.ndarray:
    """PEM of an ``(N, K, 3, 3)`` sample as a ``(K, 3, 3)`` array."""
    R, _, unique = lg.project_so3_batch(X.mean(axis=0))
    if strict and not np.all(unique):
        raise PemError(np.flatnonzero(~unique))
    return R


def pem(sample: Sequence[RotCurve]) -> PemResult:
    """Pointwise extrinsic mean curve of a sample on a common grid."""
    X = stack(sample)
    R, d, unique = lg.project_so3_batch(X.mean(axis=0))
    if not np.all(unique):
        raise PemError(np.flatnonzero(~unique))
    return PemResult(RotCurve(sample[0].t, R), unique, float(d[:, 1].min()))


# --- losses --------------------------------------------------------------------


def _check_loss(variant: str, allowed=LOSS_VARIANTS) -> None:
    if variant not in allowed:
        raise ValueError(f"unknown loss {variant!r}; expected one of {allowed}")


def trapezoid_weights(t: np.ndarray) -> np.ndarray:
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def loss_intrinsic_arr(A: np.ndarray, B: np.ndarray, variant: str = "Imean") -> float:
    w_right, w_left = _WEIGHTS[variant]
    out = 0.0
    if w_right:
        out += w_right * float(length_array(A @ np.swapaxes(B, -1, -2)))
    if w_left:
        out += w_left * float(length_array(np.swapaxes(A, -1, -2) @ B))
    return out


def _same_grid(a: RotCurve, b: RotCurve) -> None:
    if a.t.shape != b.t.shape or np.any(a.t != b.t):
        raise ValueError("curves are sampled on different grids")


def loss_intrinsic(a: RotCurve, b: RotCurve, variant: str = "Imean") -> float:
    """Length of ``a b^{-1}`` (I1), of ``a^{-1} b`` (I2) or their average (Imean)."""
    _check_loss(variant, INTRINSIC_LOSSES)
    _same_grid(a, b)
    return loss_intrinsic_arr(a.R, b.R, variant)


def l2quat_arr(t: np.ndarray, qa: np.ndarray, qb: np.ndarray) -> float:
    w = trapezoid_weights(t)
    minus = np.sum(w * np.sum((qa - qb) ** 2, axis=-1))
    plus = np.sum(w * np.sum((qa + qb) ** 2, axis=-1))
    return float(min(minus, plus))


def loss_l2quat(a: RotCurve, b: RotCurve) -> float:
    """Integrated squared distance of the quaternion lifts, minimized over the relative sign."""
    _same_grid(a, b)
    return l2quat_arr(a.t, lift_array(a.R), lift_array(b.R))


def curve_loss_arr(t: np.ndarray, A: np.ndarray, B: np.ndarray, variant: str) -> float:
    if variant == "L2quat":
        return l2quat_arr(t, lift_array(A), lift_array(B))
    return loss_intrinsic_arr(A, B, variant)


# --- spatial registration --------------------------------------------------------


def h_matrix_arr(t: np.ndarray, qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    w = trapezoid_weights(t)
    return (qb * w[:, None]).T @ qa


def h_matrix(a: QuatCurve, b: QuatCurve) -> np.ndarray:
    """``int b(t) a(t)^T dt`` by the trapezoid rule."""
    if a.t.shape != b.t.shape or np.any(a.t != b.t):
        raise ValueError("curves are sampled on different grids")
    return h_matrix_arr(a.t, a.q, b.q)


def spatial_align_arr(t: np.ndarray, A: np.ndarray, B: np.ndarray):
    """``(P, Q, unique)`` minimizing the quaternion L2 loss between ``P A Q`` and ``B``."""
    H = h_matrix_arr(t, lift_array(A), lift_array(B))
    res = lg.project_so4(H)
    P, Q = lg.so4_to_isometry(res.rotation)
    return P, Q, res.unique


def spatial_align(a: RotCurve, b: RotCurve) -> AlignResult:
    """Rotations ``(P, Q)`` such that ``P a Q`` is closest to ``b``.

    ``unique`` is False when the lifted cross-moment matrix has rank <= 2, in
    which case the returned pair is one of several minimizers.
    """
    _same_grid(a, b)
    P, Q, unique = spatial_align_arr(a.t, a.R, b.R)
    return AlignResult(P, Q, None, unique, 1, True)


# --- temporal registration ---------------------------------------------------------


def dp_backend(name: str | None = None):
    if name is None:
        name = BACKEND
    if name == "cython":
        if _dp_compiled is None:
            raise RuntimeError("compiled kernel not available; reinstall with a C compiler")
        return _dp_compiled
    if name == "python":
        return _dp.dp_warp
    raise ValueError(f"unknown backend {name!r}")


def temporal_align_arr(
    t: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    variant: str = "Imean",
    slope_window: int = 3,
    backend: str | None = None,
) -> np.ndarray:
    """Warp image on the grid ``t`` (see :func:`temporal_align`)."""
    _check_loss(variant, INTRINSIC_LOSSES)
    if slope_window < 1:
        raise ValueError("slope_window must be >= 1")
    w_right, w_left = _WEIGHTS[variant]
    ii, jj, _ = dp_backend(backend)(t, A, B, increments(B), w_right, w_left, int(slope_window))
    image = np.interp(t, t[ii], t[jj])
    image[0], image[-1] = 0.0, 1.0
    return image


def temporal_align(
    a: RotCurve,
    b: RotCurve,
    variant: str = "Imean",
    slope_window: int = 3,
    backend: str | None = None,
) -> Warp:
    """Warp ``phi`` minimizing the intrinsic loss between ``a`` and ``b o phi``.

    The search runs over monotone lattice paths with step slopes bounded by
    ``slope_window``; ties go to the step closest to the diagonal, so equal
    curves yield the identity.
    """
    _same_grid(a, b)
    return Warp(a.t, temporal_align_arr(a.t, a.R, b.R, variant, slope_window, backend))


# --- sample alignment ---------------------------------------------------------------


def interp_many(t: np.ndarray, X: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Geodesic interpolation of every curve in ``(N, K, 3, 3)`` at times ``s``."""
    incr = lg.log_so3(np.swapaxes(X[:, :-1], -1, -2) @ X[:, 1:])
    k = np.clip(np.searchsorted(t, s, side="right") - 1, 0, t.size - 2)
    tau = (s - t[k]) / (t[k + 1] - t[k])
    out = X[:, k] @ lg.exp_so3(tau[None, :, None] * incr[:, k])
    out[:, tau == 0.0] = X[:, k[tau == 0.0]]
    out[:, tau == 1.0] = X[:, k[tau == 1.0] + 1]
    return out


def sample_align_arr(
    t: np.ndarray,
    X1: np.ndarray,
    X2: np.ndarray,
    opts: AlignOptions = AlignOptions(),
    eta: np.ndarray | None = None,
    backend: str | None = None,
):
    """Align sample ``X1`` onto ``X2``; returns ``(aligned X1, P, Q, warp image, unique, iterations, converged)``.

    ``eta`` may pass a precomputed PEM of ``X2``.
    """
    eye = np.eye(3)
    P_acc, Q_acc, w_acc = eye, eye, t.copy()
    if not (opts.use_spatial or opts.use_temporal):
        return X1, eye, eye, w_acc, True, 0, True
    if eta is None:
        eta = pem_arr(X2)
    X = X1
    unique, converged, it = True, False, 0
    for it in range(1, opts.max_iter + 1):
        gam = pem_arr(X)
        if opts.use_spatial:
            P, Q, unique = spatial_align_arr(t, gam, eta)
        else:
            P, Q = eye, eye
        change = lg.geo_dist(P, eye) + lg.geo_dist(Q, eye)
        P_acc, Q_acc = P @ P_acc, Q_acc @ Q
        if opts.use_temporal:
            phi = temporal_align_arr(t, eta, P @ gam @ Q, opts.loss, opts.slope_window, backend)
            change += float(np.max(np.abs(phi - t)))
            w_acc = np.interp(phi, t, w_acc)
            w_acc[0], w_acc[-1] = 0.0, 1.0
            X = interp_many(t, P_acc @ X1 @ Q_acc, w_acc)
        else:
            X = P_acc @ X1 @ Q_acc
        if change < opts.tol:
            converged = True
            break
    return X, P_acc, Q_acc, w_acc, unique, it, converged


def sample_align(
    chi1: Sequence[RotCurve],
    chi2: Sequence[RotCurve],
    opts: AlignOptions = AlignOptions(),
    backend: str | None = None,
) -> tuple[list[RotCurve], AlignResult]:
    """Iteratively register sample ``chi1`` onto ``chi2``.

    Each round computes both PEMs, estimates ``(P, Q)`` between them, warps
    the moved PEM of ``chi1`` onto that of ``chi2``, and applies the composed
    transform to every curve of ``chi1``. Stops once the round's update is
    below ``opts.tol`` (radians plus warp sup-norm) or after ``opts.max_iter``.
    """
    t = chi1[0].t
    X1, X2 = stack(chi1), stack(chi2)
    if X1.shape[1:] != X2.shape[1:] or np.any(chi2[0].t != t):
        raise ValueError("samples are on different grids")
    X, P, Q, w, unique, it, conv = sample_align_arr(t, X1, X2, opts, backend=backend)
    warp = Warp(t, w) if opts.use_temporal else None
    return [RotCurve(t, x) for x in X], AlignResult(P, Q, warp, unique, it, conv)
