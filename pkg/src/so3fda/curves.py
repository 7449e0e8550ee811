"""Discretely sampled rotation curves, their quaternion lifts and group actions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from . import liegroup as lg

DEFAULT_GRID_SIZE = 101
EULER_CONVENTION = "XYZ"
GIMBAL_TOL_DEG = 1e-8


class LiftError(ValueError):
    pass


class GimbalLockError(ValueError):
    pass


def default_grid(n: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    if n < 2:
        raise ValueError("a time grid needs at least two points")
    return np.linspace(0.0, 1.0, n)


def check_grid(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be a 1-d array with at least two points")
    if t[0] != 0.0 or t[-1] != 1.0:
        raise ValueError(f"time grid must start at 0 and end at 1, got [{t[0]}, {t[-1]}]")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RotCurve:
    """Rotation-valued curve: ``R[k]`` is the value at time ``t[k]``."""

    t: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        t = check_grid(self.t)
        R = np.asarray(self.R, dtype=float)
        if R.shape != (t.size, 3, 3):
            raise ValueError(f"values have shape {R.shape}, expected {(t.size, 3, 3)}")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "R", _frozen(R))

    def __len__(self) -> int:
        return self.t.size

    def check(self, atol: float = 1e-10) -> "RotCurve":
        """Validate rotation values and sampling density; returns self."""
        if not lg.is_rotation(self.R, atol):
            raise ValueError("curve values are not rotations")
        steps = lg.geo_dist(self.R[:-1], self.R[1:])
        if np.any(steps >= np.pi / 2):
            k = int(np.argmax(steps))
            raise LiftError(f"consecutive samples {k},{k + 1} are {steps[k]:.3f} rad apart (>= pi/2)")
        return self

    @classmethod
    def constant(cls, R: np.ndarray, t: np.ndarray | None = None) -> "RotCurve":
        t = default_grid() if t is None else t
        return cls(t, np.broadcast_to(np.asarray(R, dtype=float), (len(t), 3, 3)))


@dataclass(frozen=True, eq=False)
class QuatCurve:
    t: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = check_grid(self.t)
        q = np.asarray(self.q, dtype=float)
        if q.shape != (t.size, 4):
            raise ValueError(f"values have shape {q.shape}, expected {(t.size, 4)}")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "q", _frozen(q))


@dataclass(frozen=True, eq=False)
class Warp:
    """Piecewise-linear monotone map of [0, 1]; ``image[k]`` is the value at ``t[k]``."""

    t: np.ndarray
    image: np.ndarray

    def __post_init__(self):
        t = check_grid(self.t)
        img = np.asarray(self.image, dtype=float)
        if img.shape != t.shape:
            raise ValueError("warp image must match its grid")
        if img[0] != 0.0 or img[-1] != 1.0 or np.any(np.diff(img) <= 0):
            raise ValueError("warp must be strictly increasing from 0 to 1")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "image", _frozen(img))

    @classmethod
    def identity(cls, t: np.ndarray) -> "Warp":
        return cls(t, t)

    @classmethod
    def from_function(cls, f, t: np.ndarray) -> "Warp":
        img = np.asarray(f(np.asarray(t, dtype=float)), dtype=float)
        img[0], img[-1] = 0.0, 1.0
        return cls(t, img)

    def __call__(self, s) -> np.ndarray:
        return np.interp(s, self.t, self.image)

    def compose(self, inner: "Warp") -> "Warp":
        """``self o inner`` on ``inner``'s grid."""
        return Warp(inner.t, self(inner.image))

    def inverse(self) -> "Warp":
        return Warp(self.t, np.interp(self.t, self.image, self.t))

    def sup_dist_identity(self) -> float:
        return float(np.max(np.abs(self.image - self.t)))


# --- array kernels -------------------------------------------------------------


def lift_array(R: np.ndarray) -> np.ndarray:
    """Sign-coherent quaternions for a ``(K, 3, 3)`` sequence (or ``(..., K, 3, 3)``)."""
    q = lg.rot_to_quat(R)
    dots = np.einsum("...i,...i->...", q[..., :-1, :], q[..., 1:, :])
    if np.any(np.abs(dots) <= np.cos(np.pi / 4)):
        raise LiftError("consecutive rotations too far apart to lift unambiguously")
    signs = np.cumprod(np.sign(dots), axis=-1)
    signs = np.concatenate([np.ones(signs.shape[:-1] + (1,)), signs], axis=-1)
    return q * signs[..., None]


def length_array(R: np.ndarray) -> np.ndarray:
    """Chordal geodesic length of ``(..., K, 3, 3)`` sequences."""
    return np.sum(lg.geo_dist(R[..., :-1, :, :], R[..., 1:, :, :]), axis=-1)


def increments(R: np.ndarray) -> np.ndarray:
    """``log(R_k^T R_{k+1})`` for consecutive samples."""
    return lg.log_so3(np.swapaxes(R[:-1], -1, -2) @ R[1:])


def interp_geodesic(t: np.ndarray, R: np.ndarray, s: np.ndarray, incr: np.ndarray | None = None) -> np.ndarray:
    """Evaluate the geodesic interpolant of samples ``(t, R)`` at times ``s``."""
    s = np.clip(np.asarray(s, dtype=float), t[0], t[-1])
    if incr is None:
        incr = increments(R)
    k = np.clip(np.searchsorted(t, s, side="right") - 1, 0, t.size - 2)
    tau = (s - t[k]) / (t[k + 1] - t[k])
    out = R[k] @ lg.exp_so3(tau[:, None] * incr[k])
    out[tau == 0.0] = R[k[tau == 0.0]]
    out[tau == 1.0] = R[k[tau == 1.0] + 1]
    return out


# --- curve operations ----------------------------------------------------------


def lift(c: RotCurve) -> QuatCurve:
    """Continuous lift to the unit quaternions, starting at the canonical sign."""
    return QuatCurve(c.t, lift_array(c.R))


def act_isometry(P: np.ndarray, Q: np.ndarray, c: RotCurve) -> RotCurve:
    return RotCurve(c.t, np.asarray(P) @ c.R @ np.asarray(Q))


def warp_curve(c: RotCurve, w: Warp) -> RotCurve:
    """``c o w`` sampled on ``c``'s grid, by geodesic interpolation."""
    if w.t.shape != c.t.shape or np.any(w.t != c.t):
        raise ValueError("warp and curve must share a grid")
    return RotCurve(c.t, interp_geodesic(c.t, c.R, w.image))


def resample(c: RotCurve, t: np.ndarray) -> RotCurve:
    return RotCurve(t, interp_geodesic(c.t, c.R, t))


def curve_length(c: RotCurve) -> float:
    return float(length_array(c.R))


def relative_curve(a: RotCurve, b: RotCurve, side: str = "right") -> RotCurve:
    """Pointwise ``a b^T`` (``side='right'``) or ``a^T b`` (``side='left'``)."""
    if a.t.shape != b.t.shape or np.any(a.t != b.t):
        raise ValueError("curves are sampled on different grids")
    if side == "right":
        return RotCurve(a.t, a.R @ np.swapaxes(b.R, -1, -2))
    if side == "left":
        return RotCurve(a.t, np.swapaxes(a.R, -1, -2) @ b.R)
    raise ValueError(f"side must be 'left' or 'right', not {side!r}")


def stack(curves: Sequence[RotCurve]) -> np.ndarray:
    """``(N, K, 3, 3)`` array of curve values; all curves must share a grid."""
    if len(curves) == 0:
        raise ValueError("empty sample")
    t0 = curves[0].t
    for c in curves[1:]:
        if c.t.shape != t0.shape or np.any(c.t != t0):
            raise ValueError("curves are sampled on different grids")
    return np.stack([c.R for c in curves])


# --- Euler angles ----------------------------------------------------------------


def euler_to_rot(angles_deg, convention: str = EULER_CONVENTION) -> np.ndarray:
    """Rotation(s) ``R_a(x) R_b(y) R_c(z)`` for intrinsic ``convention='ABC'``, degrees."""
    angles = np.asarray(angles_deg, dtype=float)
    flat = angles.reshape(-1, 3)
    R = Rotation.from_euler(convention, flat, degrees=True).as_matrix()
    return R.reshape(angles.shape[:-1] + (3, 3))


def rot_to_euler(R: np.ndarray, convention: str = EULER_CONVENTION) -> np.ndarray:
    """Inverse of :func:`euler_to_rot`; raises :class:`GimbalLockError` at the singularity."""
    R = np.asarray(R, dtype=float)
    flat = R.reshape(-1, 3, 3)
    # Tait-Bryan middle angle b: row i of R is (+-cos b ..., +-sin b at column k)
    i, j, k = ("XYZ".index(a) for a in convention.upper())
    b = np.degrees(np.arctan2(np.abs(flat[:, i, k]), np.hypot(flat[:, i, i], flat[:, i, j])))
    if np.any(b > 90.0 - GIMBAL_TOL_DEG):
        raise GimbalLockError(f"middle Euler angle within {GIMBAL_TOL_DEG} degrees of +-90")
    angles = Rotation.from_matrix(flat).as_euler(convention, degrees=True)
    return angles.reshape(R.shape[:-2] + (3,))
