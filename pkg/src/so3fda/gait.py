"""Knee-angle curves from segment frames, and synthetic gait subjects.

A knee curve is the pointwise relative rotation ``E_u(t) E_l(t)^T`` of the upper
and lower leg frames over one gait cycle. Re-attaching markers between two
sessions changes the frames to ``P E_u`` and ``Q^T E_l``, which moves the knee
curve to ``P gamma Q``: exactly the isometry action the registration removes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gpsim
from .curves import RotCurve, default_grid, euler_to_rot, interp_geodesic, stack


def knee_curves(upper, lower) -> list[RotCurve]:
    """``E_u E_l^T`` for matching sequences of frame curves."""
    if len(upper) != len(lower):
        raise ValueError(f"got {len(upper)} upper and {len(lower)} lower frame curves")
    out = []
    for n, (u, l) in enumerate(zip(upper, lower)):
        if u.t.shape != l.t.shape or np.any(u.t != l.t):
            raise ValueError(f"frame curves {n} are sampled on different grids")
        out.append(RotCurve(u.t, u.R @ np.swapaxes(l.R, -1, -2)))
    return out


def knee_from_labeled(upper_ids, upper, lower_ids, lower) -> tuple[list[str], list[RotCurve]]:
    """Pair frame curves by id (upper file order) and form knee curves."""
    if sorted(upper_ids) != sorted(lower_ids):
        missing = sorted(set(upper_ids) ^ set(lower_ids))
        raise ValueError(f"curve ids differ between frame files: {missing}")
    by_id = dict(zip(lower_ids, lower))
    return list(upper_ids), knee_curves(upper, [by_id[i] for i in upper_ids])


# --- synthetic subjects ------------------------------------------------------------


@dataclass(frozen=True)
class Subject:
    """Parameters of a synthetic walker.

    The knee center curve has flexion (third Euler angle) with a loading bump
    and a swing peak, plus small ab/adduction and axial rotation components
    (first and second angles, degrees).
    """

    swing_peak: float = 60.0
    loading_peak: float = 15.0
    swing_time: float = 0.72
    abduction: float = 4.0
    rotation: float = 8.0

    def knee_euler(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        flex = (
            5.0
            + self.loading_peak * np.exp(-0.5 * ((t - 0.15) / 0.06) ** 2)
            + self.swing_peak * np.exp(-0.5 * ((t - self.swing_time) / 0.1) ** 2)
        )
        add = self.abduction * np.sin(2 * np.pi * t)
        rot = self.rotation * np.sin(2 * np.pi * t + 0.5)
        return np.column_stack([add, rot, flex])

    def knee_center(self, t: np.ndarray) -> np.ndarray:
        return euler_to_rot(self.knee_euler(t))


def _cycle_warp(t: np.ndarray, rng: np.random.Generator, amplitude: float) -> np.ndarray:
    # monotone for |c| < 1 / (2 pi)
    c = amplitude * rng.uniform(-1.0, 1.0)
    w = t + c * np.sin(2 * np.pi * t)
    w[0], w[-1] = 0.0, 1.0
    return w


def _lower_frames(t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    heading = rng.uniform(-180.0, 180.0)
    ang = np.column_stack(
        [10 * np.sin(2 * np.pi * t), -30 + 40 * np.sin(2 * np.pi * t + 1.0), np.full_like(t, heading)]
    )
    return euler_to_rot(ang)


def session_frames(
    subject: Subject,
    n_cycles: int,
    rng: np.random.Generator,
    t: np.ndarray | None = None,
    P: np.ndarray | None = None,
    Q: np.ndarray | None = None,
    noise_scale: float = 1.0,
    warp_amplitude: float = 0.02,
) -> tuple[list[RotCurve], list[RotCurve]]:
    """Upper and lower frame curves for ``n_cycles`` gait cycles of one session.

    Each cycle is the subject's knee center perturbed by ``eps1`` noise and
    re-timed by its own smooth warp. Markers placed with offsets ``(P, Q)``
    record frames ``P E_u`` and ``Q^T E_l``.
    """
    t = default_grid() if t is None else t
    eye = np.eye(3)
    P = eye if P is None else P
    Q = eye if Q is None else Q
    center = subject.knee_center(t)
    noise = gpsim.NoiseSpec("eps1", noise_scale)
    A = noise.draw(t, rng, n_cycles)
    upper, lower = [], []
    for n in range(n_cycles):
        knee = gpsim.perturb(center, A[n])
        knee = interp_geodesic(t, knee, _cycle_warp(t, rng, warp_amplitude))
        El = _lower_frames(t, rng)
        Eu = knee @ El
        upper.append(RotCurve(t, P @ Eu))
        lower.append(RotCurve(t, Q.T @ El))
    return upper, lower


def session_knees(*args, **kw) -> np.ndarray:
    """``(n_cycles, K, 3, 3)`` knee curves of :func:`session_frames`."""
    upper, lower = session_frames(*args, **kw)
    return stack(knee_curves(upper, lower))
