"""Simulation of Gaussian perturbation (GP) models of rotation curves.

A GP model draws ``gamma(t) = gamma0(t) Exp(hat(A_t))`` where ``A_t`` is a
zero-mean Gaussian process in R^3. The two noise processes and the five
benchmark models used throughout the simulation study live here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import liegroup as lg
from .curves import RotCurve, default_grid, euler_to_rot

MODEL_TAGS = ("A0", "B0.5", "B1", "B2", "B2.5")

B_MIXING = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.5, 0.5, 0.0],
        [1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(3)],
    ]
)

# Marker-placement style misalignment, Euler angles in degrees.
MISALIGN_P_DEG = (-0.5, 13.0, -9.0)
MISALIGN_Q_DEG = (12.0, 0.0, 5.0)

_EPS2_CENTERS = np.arange(10) / 9.0
_EPS2_WIDTH = 0.2


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator for substream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))


def misalignment() -> tuple[np.ndarray, np.ndarray]:
    return euler_to_rot(MISALIGN_P_DEG), euler_to_rot(MISALIGN_Q_DEG)


# --- noise processes ---------------------------------------------------------


def eps1_path(t: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``a1 sin(pi t / 2) + a2 cos(pi t / 2)`` for coefficient arrays of shape ``(..., 2)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    return coeffs[..., 0, None] * np.sin(np.pi * t / 2) + coeffs[..., 1, None] * np.cos(np.pi * t / 2)


def eps2_basis(t: np.ndarray) -> np.ndarray:
    """Gaussian bumps ``beta_i(t)``, shape ``(10, K)``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-((t[None, :] - _EPS2_CENTERS[:, None]) ** 2) / _EPS2_WIDTH)


def eps2_path(t: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``(sin(4 pi t) + 1.5) sum_i a_i beta_i(t) / sqrt(sum_i beta_i(t))``, coefficients ``(..., 10)``."""
    t = np.asarray(t, dtype=float)
    beta = eps2_basis(t)
    envelope = (np.sin(4 * np.pi * t) + 1.5) / np.sqrt(beta.sum(axis=0))
    return envelope * (np.asarray(coeffs, dtype=float) @ beta)


def eps2_variance(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    beta = eps2_basis(t)
    return (np.sin(4 * np.pi * t) + 1.5) ** 2 * (beta**2).sum(axis=0) / beta.sum(axis=0)


_N_COEFFS = {"eps1": 2, "eps2": 10}
_PATHS = {"eps1": eps1_path, "eps2": eps2_path}


def sample_eps1(t: np.ndarray, rng: np.random.Generator, size=()) -> np.ndarray:
    size = (size,) if np.isscalar(size) else tuple(size)
    return eps1_path(t, rng.standard_normal(size + (2,)))


def sample_eps2(t: np.ndarray, rng: np.random.Generator, size=()) -> np.ndarray:
    size = (size,) if np.isscalar(size) else tuple(size)
    return eps2_path(t, rng.standard_normal(size + (10,)))


# --- models ----------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Three independent copies of a scalar process, optionally mixed.

    ``degrees=True`` reads the process values as degrees.
    """

    kind: str = "eps1"
    scale: float = 1.0
    mixing: np.ndarray | None = None
    degrees: bool = True

    def __post_init__(self):
        if self.kind not in _PATHS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("noise scale must be positive")

    def matrix(self) -> np.ndarray:
        M = np.eye(3) if self.mixing is None else np.asarray(self.mixing, dtype=float)
        factor = self.scale * (np.pi / 180.0 if self.degrees else 1.0)
        return factor * M

    def paths_from_coeffs(self, t: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Generator values ``(..., K, 3)`` in radians from coefficients ``(..., 3, ncoef)``."""
        raw = _PATHS[self.kind](t, coeffs)  # (..., 3, K)
        return np.swapaxes(raw, -1, -2) @ self.matrix().T

    def draw(self, t: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
        coeffs = rng.standard_normal((n, 3, _N_COEFFS[self.kind]))
        return self.paths_from_coeffs(t, coeffs)


@dataclass(frozen=True, eq=False)
class GPSpec:
    center: RotCurve
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    name: str = ""


def center_euler(lam: float, t: np.ndarray) -> np.ndarray:
    """Euler angles in degrees of the benchmark center curve, shape ``(K, 3)``."""
    t = np.asarray(t, dtype=float)
    bump = np.exp(-0.5 * ((t - 0.5) / 0.08) ** 2) / (0.08 * np.sqrt(2 * np.pi))
    ax = 80 * t**2 - 80 * t + 20 + lam * bump - 35
    ay = 70 * t * np.sin(4 * np.pi * t**0.7) + 5
    az = np.full_like(t, 10 * np.cos(13 * np.pi))
    return np.column_stack([ax, ay, az])


def center_curve(lam: float, t: np.ndarray | None = None) -> RotCurve:
    t = default_grid() if t is None else t
    return RotCurve(t, euler_to_rot(center_euler(lam, t)))


def make_model(tag: str, t: np.ndarray | None = None, scale: float = 1.0) -> GPSpec:
    """One of the five benchmark GP models ``A0, B0.5, B1, B2, B2.5``."""
    t = default_grid() if t is None else t
    if tag == "A0":
        return GPSpec(center_curve(0.0, t), NoiseSpec("eps1", scale), tag)
    if tag in MODEL_TAGS:
        lam = float(tag[1:])
        return GPSpec(center_curve(lam, t), NoiseSpec("eps2", scale, B_MIXING), tag)
    raise ValueError(f"unknown model {tag!r}; expected one of {MODEL_TAGS}")


def perturb(center: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Right perturbation ``center(t) Exp(hat(A_t))`` on arrays."""
    return center @ lg.exp_so3(A)


def sample_gp_array(spec: GPSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws as an ``(n, K, 3, 3)`` array."""
    A = spec.noise.draw(spec.center.t, rng, n)
    return perturb(spec.center.R, A)


def sample_gp(spec: GPSpec, rng: np.random.Generator, n: int | None = None):
    """One curve (``n is None``) or a list of ``n`` curves from the model."""
    k = 1 if n is None else n
    values = sample_gp_array(spec, rng, k)
    curves = [RotCurve(spec.center.t, v) for v in values]
    return curves[0] if n is None else curves


def sample_two_sided_gp(
    center: RotCurve,
    sigma: float,
    rng: np.random.Generator | None = None,
    C: np.ndarray | None = None,
    D: np.ndarray | None = None,
) -> tuple[RotCurve, float]:
    """Draw ``Exp(hat C_t) delta0(t) Exp(hat D_t)`` with ``C, D`` scaled eps1 triples.

    Returns the curve and ``max_t |log(delta0^T delta) - (delta0^T C + D)|``,
    the part not captured by the first-order right perturbation.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    t = center.t
    if C is None:
        C = sigma * np.swapaxes(sample_eps1(t, rng, 3), 0, 1)
    if D is None:
        D = sigma * np.swapaxes(sample_eps1(t, rng, 3), 0, 1)
    R0 = center.R
    values = lg.exp_so3(C) @ R0 @ lg.exp_so3(D)
    rel = np.swapaxes(R0, -1, -2) @ values
    if np.any(lg.on_cut_locus(rel)):
        raise ValueError("perturbation reached the cut locus; logarithm is ambiguous")
    first_order = np.einsum("kji,kj->ki", R0, C) + D
    residual = np.linalg.norm(lg.log_so3(rel) - first_order, axis=-1)
    return RotCurve(t, values), float(residual.max())
