"""CSV sample files.

One row per (curve, time point)::

    curve_id,t,<payload columns>

with payload columns ``r11..r33`` (row-major matrix), ``q1..q4`` (unit
quaternion, scalar first) or ``ax,ay,az`` (Euler angles in degrees). Each curve's
times are rescaled linearly onto ``[0, 1]`` and the curve is resampled onto
the common grid by geodesic interpolation. Floats are written in shortest
round-trip form so files are byte-stable.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from . import liegroup as lg
from .curves import EULER_CONVENTION, RotCurve, default_grid, interp_geodesic, rot_to_euler, euler_to_rot

ENCODINGS = {
    "matrix": [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)],
    "quaternion": ["q1", "q2", "q3", "q4"],
    "euler_deg": ["ax", "ay", "az"],
}

ORTHO_SILENT = 1e-10
ORTHO_MAX = 1e-3
QUAT_NORM_TOL = 1e-3


class SampleFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def detect_encoding(header: list[str]) -> str:
    payload = header[2:]
    for name, cols in ENCODINGS.items():
        if payload == cols:
            return name
    raise SampleFormatError(f"unrecognized payload columns {payload}")


def _to_rotations(vals: np.ndarray, encoding: str, convention: str, where) -> np.ndarray:
    if encoding == "matrix":
        R = vals.reshape(-1, 3, 3)
        eye = np.eye(3)
        for n, M in enumerate(R):
            resid = np.linalg.norm(M @ M.T - eye)
            if resid > ORTHO_MAX or np.linalg.det(M) <= 0:
                raise SampleFormatError(f"{where(n)}: not a rotation matrix (orthonormality residual {resid:.3g})")
            if resid > ORTHO_SILENT:
                R[n] = lg.project_so3(M).rotation
        return R
    if encoding == "quaternion":
        norms = np.linalg.norm(vals, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > QUAT_NORM_TOL)
        if bad.size:
            raise SampleFormatError(f"{where(bad[0])}: quaternion norm {norms[bad[0]]:.6g} is not 1")
        return lg.quat_to_rot(vals / norms[:, None])
    return euler_to_rot(vals, convention)


def read_rows(path) -> tuple[str, dict[str, tuple[np.ndarray, np.ndarray, list[int]]]]:
    """Parse a sample file into ``{curve_id: (times, payload rows, line numbers)}``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SampleFormatError(f"{path}: empty file") from None
        if header[:2] != ["curve_id", "t"]:
            raise SampleFormatError(f"{path}:1: header must start with curve_id,t")
        try:
            encoding = detect_encoding(header)
        except SampleFormatError as exc:
            raise SampleFormatError(f"{path}:1: {exc}") from None
        width = len(header)
        rows: dict[str, tuple[list, list, list]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise SampleFormatError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                nums = [float(x) for x in row[1:]]
            except ValueError:
                raise SampleFormatError(f"{path}:{lineno}: non-numeric field") from None
            if not np.all(np.isfinite(nums)):
                raise SampleFormatError(f"{path}:{lineno}: non-finite value")
            ts, vs, ls = rows.setdefault(row[0], ([], [], []))
            ts.append(nums[0])
            vs.append(nums[1:])
            ls.append(lineno)
    if not rows:
        raise SampleFormatError(f"{path}: no data rows")
    return encoding, {k: (np.array(ts), np.array(vs), ls) for k, (ts, vs, ls) in rows.items()}


def load_labeled(
    path,
    encoding: str | None = None,
    grid_size: int = 101,
    convention: str = EULER_CONVENTION,
) -> tuple[list[str], list[RotCurve]]:
    """Curve ids and curves on the common ``grid_size`` grid, in file order."""
    found, rows = read_rows(path)
    if encoding is not None and encoding != found:
        raise SampleFormatError(f"{path}: file has {found} columns, expected {encoding}")
    grid = default_grid(grid_size)
    ids, curves = [], []
    for cid, (ts, vals, lines) in rows.items():
        dt = np.diff(ts)
        if ts.size < 2 or np.any(dt <= 0):
            bad = lines[int(np.argmax(dt <= 0)) + 1] if ts.size >= 2 else lines[0]
            raise SampleFormatError(f"{path}:{bad}: times of curve {cid!r} must be strictly increasing (>= 2 rows)")
        R = _to_rotations(vals.copy(), found, convention, lambda n: f"{path}:{lines[n]}")
        tau = (ts - ts[0]) / (ts[-1] - ts[0])
        tau[-1] = 1.0
        same = tau.size == grid.size and np.array_equal(tau, grid)
        ids.append(cid)
        curves.append(RotCurve(grid, R if same else interp_geodesic(tau, R, grid)))
    return ids, curves


def load_sample(path, encoding: str | None = None, grid_size: int = 101, convention: str = EULER_CONVENTION) -> list[RotCurve]:
    return load_labeled(path, encoding, grid_size, convention)[1]


def format_sample(
    curves,
    encoding: str = "matrix",
    ids=None,
    convention: str = EULER_CONVENTION,
) -> str:
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}; expected one of {tuple(ENCODINGS)}")
    ids = [str(i) for i in range(len(curves))] if ids is None else list(ids)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve_id", "t"] + ENCODINGS[encoding])
    for cid, c in zip(ids, curves):
        if encoding == "matrix":
            payload = c.R.reshape(-1, 9)
        elif encoding == "quaternion":
            payload = lg.rot_to_quat(c.R)
        else:
            payload = rot_to_euler(c.R, convention)
        for tk, p in zip(c.t, payload):
            w.writerow([cid, _fmt(tk)] + [_fmt(x) for x in p])
    return buf.getvalue()


def save_sample(path, curves, encoding: str = "matrix", ids=None, convention: str = EULER_CONVENTION) -> None:
    Path(path).write_text(format_sample(curves, encoding, ids, convention), encoding="utf-8")
