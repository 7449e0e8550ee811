from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from so3fda import _dp, gpsim
from so3fda import estimate as est
from so3fda.curves import increments

compiled = pytest.mark.skipif(est.BACKEND != "cython", reason="compiled kernel not built")


def pair(seed, t):
    rng = gpsim.make_rng(seed)
    a = gpsim.sample_gp_array(gpsim.make_model("B2", t), rng, 1)[0]
    b = gpsim.sample_gp_array(gpsim.make_model("B1", t), rng, 1)[0]
    return a, b


@compiled
class TestParity:
    @pytest.mark.parametrize("window", [1, 2, 3, 4])
    @pytest.mark.parametrize("weights", [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)])
    def test_same_path(self, window, weights):
        t = np.linspace(0, 1, 41)
        a, b = pair(window, t)
        args = (t, a, b, increments(b), *weights, window)
        ii_p, jj_p, cost_p = _dp.dp_warp(*args)
        ii_c, jj_c, cost_c = est.dp_backend("cython")(*args)
        assert np.array_equal(ii_p, ii_c) and np.array_equal(jj_p, jj_c)
        assert cost_c == pytest.approx(cost_p, rel=1e-12)

    def test_uneven_grid(self):
        t = np.sort(np.concatenate([[0.0, 1.0], gpsim.make_rng(4).uniform(0, 1, 30)]))
        a, b = pair(9, t)
        w_p = est.temporal_align_arr(t, a, b, backend="python")
        w_c = est.temporal_align_arr(t, a, b, backend="cython")
        assert np.array_equal(w_p, w_c)

    def test_equal_curves_tie(self, grid):
        a = gpsim.center_curve(1.0, grid).R
        for name in ("python", "cython"):
            assert np.array_equal(est.temporal_align_arr(grid, a, a, backend=name), grid)


def test_unknown_backend():
    with pytest.raises(ValueError):
        est.dp_backend("fortran")


def test_fallback_when_extension_missing():
    # a None entry in sys.modules makes the import fail as if the extension were absent
    code = (
        "import sys; sys.modules['so3fda._dpcore'] = None\n"
        "from so3fda import estimate as est\n"
        "assert est.BACKEND == 'python', est.BACKEND\n"
        "import numpy as np\n"
        "t = np.linspace(0, 1, 11); R = np.broadcast_to(np.eye(3), (11, 3, 3))\n"
        "assert np.array_equal(est.temporal_align_arr(t, R, R), t)\n"
    )
    subprocess.run([sys.executable, "-c", code], check=True)
