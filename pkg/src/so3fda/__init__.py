"""Functional data analysis for rotation curves on SO(3)."""

from .curves import QuatCurve, RotCurve, Warp
from .estimate import AlignOptions, pem, sample_align, spatial_align, temporal_align
from .gpsim import make_model, sample_gp
from .testing import PermutationPlan, TestReport, test_continual, test_no_action, test_prereg

__all__ = [
    "RotCurve",
    "QuatCurve",
    "Warp",
    "AlignOptions",
    "pem",
    "spatial_align",
    "temporal_align",
    "sample_align",
    "make_model",
    "sample_gp",
    "PermutationPlan",
    "TestReport",
    "test_no_action",
    "test_prereg",
    "test_continual",
]
__version__ = "0.1.0"
