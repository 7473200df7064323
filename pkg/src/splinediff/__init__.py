"""Streaming Tikhonov-regularized cubic-spline fitting for noisy scattered data.

Reconstructs a function on [0, 1] and its derivative from samples
``y_i = f(x_i) + noise`` with constant work per sample, and flags the
subintervals where the reconstruction can be trusted.
"""

from .banded import BandedSymMatrix, NotPositiveDefinite, axpy_banded, cholesky_solve
from .bspline import DesignRow, SplineBasis, penalty_matrix, phi3, phi3_d1, phi3_d2
from .estimator import (
    CorruptPayload,
    DegenerateDesign,
    EmptyState,
    EstimatorState,
    SplineFit,
    VersionMismatch,
    checkpoint,
    new_state,
    restore,
)
from .indicator import HistogramIndicator, ReliableRegion, bin_index, reliable_regions

__all__ = [
    "BandedSymMatrix",
    "CorruptPayload",
    "DegenerateDesign",
    "DesignRow",
    "EmptyState",
    "EstimatorState",
    "HistogramIndicator",
    "NotPositiveDefinite",
    "ReliableRegion",
    "SplineBasis",
    "SplineFit",
    "VersionMismatch",
    "axpy_banded",
    "bin_index",
    "checkpoint",
    "cholesky_solve",
    "new_state",
    "penalty_matrix",
    "phi3",
    "phi3_d1",
    "phi3_d2",
    "reliable_regions",
    "restore",
]

__version__ = "0.1.0"
