"""Default hyperparameters and preset factories.

Values marked "sparse"/"dense" mirror the two published evaluation regimes;
everything is overridable at call sites.
"""

from __future__ import annotations

from .geometry import ImageFrame, Pole
from .suppression import SuppressionThresholds

# Working resolution and vertical sampling.
DEFAULT_WIDTH = 800
DEFAULT_HEIGHT = 320
DEFAULT_SAMPLE_ROWS = 36
DEFAULT_REGRESSION_ROWS = 72  # finer grid used by full-scale regression heads

# Interval IoU base semi-width (30 px total lane width at 800x320).
DEFAULT_W_BASE = 15.0

# Local-pole grids and anchor counts per regime.
SPARSE_GRID = (4, 10)
SPARSE_TOP_K = 20
DENSE_GRID = (6, 13)
DENSE_TOP_K = 50

# Confidence thresholds for dual selection.
DEFAULT_TAU_O2M = 0.48
DEFAULT_TAU_O2O = 0.46

# Edge-feature dimension of the one-to-one head.
DEFAULT_D_N = 5

# Assignment cost exponent and SimOTA caps.
DEFAULT_BETA = 6.0
DEFAULT_K_DYNAMIC = 4
DEFAULT_TOPK_FOR_DYNAMIC = 10

# Loss weights (the two published ones; the rest default to 1.0).
DEFAULT_W_AUX = 0.2
DEFAULT_W_RANK = 0.7

# Width presets for the classic-NMS distance function: the conservative
# default and the aggressive-recall setting, in pixels of semi-width.
NMS_WIDTH_DEFAULT_PX = 50.0
NMS_WIDTH_OPTIMAL_PX = 15.0

# Suppression thresholds with no published values; chosen for the synthetic
# harness and overridable everywhere.
DEFAULT_TAU_D = 0.5       # on d = 1 - IoU, i.e. suppress at IoU >= 0.5
DEFAULT_TAU_THETA = 0.15  # radians
DEFAULT_LAMBDA_G = 40.0   # pixels

# Global pole placement as a fraction of (width, height), image coordinates.
GLOBAL_POLE_FRAC = (0.5, 0.4)


def default_frame(n_rows: int = DEFAULT_SAMPLE_ROWS) -> ImageFrame:
    return ImageFrame(width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT, n_rows=n_rows)


def default_global_pole(frame: ImageFrame) -> Pole:
    """Global pole near the static vanishing point, returned in Cartesian."""
    x = GLOBAL_POLE_FRAC[0] * frame.width
    y_img = GLOBAL_POLE_FRAC[1] * frame.height
    return Pole(x=x, y=frame.height - y_img, kind="global")


def default_thresholds(
    tau_o2m: float = DEFAULT_TAU_O2M, tau_o2o: float = DEFAULT_TAU_O2O
) -> SuppressionThresholds:
    return SuppressionThresholds(
        tau_theta=DEFAULT_TAU_THETA,
        lambda_g=DEFAULT_LAMBDA_G,
        tau_d=DEFAULT_TAU_D,
        tau_o2m=tau_o2m,
        tau_o2o=tau_o2o,
    )
