import numpy as np
import pytest

from polar_kit import ImageFrame, LaneGrid


@pytest.fixture
def frame():
    return ImageFrame(width=800, height=320, n_rows=36)


@pytest.fixture
def vertical_lane(frame):
    def make(x, lo=0, hi=None):
        hi = frame.n_rows - 1 if hi is None else hi
        xs = np.full(frame.n_rows, float(x))
        return LaneGrid(xs=xs, valid=(lo, hi), frame=frame)

    return make
