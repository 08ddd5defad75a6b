"""Lane grids, polar anchors, and the local/global polar transforms.

External I/O uses image coordinates (y grows downward).  All polar math runs
in a Cartesian frame with the y-axis flipped to grow upward; the polar axis is
the positive x-axis.  ``image_to_cart`` / ``cart_to_image`` are the single
place the flip happens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidK, InvalidLane, NearHorizontalAnchor, ShapeError

# Guard for the 1/cos(theta) in anchor sampling; theta is open-interval
# (-pi/2, pi/2) but nothing in the math bounds it away from the endpoints.
EPS_ANGLE = 1e-6

# Polyline vertices within this many pixels of a grid row are snapped onto
# the row, so serialized lanes survive a write/read cycle bit-exactly.
ROW_MATCH_TOL = 1e-6


@dataclass(frozen=True)
class ImageFrame:
    """Working image geometry: pixel size plus the fixed y-sampling grid.

    Rows sit at y_i = i * height / n_rows for i = 1..n_rows, stored top-down
    in image coordinates.
    """

    width: int
    height: int
    n_rows: int = 36

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.n_rows < 2:
            raise ValueError("frame needs at least two sample rows")

    @property
    def row_step(self) -> float:
        return self.height / self.n_rows

    @cached_property
    def rows_y(self) -> np.ndarray:
        """Grid row y-coordinates, image frame (top-down)."""
        y = np.arange(1, self.n_rows + 1, dtype=float) * self.row_step
        y.setflags(write=False)
        return y

    @cached_property
    def rows_y_cart(self) -> np.ndarray:
        """Grid row y-coordinates in the Cartesian frame (bottom-up)."""
        y = self.height - self.rows_y
        y.setflags(write=False)
        return y


def image_to_cart(frame: ImageFrame, points):
    """Flip y between image (top-down) and Cartesian (bottom-up) coordinates.

    Accepts a single (x, y) pair or an (..., 2) array; x is unchanged.
    """
    pts = np.asarray(points, dtype=float)
    out = pts.copy()
    out[..., 1] = frame.height - pts[..., 1]
    return out


def cart_to_image(frame: ImageFrame, points):
    """Inverse of :func:`image_to_cart` (the flip is an involution)."""
    return image_to_cart(frame, points)


@dataclass(frozen=True, eq=False)
class LaneGrid:
    """A lane as x-coordinates over the frame's fixed y-grid.

    ``xs`` has length ``frame.n_rows``; entries outside the inclusive
    ``valid = (lo, hi)`` row range are undefined and stored as NaN.
    Instances are immutable and safe to share across threads.
    """

    xs: np.ndarray
    valid: tuple[int, int]
    frame: ImageFrame

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        lo, hi = int(self.valid[0]), int(self.valid[1])
        if xs.shape != (self.frame.n_rows,):
            raise InvalidLane(
                f"xs must have length {self.frame.n_rows}, got shape {xs.shape}"
            )
        if not (0 <= lo <= hi < self.frame.n_rows):
            raise InvalidLane(f"valid range ({lo}, {hi}) out of bounds")
        if not np.all(np.isfinite(xs[lo : hi + 1])):
            raise InvalidLane("xs must be finite on the valid range")
        xs[:lo] = np.nan
        xs[hi + 1 :] = np.nan
        xs.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "valid", (lo, hi))

    @property
    def lo(self) -> int:
        return self.valid[0]

    @property
    def hi(self) -> int:
        return self.valid[1]

    @property
    def n_valid(self) -> int:
        return self.hi - self.lo + 1

    def valid_mask(self) -> np.ndarray:
        mask = np.zeros(self.frame.n_rows, dtype=bool)
        mask[self.lo : self.hi + 1] = True
        return mask

    def points_image(self) -> np.ndarray:
        """(n_valid, 2) array of (x, y) vertices in image coordinates."""
        rows = self.frame.rows_y[self.lo : self.hi + 1]
        return np.column_stack([self.xs[self.lo : self.hi + 1], rows])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaneGrid):
            return NotImplemented
        return (
            self.frame == other.frame
            and self.valid == other.valid
            and np.array_equal(self.xs, other.xs, equal_nan=True)
        )


@dataclass(frozen=True)
class Pole:
    """Polar origin. ``x``/``y`` are Cartesian pixels (y grows upward)."""

    x: float
    y: float
    kind: str  # "local" | "global"

    def __post_init__(self):
        if self.kind not in ("local", "global"):
            raise ValueError(f"pole kind must be 'local' or 'global', got {self.kind!r}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("pole position must be finite")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class PolarAnchor:
    """A line anchor (theta, radius) with respect to a pole.

    theta is the counterclockwise angle from the polar axis to the line's
    normal, restricted to (-pi/2, pi/2); radius may be any real number.
    """

    theta: float
    radius: float
    pole: Pole

    def __post_init__(self):
        if not math.isfinite(self.radius):
            raise ValueError("anchor radius must be finite")
        if not math.isfinite(self.theta) or abs(self.theta) >= math.pi / 2:
            raise NearHorizontalAnchor(f"theta {self.theta!r} outside (-pi/2, pi/2)")
        if abs(math.cos(self.theta)) <= EPS_ANGLE:
            raise NearHorizontalAnchor(f"cos(theta) below {EPS_ANGLE} for theta={self.theta}")

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])


@dataclass(frozen=True)
class LpmConfig:
    """Local-pole grid shape, positive-radius threshold, and top-K count."""

    grid_rows: int
    grid_cols: int
    lambda_l: float  # no blessed default; must be chosen per deployment
    top_k: int

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ValueError("pole grid must be at least 1x1")
        if self.lambda_l <= 0:
            raise ValueError("lambda_l must be positive")
        if not (1 <= self.top_k <= self.grid_rows * self.grid_cols):
            raise InvalidK(
                f"top_k {self.top_k} must be in [1, {self.grid_rows * self.grid_cols}]"
            )


@dataclass(frozen=True, eq=False)
class PoleGridLabels:
    """Per-pole regression and classification targets on an (H, W) pole grid.

    ``r_hat`` is the minimum distance from each pole to any lane polyline
    (+inf when there are no lanes), ``theta_hat`` the angle of the vector
    pole -> nearest point against the polar axis (Cartesian frame), and
    ``s_hat`` is True exactly where r_hat < lambda_l (strict).
    """

    r_hat: np.ndarray
    theta_hat: np.ndarray
    s_hat: np.ndarray

    def __post_init__(self):
        if not (self.r_hat.shape == self.theta_hat.shape == self.s_hat.shape):
            raise ShapeError("label arrays must share one (H, W) shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.r_hat.shape


def polyline_to_grid(points, frame: ImageFrame) -> LaneGrid:
    """Resample an ordered polyline (image coordinates) onto the fixed y-grid.

    x is linearly interpolated at each grid row inside the polyline's y-span;
    the valid range is the set of covered rows.  Vertices within
    ``ROW_MATCH_TOL`` of a grid row are copied exactly.

    Raises:
        InvalidLane: fewer than 2 points, non-monotonic y after sorting,
            y-span shorter than one grid step, or < 2 covered rows.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise InvalidLane("polyline needs at least two (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise InvalidLane("polyline coordinates must be finite")
    pts = pts[np.argsort(pts[:, 1], kind="stable")]
    xs_in, ys_in = pts[:, 0], pts[:, 1]
    if np.any(np.diff(ys_in) <= 0):
        raise InvalidLane("polyline y-coordinates must be strictly monotonic")
    if ys_in[-1] - ys_in[0] < frame.row_step:
        raise InvalidLane("polyline y-span shorter than one grid step")

    rows = frame.rows_y
    covered = (rows >= ys_in[0] - ROW_MATCH_TOL) & (rows <= ys_in[-1] + ROW_MATCH_TOL)
    idx = np.flatnonzero(covered)
    if idx.size < 2:
        raise InvalidLane("polyline covers fewer than two grid rows")
    lo, hi = int(idx[0]), int(idx[-1])

    sel = rows[lo : hi + 1]
    xs = np.full(frame.n_rows, np.nan)
    xs[lo : hi + 1] = np.interp(sel, ys_in, xs_in)

    # Snap rows that coincide with a vertex so x is copied, not interpolated.
    pos = np.searchsorted(ys_in, sel)
    for k in range(sel.size):
        for j in (pos[k] - 1, pos[k]):
            if 0 <= j < ys_in.size and abs(ys_in[j] - sel[k]) <= ROW_MATCH_TOL:
                xs[lo + k] = xs_in[j]
                break
    return LaneGrid(xs=xs, valid=(lo, hi), frame=frame)


def local_to_global_radius(anchor: PolarAnchor, global_pole: Pole) -> PolarAnchor:
    """Re-express a local-pole anchor against the global pole.

    theta is unchanged (the two systems share the polar axis); the returned
    radius is the signed perpendicular distance from the global pole to the
    anchor line, measured along the normal (cos theta, sin theta).
    """
    if anchor.pole.kind != "local":
        raise ValueError("anchor must be expressed against a local pole")
    if global_pole.kind != "global":
        raise ValueError("target pole must be global")
    r_g = local_to_global_radius_batch(
        anchor.theta, anchor.radius, anchor.pole.position, global_pole
    )
    return PolarAnchor(theta=anchor.theta, radius=float(r_g), pole=global_pole)


def local_to_global_radius_batch(thetas, radii, pole_xy, global_pole: Pole) -> np.ndarray:
    """Vectorized radius transform: r_g = r_l + n . (c_l - c_g).

    ``pole_xy`` is an (..., 2) array of Cartesian local-pole positions
    broadcastable against ``thetas``/``radii``.
    """
    thetas = np.asarray(thetas, dtype=float)
    radii = np.asarray(radii, dtype=float)
    pole_xy = np.asarray(pole_xy, dtype=float)
    delta = pole_xy - global_pole.position
    return radii + np.cos(thetas) * delta[..., 0] + np.sin(thetas) * delta[..., 1]


def sample_anchor_xs(anchor: PolarAnchor, frame: ImageFrame) -> np.ndarray:
    """x-coordinates of the anchor line at every grid row.

    Row i's point is (x_i, y_i) with y_i taken from the Cartesian grid; each
    point satisfies cos(t)*(x - c_x) + sin(t)*(y - c_y) = r.
    """
    return sample_anchor_xs_batch(anchor.theta, anchor.radius, anchor.pole, frame)


def sample_anchor_xs_batch(thetas, radii, pole: Pole, frame: ImageFrame) -> np.ndarray:
    """Vectorized anchor sampling; returns shape ``thetas.shape + (n_rows,)``.

    Raises:
        NearHorizontalAnchor: any |cos(theta)| <= EPS_ANGLE.
    """
    thetas = np.asarray(thetas, dtype=float)
    radii = np.asarray(radii, dtype=float)
    cos_t = np.cos(thetas)
    if np.any(np.abs(cos_t) <= EPS_ANGLE):
        raise NearHorizontalAnchor("anchor too close to horizontal to sample x(y)")
    y = frame.rows_y_cart
    intercept = (radii + cos_t * pole.x + np.sin(thetas) * pole.y) / cos_t
    return -np.multiply.outer(np.tan(thetas), y) + intercept[..., None]


def local_pole_lattice(frame: ImageFrame, grid_rows: int, grid_cols: int) -> list[Pole]:
    """Local poles at the cell centers of a uniform grid over the image.

    Row-major order, row 0 at the image top; positions are Cartesian.
    """
    poles = []
    for a in range(grid_rows):
        y_img = (a + 0.5) * frame.height / grid_rows
        for b in range(grid_cols):
            x = (b + 0.5) * frame.width / grid_cols
            poles.append(Pole(x=x, y=frame.height - y_img, kind="local"))
    return poles


def lpm_labels(gt_lanes: list[LaneGrid], pole_grid: list[Pole], cfg: LpmConfig) -> PoleGridLabels:
    """Ground-truth (r_hat, theta_hat, s_hat) for every local pole.

    r_hat is the true minimum point-to-polyline distance over all lanes
    (segment interiors included); theta_hat is the orientation of the vector
    from the pole to the nearest curve point, measured against the polar axis
    in the Cartesian frame.  Ties go to the smaller lane index.  With no
    lanes: r_hat = +inf, theta_hat = 0, s_hat all False.
    """
    n_poles = cfg.grid_rows * cfg.grid_cols
    if len(pole_grid) != n_poles:
        raise ShapeError(f"expected {n_poles} poles, got {len(pole_grid)}")

    shape = (cfg.grid_rows, cfg.grid_cols)
    best_d = np.full(n_poles, np.inf)
    best_theta = np.zeros(n_poles)
    if not gt_lanes:
        return PoleGridLabels(
            r_hat=best_d.reshape(shape),
            theta_hat=best_theta.reshape(shape),
            s_hat=np.zeros(shape, dtype=bool),
        )

    # Distances are Euclidean, so compute in image coordinates and only flip
    # the y-component of the radius vector when taking the angle.
    frame = gt_lanes[0].frame
    if any(lane.frame != frame for lane in gt_lanes):
        raise ShapeError("all ground-truth lanes must share one frame")
    poles_img = np.array([[p.x, frame.height - p.y] for p in pole_grid])
    for lane in gt_lanes:
        pts = lane.points_image()
        a, b = pts[:-1], pts[1:]
        ab = b - a
        ab_len2 = np.einsum("ij,ij->i", ab, ab)
        # (P, S) projection parameter, clamped onto each segment
        ap = poles_img[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("psj,sj->ps", ap, ab) / ab_len2[None, :], 0.0, 1.0)
        nearest = a[None, :, :] + t[..., None] * ab[None, :, :]
        diff = nearest - poles_img[:, None, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        seg = np.argmin(d, axis=1)
        d_min = d[np.arange(n_poles), seg]
        improved = d_min < best_d
        if np.any(improved):
            v = diff[np.arange(n_poles), seg]
            # flip y (image -> Cartesian); + 0.0 turns -0.0 into +0.0 so a
            # purely horizontal vector gets the +pi branch deterministically
            theta = np.arctan2(-v[:, 1] + 0.0, v[:, 0])
            best_theta = np.where(improved, theta, best_theta)
            best_d = np.where(improved, d_min, best_d)

    return PoleGridLabels(
        r_hat=best_d.reshape(shape),
        theta_hat=best_theta.reshape(shape),
        s_hat=(best_d < cfg.lambda_l).reshape(shape),
    )


def top_k_select(scores, k: int) -> np.ndarray:
    """Indices of the k largest scores, descending; ties prefer lower index."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1:
        raise ShapeError("scores must be one-dimensional")
    if not (0 <= k <= scores.size):
        raise InvalidK(f"k {k} must be in [0, {scores.size}]")
    return np.argsort(-scores, kind="stable")[:k]
