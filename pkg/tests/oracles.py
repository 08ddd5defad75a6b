"""Independent reference implementations used as test oracles.

These stay deliberately naive (row loops, permutation search, explicit
geometry) and never call the code paths they check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def boundaries_oracle(lane, w_base):
    """Per-row (left, right) intervals via explicit difference stencils."""
    lo, hi = lane.valid
    ys = lane.frame.rows_y
    left = {}
    right = {}
    for i in range(lo, hi + 1):
        if i == lo:
            dx, dy = lane.xs[i + 1] - lane.xs[i], ys[i + 1] - ys[i]
        elif i == hi:
            dx, dy = lane.xs[i] - lane.xs[i - 1], ys[i] - ys[i - 1]
        else:
            dx, dy = lane.xs[i + 1] - lane.xs[i - 1], ys[i + 1] - ys[i - 1]
        w = math.hypot(dx, dy) / dy * w_base
        left[i], right[i] = lane.xs[i] - w, lane.xs[i] + w
    return left, right


def interval_iou_oracle(p, q, w_base, g=0.0):
    """Row-by-row interval IoU between two lanes."""
    lp, rp = boundaries_oracle(p, w_base)
    lq, rq = boundaries_oracle(q, w_base)
    overlap = gap = union = 0.0
    for i in range(p.frame.n_rows):
        in_p, in_q = i in lp, i in lq
        if in_p and in_q:
            overlap += max(min(rp[i], rq[i]) - max(lp[i], lq[i]), 0.0)
            gap += max(max(lp[i], lq[i]) - min(rp[i], rq[i]), 0.0)
            union += max(rp[i], rq[i]) - min(lp[i], lq[i])
        elif in_p:
            union += rp[i] - lp[i]
        elif in_q:
            union += rq[i] - lq[i]
    return overlap / union - g * gap / union


def line_points(theta, radius, pole_xy, y_values):
    """Explicit points of the line {p : n . (p - pole) = r} at given Cartesian ys."""
    n = np.array([math.cos(theta), math.sin(theta)])
    p0 = np.asarray(pole_xy, dtype=float) + radius * n
    direction = np.array([-math.sin(theta), math.cos(theta)])
    # direction[1] = cos(theta) > 0 for theta in (-pi/2, pi/2)
    ts = (np.asarray(y_values, dtype=float) - p0[1]) / direction[1]
    return p0[None, :] + ts[:, None] * direction[None, :]


def signed_point_line_distance(theta, radius, pole_xy, point_xy):
    """Signed distance from a point to the (theta, r, pole) line along the normal.

    Built from two explicit on-line points, not from the radius formula.
    """
    pts = line_points(theta, radius, pole_xy, np.array([0.0, 100.0]))
    a, b = pts[0], pts[1]
    u = b - a
    w = np.asarray(point_xy, dtype=float) - a
    # With u along (-sin t, cos t), cross(u, w)/|u| equals n . (a - point),
    # the anchor-normal distance from the point to the line.
    cross = u[0] * w[1] - u[1] * w[0]
    return cross / math.hypot(u[0], u[1])


def reference_fast_nms(scores, dist, tau_d, tau_o2m):
    """Sort-based Fast NMS: triangular suppression after ordering by score.

    Ties order by higher original index first, matching the confidence
    adjacency convention.  Returns a sorted index array.
    """
    scores = np.asarray(scores, dtype=float)
    k = scores.size
    order = sorted(range(k), key=lambda i: (-scores[i], -i))
    keep = []
    for pos, j in enumerate(order):
        suppressed = False
        for i in order[:pos]:
            d = dist[i, j]
            inv = math.inf if d == 0 else 1.0 / d
            if inv >= 1.0 / tau_d:
                suppressed = True
                break
        if not suppressed and scores[j] > tau_o2m:
            keep.append(j)
    return np.array(sorted(keep), dtype=int)


def brute_force_o2o(cost):
    """Exhaustive max-affinity injective assignment; returns (pi, best_total)."""
    g, k = cost.shape
    best_total = -math.inf
    best_pi = None
    for perm in itertools.permutations(range(k), g):
        total = sum(cost[q, perm[q]] for q in range(g))
        if total > best_total:
            best_total = total
            best_pi = perm
    return np.array(best_pi, dtype=int), best_total


def brute_force_matching(iou, threshold):
    """Lexicographic-optimal bipartite matching: max pair count, then max IoU.

    iou is (G, K); returns (count, total_iou) of the optimum.
    """
    g, k = iou.shape
    best = (0, 0.0)
    gts = list(range(g))
    for size in range(min(g, k), -1, -1):
        found = False
        for q_subset in itertools.combinations(gts, size):
            for p_perm in itertools.permutations(range(k), size):
                if all(iou[q, p] >= threshold for q, p in zip(q_subset, p_perm)):
                    found = True
                    total = sum(iou[q, p] for q, p in zip(q_subset, p_perm))
                    if (size, total) > best:
                        best = (size, total)
        if found:
            break  # larger counts already explored; count dominates
    return best
