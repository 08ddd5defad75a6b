"""Deterministic forward pass of the one-to-one scoring head.

The head refines per-candidate RoI features through a directed graph whose
edges come from the same confidence/geometric adjacency used by suppression:
an edge tensor encodes pairwise semantic distance, a masked column-wise max
pool keeps each candidate's strongest potential suppressor, and a small MLP
with a terminal sigmoid emits the one-to-one score.  Weights are supplied
externally (seeded or loaded); nothing here trains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ShapeError
from .suppression import SuppressionThresholds, confidence_adjacency, geometric_adjacency

MlpLayers = tuple[tuple[np.ndarray, np.ndarray], ...]

_WEIGHTS_VERSION = 1


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True, eq=False)
class HeadWeights:
    """All trainable tensors of the head, wired as:

    level aggregation (3, N) -> pooling (d_r, N*C_f) -> shared RoI transform
    (d_r, d_r) -> in/out edge maps (d_n, d_r) + x-difference map (d_n, N) ->
    2-layer edge MLP (d_n -> d_n) -> 3-layer node MLP (d_n -> 1, sigmoid).
    """

    level_weights: np.ndarray
    pool_matrix: np.ndarray
    roi_matrix: np.ndarray
    roi_bias: np.ndarray
    in_matrix: np.ndarray
    out_matrix: np.ndarray
    sample_matrix: np.ndarray
    sample_bias: np.ndarray
    edge_mlp: MlpLayers
    node_mlp: MlpLayers

    def __post_init__(self):
        lw = self.level_weights
        if lw.ndim != 2 or lw.shape[0] != 3:
            raise ShapeError("level_weights must have shape (3, N)")
        n = lw.shape[1]
        d_r = self.pool_matrix.shape[0]
        if self.pool_matrix.ndim != 2 or self.pool_matrix.shape[1] % n != 0:
            raise ShapeError("pool_matrix must have shape (d_r, N * C_f)")
        if self.roi_matrix.shape != (d_r, d_r) or self.roi_bias.shape != (d_r,):
            raise ShapeError("roi transform must map d_r -> d_r")
        d_n = self.in_matrix.shape[0]
        if self.in_matrix.shape != (d_n, d_r) or self.out_matrix.shape != (d_n, d_r):
            raise ShapeError("in/out matrices must have shape (d_n, d_r)")
        if self.sample_matrix.shape != (d_n, n) or self.sample_bias.shape != (d_n,):
            raise ShapeError("sample map must have shape (d_n, N) with bias (d_n,)")
        if len(self.edge_mlp) != 2:
            raise ShapeError("edge MLP must have exactly 2 layers")
        if len(self.node_mlp) != 3:
            raise ShapeError("node MLP must have exactly 3 layers")
        dim = d_n
        for w, b in self.edge_mlp:
            if w.ndim != 2 or w.shape[1] != dim or b.shape != (w.shape[0],):
                raise ShapeError("edge MLP layer shapes are inconsistent")
            dim = w.shape[0]
        if dim != d_n:
            raise ShapeError("edge MLP must end in dimension d_n")
        for w, b in self.node_mlp:
            if w.ndim != 2 or w.shape[1] != dim or b.shape != (w.shape[0],):
                raise ShapeError("node MLP layer shapes are inconsistent")
            dim = w.shape[0]
        if dim != 1:
            raise ShapeError("node MLP must end in a single score unit")

    @property
    def n_rows(self) -> int:
        return self.level_weights.shape[1]

    @property
    def c_f(self) -> int:
        return self.pool_matrix.shape[1] // self.n_rows

    @property
    def d_r(self) -> int:
        return self.pool_matrix.shape[0]

    @property
    def d_n(self) -> int:
        return self.in_matrix.shape[0]

    @classmethod
    def seeded(cls, n_rows: int, c_f: int, d_r: int, d_n: int, seed: int) -> "HeadWeights":
        """Reproducible uniform [-0.1, 0.1] init for structure-level runs."""
        rng = np.random.default_rng(seed)

        def u(*shape):
            return rng.uniform(-0.1, 0.1, size=shape)

        return cls(
            level_weights=u(3, n_rows),
            pool_matrix=u(d_r, n_rows * c_f),
            roi_matrix=u(d_r, d_r),
            roi_bias=u(d_r),
            in_matrix=u(d_n, d_r),
            out_matrix=u(d_n, d_r),
            sample_matrix=u(d_n, n_rows),
            sample_bias=u(d_n),
            edge_mlp=((u(d_n, d_n), u(d_n)), (u(d_n, d_n), u(d_n))),
            node_mlp=((u(d_n, d_n), u(d_n)), (u(d_n, d_n), u(d_n)), (u(1, d_n), u(1))),
        )

    def to_json_dict(self) -> dict:
        def tag(a: np.ndarray) -> dict:
            return {"shape": list(a.shape), "data": np.asarray(a, dtype=float).ravel().tolist()}

        def tag_mlp(layers: MlpLayers) -> list:
            return [{"w": tag(w), "b": tag(b)} for w, b in layers]

        return {
            "version": _WEIGHTS_VERSION,
            "level_weights": tag(self.level_weights),
            "pool_matrix": tag(self.pool_matrix),
            "roi_matrix": tag(self.roi_matrix),
            "roi_bias": tag(self.roi_bias),
            "in_matrix": tag(self.in_matrix),
            "out_matrix": tag(self.out_matrix),
            "sample_matrix": tag(self.sample_matrix),
            "sample_bias": tag(self.sample_bias),
            "edge_mlp": tag_mlp(self.edge_mlp),
            "node_mlp": tag_mlp(self.node_mlp),
        }

    @classmethod
    def from_json_dict(cls, blob: dict, path: str | None = None) -> "HeadWeights":
        def untag(entry, field: str) -> np.ndarray:
            try:
                shape = tuple(int(s) for s in entry["shape"])
                return np.array(entry["data"], dtype=float).reshape(shape)
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad shape-tagged array: {exc}", path=path, field=field)

        def untag_mlp(entries, field: str) -> MlpLayers:
            return tuple(
                (untag(e["w"], f"{field}[{i}].w"), untag(e["b"], f"{field}[{i}].b"))
                for i, e in enumerate(entries)
            )

        if blob.get("version") != _WEIGHTS_VERSION:
            raise ParseError(f"unsupported weights version {blob.get('version')!r}", path=path)
        try:
            return cls(
                level_weights=untag(blob["level_weights"], "level_weights"),
                pool_matrix=untag(blob["pool_matrix"], "pool_matrix"),
                roi_matrix=untag(blob["roi_matrix"], "roi_matrix"),
                roi_bias=untag(blob["roi_bias"], "roi_bias"),
                in_matrix=untag(blob["in_matrix"], "in_matrix"),
                out_matrix=untag(blob["out_matrix"], "out_matrix"),
                sample_matrix=untag(blob["sample_matrix"], "sample_matrix"),
                sample_bias=untag(blob["sample_bias"], "sample_bias"),
                edge_mlp=untag_mlp(blob["edge_mlp"], "edge_mlp"),
                node_mlp=untag_mlp(blob["node_mlp"], "node_mlp"),
            )
        except KeyError as exc:
            raise ParseError(f"missing key {exc}", path=path)


def save_weights(weights: HeadWeights, path) -> None:
    Path(path).write_text(json.dumps(weights.to_json_dict(), sort_keys=True))


def load_weights(path) -> HeadWeights:
    try:
        blob = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=str(path))
    return HeadWeights.from_json_dict(blob, path=str(path))


@dataclass(frozen=True, eq=False)
class PooledFeatures:
    """Per-candidate RoI vectors plus the anchor x-samples the edges use."""

    rois: np.ndarray       # (K, d_r)
    anchor_xs: np.ndarray  # (K, N)


def aggregate_levels(level_feats, level_weights) -> np.ndarray:
    """Convex per-row combination of three feature levels.

    ``level_feats`` is (..., 3, N, C_f); the softmax over the level axis of
    ``level_weights`` (3, N) makes each sample row a convex combination.
    """
    feats = np.asarray(level_feats, dtype=float)
    w = np.asarray(level_weights, dtype=float)
    if feats.shape[-3] != 3 or w.shape != (3, feats.shape[-2]):
        raise ShapeError("level_feats must be (..., 3, N, C_f) with weights (3, N)")
    e = np.exp(w - w.max(axis=0, keepdims=True))
    soft = e / e.sum(axis=0, keepdims=True)
    return np.sum(feats * soft[..., :, :, None], axis=-3)


def roi_project(aggregated, pool_matrix) -> np.ndarray:
    """Flatten (..., N, C_f) and apply the pooling projection (linear)."""
    agg = np.asarray(aggregated, dtype=float)
    pool = np.asarray(pool_matrix, dtype=float)
    flat = agg.reshape(*agg.shape[:-2], agg.shape[-2] * agg.shape[-1])
    if flat.shape[-1] != pool.shape[1]:
        raise ShapeError(
            f"pool_matrix expects {pool.shape[1]} inputs, got {flat.shape[-1]}"
        )
    return flat @ pool.T


def _mlp(x: np.ndarray, layers: MlpLayers, sigmoid_out: bool) -> np.ndarray:
    for i, (w, b) in enumerate(layers):
        x = x @ w.T + b
        if i < len(layers) - 1:
            x = _relu(x)
    return _sigmoid(x) if sigmoid_out else x


def edge_tensor(rois, anchor_xs, weights: HeadWeights) -> np.ndarray:
    """(K, K, d_n) semantic-distance tensor; entry (i, j) reads "i vs j".

    D_edge[i, j] = MLP_edge(W_in F_j - W_out F_i + W_s (x_j - x_i) + b_s)
    with F the ReLU-transformed RoI features.  Entry (i, j) depends only on
    candidates i and j.
    """
    rois = np.asarray(rois, dtype=float)
    xs = np.asarray(anchor_xs, dtype=float)
    k = rois.shape[0]
    if rois.ndim != 2 or rois.shape[1] != weights.d_r:
        raise ShapeError(f"rois must have shape (K, {weights.d_r})")
    if xs.shape != (k, weights.n_rows):
        raise ShapeError(f"anchor_xs must have shape ({k}, {weights.n_rows})")
    f_hat = _relu(rois @ weights.roi_matrix.T + weights.roi_bias)
    f_in = f_hat @ weights.in_matrix.T
    f_out = f_hat @ weights.out_matrix.T
    sx = xs @ weights.sample_matrix.T
    pre = (
        f_in[None, :, :]
        - f_out[:, None, :]
        + sx[None, :, :]
        - sx[:, None, :]
        + weights.sample_bias
    )
    return _mlp(pre, weights.edge_mlp, sigmoid_out=False)


def masked_max_pool(edge, adjacency) -> np.ndarray:
    """Element-wise max over each column's in-edges; empty columns pool zeros."""
    e = np.asarray(edge, dtype=float)
    a = np.asarray(adjacency, dtype=bool)
    if e.ndim != 3 or a.shape != e.shape[:2] or e.shape[0] != e.shape[1]:
        raise ShapeError("edge must be (K, K, d_n) with adjacency (K, K)")
    masked = np.where(a[:, :, None], e, -np.inf)
    pooled = masked.max(axis=0)
    has_edge = a.any(axis=0)
    pooled[~has_edge] = 0.0
    return pooled


def node_scores(pooled, node_mlp: MlpLayers) -> np.ndarray:
    """(K,) scores in (0, 1) from the 3-layer node MLP with sigmoid output."""
    p = np.asarray(pooled, dtype=float)
    if p.ndim != 2 or p.shape[1] != node_mlp[0][0].shape[1]:
        raise ShapeError("pooled features do not match the node MLP input size")
    return _mlp(p, node_mlp, sigmoid_out=True)[:, 0]


def head_forward(
    level_feats,
    scores_o2m,
    thetas,
    radii,
    anchor_xs,
    thresholds: SuppressionThresholds,
    weights: HeadWeights,
) -> tuple[PooledFeatures, np.ndarray]:
    """Full head pass: features -> RoI -> adjacency -> edges -> pool -> scores.

    Args:
        level_feats: (K, 3, N, C_f) per-candidate, per-level point features.
        scores_o2m: (K,) confidence scores driving the adjacency direction.
        thetas, radii: (K,) global-polar anchor parameters.
        anchor_xs: (K, N) raw anchor x-samples (pre-regression).

    Returns:
        (PooledFeatures, scores_o2o) with scores of shape (K,).
    """
    feats = np.asarray(level_feats, dtype=float)
    k = feats.shape[0]
    if feats.ndim != 4 or feats.shape[1] != 3 or feats.shape[2] != weights.n_rows \
            or feats.shape[3] != weights.c_f:
        raise ShapeError(
            f"level_feats must have shape (K, 3, {weights.n_rows}, {weights.c_f})"
        )
    scores_o2m = np.asarray(scores_o2m, dtype=float)
    if scores_o2m.shape != (k,):
        raise ShapeError("scores_o2m must have shape (K,)")
    rois = roi_project(aggregate_levels(feats, weights.level_weights), weights.pool_matrix)
    adjacency = confidence_adjacency(scores_o2m) & geometric_adjacency(thetas, radii, thresholds)
    edges = edge_tensor(rois, anchor_xs, weights)
    pooled = masked_max_pool(edges, adjacency)
    scores = node_scores(pooled, weights.node_mlp)
    return PooledFeatures(rois=rois, anchor_xs=np.asarray(anchor_xs, float)), scores
