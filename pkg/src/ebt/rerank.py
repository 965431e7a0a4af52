"""Instance-specific re-ranking of the objectness pool.

Each candidate box is described by 10 objectness scores over a fixed
Haar-wavelet-style partition (full box, 4 halves, 4 quadrants, centered
half-size box); an online linear SVM orders the pool and keeps the top H.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .edgebox import EdgeStructures, Proposal, score_windows
from .geometry import Box, iou

FEATURE_DIM = 10
UPDATE_PERIOD = 5  # frames between model refreshes
LAMBDA = 1e-3
EPOCHS = 3
NEGATIVE_IOU = 0.5


@dataclass
class RerankModel:
    weights: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    bias: float = 0.0
    norm_mean: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    norm_scale: np.ndarray = field(default_factory=lambda: np.ones(FEATURE_DIM))
    initialized: bool = False
    epoch_objectives: list[float] = field(default_factory=list)


def _partition(b: Box) -> np.ndarray:
    """The fixed 10 sub-windows of a box, as an (10, 4) array."""
    x, y, w, h = b.x, b.y, b.w, b.h
    hw, hh = w / 2.0, h / 2.0
    return np.array(
        [
            (x, y, w, h),  # full
            (x, y, hw, h),  # left half
            (x + hw, y, hw, h),  # right half
            (x, y, w, hh),  # top half
            (x, y + hh, w, hh),  # bottom half
            (x, y, hw, hh),  # quadrants
            (x + hw, y, hw, hh),
            (x, y + hh, hw, hh),
            (x + hw, y + hh, hw, hh),
            (x + w / 4.0, y + h / 4.0, hw, hh),  # centered half-size
        ]
    )


def rerank_feature(b: Box, structures: EdgeStructures) -> np.ndarray:
    """10-D vector of objectness scores over the fixed partition of b."""
    return score_windows(structures, _partition(b))


def rerank_features(boxes: list[Box], structures: EdgeStructures) -> np.ndarray:
    """Batch variant: (N, 10) feature matrix for N boxes."""
    if not boxes:
        return np.zeros((0, FEATURE_DIM))
    wins = np.concatenate([_partition(b) for b in boxes], axis=0)
    return score_windows(structures, wins).reshape(len(boxes), FEATURE_DIM)


def _normalize(m: RerankModel, feats: np.ndarray) -> np.ndarray:
    return (feats - m.norm_mean) / m.norm_scale


def score(m: RerankModel, f: np.ndarray) -> float:
    return float(_normalize(m, f) @ m.weights + m.bias)


def select_top(
    m: RerankModel, pool: list[Proposal], H: int, structures: EdgeStructures
) -> list[Proposal]:
    """Fill rerank scores and keep the top H of the pool.

    Ties are broken by objectness, then raster order, so an untrained model
    falls back to the objectness ordering.
    """
    if not pool:
        return []
    feats = rerank_features([p.box for p in pool], structures)
    scores = _normalize(m, feats) @ m.weights + m.bias
    for p, s in zip(pool, scores):
        p.rerank_score = float(s)
    order = np.lexsort(
        (
            np.array([p.box.x for p in pool]),
            np.array([p.box.y for p in pool]),
            -np.array([p.objectness for p in pool]),
            -scores,
        )
    )
    return [pool[i] for i in order[: min(H, len(pool))]]


def update(
    m: RerankModel,
    estimated: Box,
    pool: list[Proposal],
    frame_index: int,
    structures: EdgeStructures,
) -> RerankModel:
    """Retrain on the current pool every UPDATE_PERIOD frames.

    Positive = the estimated box; negatives = pool members overlapping it
    below 0.5 IoU. Normalization statistics are recomputed from the pool.
    Deterministic: samples are visited in a fixed order (positive first).
    """
    if m.initialized and frame_index % UPDATE_PERIOD != 0:
        return m
    if not pool:
        return m
    pos_feat = rerank_feature(estimated, structures)
    pool_feats = rerank_features([p.box for p in pool], structures)
    neg_mask = np.array([iou(p.box, estimated) < NEGATIVE_IOU for p in pool])
    neg_feats = pool_feats[neg_mask]

    m.norm_mean = pool_feats.mean(axis=0)
    m.norm_scale = np.maximum(pool_feats.std(axis=0), 1e-6)

    # balance the classes: the single positive is interleaved before every
    # negative so it receives equal total step mass despite the 1:N imbalance
    n_neg = max(len(neg_feats), 1)
    feats = np.empty((2 * n_neg, FEATURE_DIM))
    labels = np.empty(2 * n_neg)
    feats[0::2] = pos_feat
    labels[0::2] = 1.0
    if len(neg_feats):
        feats[1::2] = neg_feats
        labels[1::2] = -1.0
    else:
        feats[1::2] = pos_feat
        labels[1::2] = 1.0
    xs = (feats - m.norm_mean) / m.norm_scale

    w = m.weights.copy()
    b = m.bias
    t = 0
    epoch_objectives = []
    for _ in range(EPOCHS):
        for i in range(len(xs)):
            t += 1
            eta = 1.0 / (LAMBDA * t)
            margin = labels[i] * (xs[i] @ w + b)
            w *= 1.0 - eta * LAMBDA
            if margin < 1.0:
                w += eta * labels[i] * xs[i]
                b += eta * labels[i] * 0.01  # unregularized bias, damped step
        epoch_objectives.append(hinge_objective(w, b, xs, labels))
    m.weights = w
    m.bias = b
    m.initialized = True
    m.epoch_objectives = epoch_objectives
    return m


def hinge_objective(w: np.ndarray, b: float, xs: np.ndarray, labels: np.ndarray) -> float:
    """Regularized hinge loss used by update(); exposed for verification."""
    margins = labels * (xs @ w + b)
    return 0.5 * LAMBDA * float(w @ w) + float(np.maximum(0.0, 1.0 - margins).mean())
