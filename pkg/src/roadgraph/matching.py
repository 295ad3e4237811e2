"""Set-prediction matching and loss evaluation as pure functions.

Matching minimizes total pairwise Euclidean distance over injective
assignments; the coordinate loss is an L1 mean over matched pairs, the
validity loss a binary cross-entropy over all queries, and segmentation
maps are scored with a focal term. No gradients here: these are numeric
cross-checks for an external trainer and the force-correction rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import Point
from .raster import Tile

_CLAMP = 1e-7
_COST_TOL = 1e-9
MAX_SET_SIZE = 64


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]  # (prediction index, label index)
    total_cost: float


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 5.0        # coordinate loss weight
    beta: float = 1.0         # validity loss weight
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    def __post_init__(self) -> None:
        vals = (self.alpha, self.beta, self.focal_alpha, self.focal_gamma)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("loss weights must be finite")
        if self.alpha < 0 or self.beta < 0 or self.focal_gamma < 0:
            raise ValueError("loss weights must be non-negative")
        if not 0.0 <= self.focal_alpha <= 1.0:
            raise ValueError("focal_alpha must be in [0, 1]")


def _cost_matrix(preds: Sequence[Point], labels: Sequence[Point]) -> np.ndarray:
    p = np.asarray([(q[0], q[1]) for q in preds], dtype=float).reshape(len(preds), 2)
    l = np.asarray([(q[0], q[1]) for q in labels], dtype=float).reshape(len(labels), 2)
    return np.hypot(p[:, None, 0] - l[None, :, 0], p[:, None, 1] - l[None, :, 1])


def _min_cost(cost: np.ndarray) -> float:
    if cost.size == 0:
        return 0.0
    ri, ci = linear_sum_assignment(cost)
    return float(cost[ri, ci].sum())


def match_vertices(preds: Sequence[Point], labels: Sequence[Point]) -> Assignment:
    """Globally minimal Euclidean matching (Hungarian algorithm).

    Among cost-optimal assignments the lexicographically smallest pair list
    is returned, so results are reproducible across platforms.
    """
    n, m = len(preds), len(labels)
    if n > MAX_SET_SIZE or m > MAX_SET_SIZE:
        raise ValueError(f"set sizes must be <= {MAX_SET_SIZE}")
    if n == 0 or m == 0:
        return Assignment((), 0.0)
    cost = _cost_matrix(preds, labels)
    opt = _min_cost(cost)

    k = min(n, m)
    pairs: list[tuple[int, int]] = []
    free_preds = list(range(n))
    free_labels = list(range(m))
    fixed = 0.0
    while len(pairs) < k:
        found = False
        for i in free_preds:
            for j in free_labels:
                rest_p = [x for x in free_preds if x != i]
                rest_l = [x for x in free_labels if x != j]
                need = k - len(pairs) - 1
                if need > min(len(rest_p), len(rest_l)):
                    continue
                sub = cost[np.ix_(rest_p, rest_l)] if need else np.zeros((0, 0))
                # with unequal sizes, skipping pred i entirely must also be
                # covered: only legal when more preds remain than matches left
                if need and min(sub.shape) < need:
                    continue
                total = fixed + cost[i, j] + _min_cost(sub)
                if total <= opt + _COST_TOL:
                    pairs.append((i, j))
                    fixed += cost[i, j]
                    free_preds.remove(i)
                    free_labels.remove(j)
                    found = True
                    break
            if found:
                break
            # pred i stays unmatched only if the remaining preds can still
            # complete the matching optimally
            rest_p = [x for x in free_preds if x != i]
            if k - len(pairs) <= len(rest_p):
                sub = cost[np.ix_(rest_p, free_labels)]
                if fixed + _min_cost(sub) <= opt + _COST_TOL:
                    free_preds.remove(i)
                    found = True
                    break
            if found:
                break
        if not found:  # numeric fallback; should not happen
            ri, ci = linear_sum_assignment(cost[np.ix_(free_preds, free_labels)])
            for a, b in zip(ri, ci):
                pairs.append((free_preds[a], free_labels[b]))
            break
    pairs.sort()
    total_cost = float(sum(cost[i, j] for i, j in pairs))
    return Assignment(tuple(pairs), total_cost)


def coord_loss(preds: Sequence[Point], labels: Sequence[Point],
               a: Assignment) -> float:
    """Mean L1 distance over matched pairs; 0 when nothing is matched."""
    if not a.pairs:
        return 0.0
    total = 0.0
    for i, j in a.pairs:
        total += abs(preds[i][0] - labels[j][0]) + abs(preds[i][1] - labels[j][1])
    return total / len(a.pairs)


def valid_loss(pred_probs: Sequence[float], matched_flags: Sequence[int]) -> float:
    """Mean binary cross-entropy of validity probabilities over all queries."""
    if len(pred_probs) != len(matched_flags):
        raise ValueError("pred_probs and matched_flags must have equal length")
    if not pred_probs:
        return 0.0
    total = 0.0
    for p, y in zip(pred_probs, matched_flags):
        p = min(1.0 - _CLAMP, max(_CLAMP, float(p)))
        total += -(y * math.log(p) + (1 - y) * math.log(1.0 - p))
    return total / len(pred_probs)


def _as_map(t) -> np.ndarray:
    arr = t.data if isinstance(t, Tile) else np.asarray(t, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 1-channel map")
    return np.asarray(arr, dtype=np.float64)


def focal_loss(pred_map, gt_mask, focal_alpha: float = 0.25,
               focal_gamma: float = 2.0) -> float:
    """Mean per-pixel focal term -alpha_t (1 - p_t)^gamma log(p_t)."""
    pred = _as_map(pred_map)
    gt = _as_map(gt_mask)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    pred = np.clip(pred, _CLAMP, 1.0 - _CLAMP)
    pt = np.where(gt >= 0.5, pred, 1.0 - pred)
    at = np.where(gt >= 0.5, focal_alpha, 1.0 - focal_alpha)
    loss = -at * np.power(1.0 - pt, focal_gamma) * np.log(pt)
    return float(loss.mean())


def total_loss(seg_losses: tuple[float, float], coord: float, valid: float,
               w: LossWeights) -> float:
    """Weighted total: (road focal + intersection focal) + alpha*coord + beta*valid."""
    road, inter = seg_losses
    for v in (road, inter, coord, valid):
        if not math.isfinite(v):
            raise ValueError("loss components must be finite")
    return road + inter + w.alpha * coord + w.beta * valid
