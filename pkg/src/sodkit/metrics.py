"""Evaluation metrics for saliency maps against binary masks.

The F-measure sweeps all 256 8-bit thresholds; MAE is the plain pixel mean;
the structure measure follows the published reference formulation
(object-aware plus region-aware halves) with its exact constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, ShapeError
from .grid import Grid2D

THRESHOLDS = np.arange(256) / 255.0
THRESHOLDS.setflags(write=False)

_EPS = float(np.spacing(1))


@dataclass(frozen=True, eq=False)
class MetricReport:
    """Headline metrics for one gt/prediction pair."""

    max_f: float
    mean_f: float
    mae: float
    s_measure: float
    curve: np.ndarray  # (256, 3) columns: precision, recall, f

    def __post_init__(self):
        c = np.asarray(self.curve, dtype=np.float64).copy()
        if c.shape != (256, 3):
            raise ShapeError(f"curve must have shape (256, 3), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "curve", c)


def _binary_or_raise(grid: Grid2D, name: str) -> np.ndarray:
    v = grid.data
    if not np.all((v == 0.0) | (v == 1.0)):
        raise InvalidInputError(f"{name} must be binary (exact 0/1 values); threshold it first")
    return v


def _unit_range_or_raise(grid: Grid2D, name: str) -> np.ndarray:
    v = grid.data
    if v.min() < 0.0 or v.max() > 1.0:
        raise InvalidInputError(f"{name} must lie in [0, 1], got range [{v.min():.6g}, {v.max():.6g}]")
    return v


def _check_shapes(gt: Grid2D, pred: Grid2D):
    if gt.data.shape != pred.data.shape:
        raise ShapeError(f"gt {gt.data.shape} and prediction {pred.data.shape} shapes differ")


def mae(gt: Grid2D, pred: Grid2D) -> float:
    """Mean absolute pixel difference."""
    _check_shapes(gt, pred)
    _unit_range_or_raise(gt, "gt")
    _unit_range_or_raise(pred, "prediction")
    return float(np.abs(gt.data - pred.data).mean())


def _f_from_counts(tp: int, pred_pos: int, gt_pos: int, beta2: float):
    precision = tp / pred_pos if pred_pos > 0 else 0.0
    recall = tp / gt_pos if gt_pos > 0 else 0.0
    if gt_pos == 0 and pred_pos == 0:
        f = 1.0
    elif tp == 0:
        f = 0.0
    else:
        f = (1.0 + beta2) * precision * recall / (beta2 * precision + recall)
    return precision, recall, f


def f_measure_curve(gt: Grid2D, pred: Grid2D, beta2: float = 0.3):
    """F-measure over the 256 thresholds t = i/255, binarizing with pred > t.

    Returns (max_f, mean_f, curve) where curve rows hold (precision, recall,
    f) per threshold. Degenerate thresholds follow fixed rules: an empty
    prediction against an empty ground truth scores f = 1, any threshold
    with no true positives otherwise scores f = 0.
    """
    _check_shapes(gt, pred)
    g = _binary_or_raise(gt, "gt") > 0.5
    p = _unit_range_or_raise(pred, "prediction").reshape(-1)
    if not np.isfinite(beta2) or beta2 <= 0.0:
        raise InvalidParameterError(f"beta2 must be positive, got {beta2!r}")
    gflat = g.reshape(-1)
    gt_pos = int(gflat.sum())
    over = p[np.newaxis, :] > THRESHOLDS[:, np.newaxis]
    pred_pos = over.sum(axis=1)
    true_pos = over[:, gflat].sum(axis=1)
    curve = np.empty((256, 3))
    for i in range(256):
        curve[i] = _f_from_counts(int(true_pos[i]), int(pred_pos[i]), gt_pos, beta2)
    fs = curve[:, 2]
    return float(fs.max()), float(fs.mean()), curve


def adaptive_f_measure(gt: Grid2D, pred: Grid2D, beta2: float = 0.3) -> float:
    """Single-threshold F-measure at t = min(2 * mean(pred), 1)."""
    _check_shapes(gt, pred)
    g = _binary_or_raise(gt, "gt") > 0.5
    p = _unit_range_or_raise(pred, "prediction")
    if not np.isfinite(beta2) or beta2 <= 0.0:
        raise InvalidParameterError(f"beta2 must be positive, got {beta2!r}")
    cut = min(2.0 * float(p.mean()), 1.0)
    chosen = p > cut
    tp = int((chosen & g).sum())
    return _f_from_counts(tp, int(chosen.sum()), int(g.sum()), beta2)[2]


def _object_part(vals: np.ndarray, region: np.ndarray) -> float:
    n = int(region.sum())
    x = float(vals[region].mean())
    sigma = float(vals[region].std(ddof=1)) if n > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _object_score(pred: np.ndarray, gt: np.ndarray) -> float:
    fg = pred * gt
    bg = (1.0 - pred) * (1.0 - gt)
    u = float(gt.mean())
    return u * _object_part(fg, gt > 0.5) + (1.0 - u) * _object_part(bg, gt < 0.5)


def _centroid_split(gt: np.ndarray):
    # Rounded foreground centroid, then a one-based boundary as in the
    # published reference, so the centroid column/row lands in the top-left
    # block.
    idx = np.argwhere(gt > 0.5)
    cy = int(np.round(idx[:, 0].mean()))
    cx = int(np.round(idx[:, 1].mean()))
    return cy + 1, cx + 1


def _ssim_part(p: np.ndarray, g: np.ndarray) -> float:
    h, w = p.shape
    n = h * w
    if n == 0:
        # A centroid on the last row/column leaves an empty block; its area
        # weight is zero, so any finite score works.
        return 0.0
    x = float(p.mean())
    y = float(g.mean())
    norm = max(n - 1, 1)
    sigma_x = float(((p - x) ** 2).sum()) / norm
    sigma_y = float(((g - y) ** 2).sum()) / norm
    sigma_xy = float(((p - x) * (g - y)).sum()) / norm
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0.0:
        return alpha / (beta + _EPS)
    if beta == 0.0:
        return 1.0
    return 0.0


def _region_score(pred: np.ndarray, gt: np.ndarray) -> float:
    h, w = gt.shape
    cy, cx = _centroid_split(gt)
    area = h * w
    w1 = (cx * cy) / area
    w2 = ((w - cx) * cy) / area
    w3 = (cx * (h - cy)) / area
    w4 = 1.0 - w1 - w2 - w3
    parts = (
        (w1, _ssim_part(pred[:cy, :cx], gt[:cy, :cx])),
        (w2, _ssim_part(pred[:cy, cx:], gt[:cy, cx:])),
        (w3, _ssim_part(pred[cy:, :cx], gt[cy:, :cx])),
        (w4, _ssim_part(pred[cy:, cx:], gt[cy:, cx:])),
    )
    return sum(weight * score for weight, score in parts)


def s_measure(gt: Grid2D, pred: Grid2D, alpha: float = 0.5) -> float:
    """Structure measure: alpha * object half + (1 - alpha) * region half.

    Degenerate masks fall back to intensity agreement: an all-background
    mask scores 1 - mean(pred), an all-foreground mask scores mean(pred).
    The combined score is floored at 0.
    """
    _check_shapes(gt, pred)
    g = _binary_or_raise(gt, "gt")
    p = _unit_range_or_raise(pred, "prediction")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in [0, 1], got {alpha!r}")
    u = float(g.mean())
    if u == 0.0:
        return 1.0 - float(p.mean())
    if u == 1.0:
        return float(p.mean())
    score = alpha * _object_score(p, g) + (1.0 - alpha) * _region_score(p, g)
    return max(0.0, float(score))


def evaluate_pair(gt: Grid2D, pred: Grid2D, beta2: float = 0.3,
                  alpha: float = 0.5) -> MetricReport:
    """All headline metrics for one gt/prediction pair."""
    max_f, mean_f, curve = f_measure_curve(gt, pred, beta2)
    return MetricReport(
        max_f=max_f,
        mean_f=mean_f,
        mae=mae(gt, pred),
        s_measure=s_measure(gt, pred, alpha),
        curve=curve,
    )
