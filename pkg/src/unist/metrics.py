"""Evaluation metrics (numpy only, no autodiff).

Gaze prediction: AUC-Judd, NSS, CC, SIM. Salient-object detection: MAE,
maxF (255 thresholds, beta^2 = 0.3), S-measure (alpha = 0.5). VSOD metrics
are computed per frame and averaged over frames; dataset aggregation is the
arithmetic mean over samples (macro average).

The AUC here is the exact threshold-sweep ROC area with inclusive ties and
trapezoidal integration, which equals the pairwise ranking statistic
P(sal_fix > sal_nonfix) + 0.5 * P(tie).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricUndefinedError, ShapeError

logger = logging.getLogger(__name__)

_F_BETA2 = 0.3
_S_ALPHA = 0.5
_EPS = np.finfo(np.float64).eps


def _as64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def _check_shapes(op, p, g):
    if p.shape != g.shape:
        raise ShapeError(f"{op}: prediction {p.shape} vs ground truth {g.shape}")


# ---------------------------------------------------------------------------
# gaze-prediction metrics


def auc_judd(p, fixations) -> float:
    """ROC area of the saliency map against binary fixations.

    Thresholds sweep every distinct saliency value (>= is a hit); the curve
    gets endpoints (0,0) and (1,1) and is integrated with trapezoids.
    """
    p = _as64(p).ravel()
    fix = np.asarray(fixations).ravel().astype(bool)
    _check_shapes("auc_judd", p, fix)
    if not fix.any():
        raise MetricUndefinedError("auc_judd needs at least one fixated pixel")
    if fix.all():
        raise MetricUndefinedError("auc_judd needs at least one non-fixated pixel")
    pos = np.sort(p[fix])
    neg = np.sort(p[~fix])
    thresholds = np.unique(p)[::-1]  # descending
    tpr = (pos.size - np.searchsorted(pos, thresholds, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg, thresholds, side="left")) / neg.size
    fpr = np.concatenate([[0.0], fpr, [1.0]])
    tpr = np.concatenate([[0.0], tpr, [1.0]])
    return float(np.trapezoid(tpr, fpr))


def nss(p, fixations) -> float:
    """Mean of the standardized saliency map at fixated pixels."""
    p = _as64(p)
    fix = np.asarray(fixations).astype(bool)
    _check_shapes("nss", p, fix)
    if not fix.any():
        raise MetricUndefinedError("nss needs at least one fixated pixel")
    std = p.std()
    if std <= _EPS:
        raise MetricUndefinedError("nss is undefined for a constant map")
    z = (p - p.mean()) / std
    return float(z[fix].mean())


def cc_metric(p, g_den) -> float:
    """Pearson correlation between map and dense gaze map (positive is better)."""
    p = _as64(p).ravel()
    g = _as64(g_den).ravel()
    _check_shapes("cc_metric", p, g)
    sp, sg = p.std(), g.std()
    if sp <= _EPS or sg <= _EPS:
        raise MetricUndefinedError("cc is undefined for constant maps")
    cov = ((p - p.mean()) * (g - g.mean())).mean()
    return float(cov / (sp * sg))


def sim_metric(p, g_den) -> float:
    """Histogram intersection of the sum-normalized maps, in [0, 1]."""
    p = _as64(p).ravel()
    g = _as64(g_den).ravel()
    _check_shapes("sim_metric", p, g)
    ps, gs = p.sum(), g.sum()
    if ps <= 0 or gs <= 0:
        raise MetricUndefinedError("sim needs positive-sum maps")
    return float(np.minimum(p / ps, g / gs).sum())


# ---------------------------------------------------------------------------
# salient-object metrics


def _frames(a) -> np.ndarray:
    a = _as64(a)
    if a.ndim == 2:
        return a[None]
    if a.ndim == 3:
        return a
    raise ShapeError(f"expected (H,W) or (T,H,W), got {a.shape}")


def mae(p, g) -> float:
    """Mean absolute error over all pixels of all frames."""
    p, g = _frames(p), _frames(g)
    _check_shapes("mae", p, g)
    return float(np.abs(p - g).mean())


def max_f(p, g, beta2: float = _F_BETA2) -> float:
    """Best frame-averaged F-measure over 255 binarization thresholds."""
    p, g = _frames(p), _frames(g)
    _check_shapes("max_f", p, g)
    thresholds = np.arange(1, 256, dtype=np.float64) / 255.0
    per_frame = []
    for idx in range(p.shape[0]):
        gt = g[idx].ravel().astype(bool)
        positives = gt.sum()
        if positives == 0:
            logger.warning("max_f: frame %d has no positive pixels, skipped", idx)
            continue
        binarized = p[idx].ravel()[None, :] >= thresholds[:, None]  # (255, HW)
        tp = (binarized & gt[None, :]).sum(axis=1).astype(np.float64)
        predicted = binarized.sum(axis=1).astype(np.float64)
        precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
        recall = tp / positives
        denom = beta2 * precision + recall
        f = np.divide(
            (1.0 + beta2) * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0
        )
        per_frame.append(f)
    if not per_frame:
        raise MetricUndefinedError("max_f: no frame has positive ground truth")
    return float(np.mean(per_frame, axis=0).max())


def _object_score(values: np.ndarray) -> float:
    # similarity of one region's prediction values against an all-ones target
    if values.size == 0:
        return 0.0
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return float(2.0 * x / (x * x + 1.0 + sigma + _EPS))


def _s_object(p: np.ndarray, g: np.ndarray) -> float:
    fg = _object_score(p[g])
    bg = _object_score((1.0 - p)[~g])
    u = g.mean()
    return float(u * fg + (1.0 - u) * bg)


def _region_ssim(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    x, y = p.mean(), g.mean()
    denom = n - 1 + _EPS
    sx = ((p - x) ** 2).sum() / denom
    sy = ((g - y) ** 2).sum() / denom
    sxy = ((p - x) * (g - y)).sum() / denom
    alpha = 4.0 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0.0:
        return float(alpha / (beta + _EPS))
    if beta == 0.0:
        return 1.0
    return 0.0


def _centroid(g: np.ndarray) -> tuple:
    # 1-based foreground centroid, rounded half up (matches the common
    # reference implementation of the structure measure)
    rows, cols = g.shape
    total = g.sum()
    row_idx = np.arange(1, rows + 1, dtype=np.float64)
    col_idx = np.arange(1, cols + 1, dtype=np.float64)
    y = int(np.floor((g.sum(axis=1) * row_idx).sum() / total + 0.5))
    x = int(np.floor((g.sum(axis=0) * col_idx).sum() / total + 0.5))
    return y, x


def _s_region(p: np.ndarray, g: np.ndarray) -> float:
    rows, cols = g.shape
    y, x = _centroid(g)
    quads_g = [g[:y, :x], g[:y, x:], g[y:, :x], g[y:, x:]]
    quads_p = [p[:y, :x], p[:y, x:], p[y:, :x], p[y:, x:]]
    if any(q.size == 0 for q in quads_g):
        # degenerate split (e.g. all-foreground masks on even sizes):
        # fall back to whole-image structural similarity
        return _region_ssim(p, g.astype(np.float64))
    area = rows * cols
    score = 0.0
    for qp, qg in zip(quads_p, quads_g):
        score += (qg.size / area) * _region_ssim(qp, qg.astype(np.float64))
    return float(score)


def s_measure(p, g, alpha: float = _S_ALPHA) -> float:
    """Structure measure: alpha * object similarity + (1-alpha) * region
    similarity (SSIM over the 4 quadrants split at the foreground centroid),
    frame-averaged. Frames with empty ground truth are skipped."""
    p, g = _frames(p), _frames(g)
    _check_shapes("s_measure", p, g)
    values = []
    for idx in range(p.shape[0]):
        gt = g[idx].astype(bool)
        if not gt.any():
            logger.warning("s_measure: frame %d has no positive pixels, skipped", idx)
            continue
        values.append(alpha * _s_object(p[idx], gt) + (1.0 - alpha) * _s_region(p[idx], gt))
    if not values:
        raise MetricUndefinedError("s_measure: no frame has positive ground truth")
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# reporting

VSP_METRICS = ("auc_judd", "nss", "cc", "sim")
VSOD_METRICS = ("mae", "max_f", "s_measure")


@dataclass
class MetricReport:
    """Per-sample metric values plus dataset means (fixed accumulation order)."""

    metric_names: tuple
    sample_ids: list = field(default_factory=list)
    values: dict = field(default_factory=dict)  # metric name -> list of floats

    def add_sample(self, sample_id: str, metrics: dict) -> None:
        self.sample_ids.append(sample_id)
        for name in self.metric_names:
            self.values.setdefault(name, []).append(float(metrics[name]))

    def means(self) -> dict:
        return {
            name: float(np.mean(self.values[name])) if self.values.get(name) else float("nan")
            for name in self.metric_names
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("sample_id",) + tuple(self.metric_names))
            for i, sid in enumerate(self.sample_ids):
                writer.writerow([sid] + [repr(self.values[name][i]) for name in self.metric_names])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"num_samples": len(self.sample_ids), "means": self.means()}, fh, indent=2, sort_keys=True)
            fh.write("\n")
