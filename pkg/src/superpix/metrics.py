"""Boundary recall, under-segmentation error, achievable segmentation accuracy."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import maximum_filter

from .labeling import LabelMap

# Overlap fraction above which a (superpixel, segment) pair counts as
# covered in the under-segmentation error.
UE_OVERLAP_EPS = 0.05


@dataclass
class MetricsReport:
    boundary_recall: float | None = None
    undersegmentation_error: float | None = None
    achievable_accuracy: float | None = None
    superpixel_count: int = 0
    runtime_ms: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def inner_boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Single-sided boundary: pixels whose right or down neighbor differs.

    Each label edge contributes one pixel line, which keeps tolerance
    comparisons (within-two-pixels) aligned with edge offsets.
    """
    labels = np.asarray(labels)
    mask = np.zeros(labels.shape, dtype=bool)
    mask[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    mask[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return mask


def _as_array(labels) -> np.ndarray:
    if isinstance(labels, LabelMap):
        return labels.labels
    return np.asarray(labels)


def _check_dims(labels: np.ndarray, gt: np.ndarray):
    if labels.shape != gt.shape:
        raise ValueError(
            f"dimension mismatch: labels {labels.shape} vs gt {gt.shape}")


def boundary_recall(labels, gt, tol: int = 2) -> float:
    """Fraction of ground-truth boundary pixels with a superpixel boundary
    pixel within Chebyshev distance tol. Returns 1.0 when the ground
    truth has no boundary pixels."""
    labels = _as_array(labels)
    gt = np.asarray(gt)
    _check_dims(labels, gt)
    gt_boundary = inner_boundary_mask(gt)
    total = int(gt_boundary.sum())
    if total == 0:
        return 1.0
    sp_boundary = inner_boundary_mask(labels)
    near = maximum_filter(sp_boundary.astype(np.uint8), size=2 * tol + 1,
                          mode="constant") > 0
    return float(np.count_nonzero(gt_boundary & near) / total)


def _overlap_counts(labels: np.ndarray, gt: np.ndarray):
    """Contingency table of |s_k intersect s_g| as a dense (K, G) array."""
    _check_dims(labels, gt)
    _, kidx = np.unique(labels, return_inverse=True)
    _, gidx = np.unique(gt, return_inverse=True)
    nk = int(kidx.max()) + 1
    ng = int(gidx.max()) + 1
    table = np.bincount(kidx.ravel() * ng + gidx.ravel(),
                        minlength=nk * ng).reshape(nk, ng)
    return table


def undersegmentation_error(labels, gt) -> float:
    """Normalized excess superpixel mass leaking across ground-truth
    segments; a superpixel is charged once per segment it overlaps by
    strictly more than UE_OVERLAP_EPS of its own size."""
    labels = _as_array(labels)
    gt = np.asarray(gt)
    table = _overlap_counts(labels, gt)
    sizes = table.sum(axis=1)
    leaking = table > UE_OVERLAP_EPS * sizes[:, None]
    charged = (leaking * sizes[:, None]).sum()
    return float(charged / labels.size - 1.0)


def achievable_accuracy(labels, gt) -> float:
    """Fraction of pixels correct when every superpixel adopts its
    majority ground-truth segment."""
    labels = _as_array(labels)
    gt = np.asarray(gt)
    table = _overlap_counts(labels, gt)
    return float(table.max(axis=1).sum() / labels.size)


def evaluate(labels, gts: list, tol: int = 2,
             runtime_ms: float = 0.0) -> MetricsReport:
    """Score a label map against one or more annotations.

    Boundary recall is taken against the union of annotation boundaries;
    UE and ASA are averaged across annotations.
    """
    labels = _as_array(labels)
    gts = [np.asarray(g) for g in gts]
    if not gts:
        raise ValueError("at least one ground-truth annotation required")
    for g in gts:
        _check_dims(labels, g)
    union = np.zeros(labels.shape, dtype=bool)
    for g in gts:
        union |= inner_boundary_mask(g)
    total = int(union.sum())
    if total == 0:
        br = 1.0
    else:
        sp_boundary = inner_boundary_mask(labels)
        near = maximum_filter(sp_boundary.astype(np.uint8), size=2 * tol + 1,
                              mode="constant") > 0
        br = float(np.count_nonzero(union & near) / total)
    ue = float(np.mean([undersegmentation_error(labels, g) for g in gts]))
    asa = float(np.mean([achievable_accuracy(labels, g) for g in gts]))
    return MetricsReport(
        boundary_recall=br,
        undersegmentation_error=ue,
        achievable_accuracy=asa,
        superpixel_count=int(len(np.unique(labels))),
        runtime_ms=runtime_ms,
    )
