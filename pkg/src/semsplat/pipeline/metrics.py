"""Segmentation and reconstruction metrics for mapping runs."""

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import pandas as pd
from sklearn.metrics.cluster import contingency_matrix

from semsplat.errors import DimensionMismatchError
from semsplat.scene.registry import BACKGROUND_LABEL
from semsplat.voting.label_map import LabelMap

logger = logging.getLogger(__name__)

TIMING_COLUMNS = ("rgb_ms", "label_ms")


def match_labels(pred: LabelMap, gt: LabelMap) -> dict[int, int]:
    """One-to-one pred → gt object matching by descending intersection.

    Ties go to the smaller (gt, pred) pair. Background only matches background.
    """
    pred_values, pred_inverse = np.unique(pred.labels, return_inverse=True)
    gt_values, gt_inverse = np.unique(gt.labels, return_inverse=True)
    counts = contingency_matrix(gt_inverse.ravel(), pred_inverse.ravel())

    gt_rows, pred_cols = np.nonzero(counts)
    keep = (gt_values[gt_rows] != BACKGROUND_LABEL) & (pred_values[pred_cols] != BACKGROUND_LABEL)
    gt_rows, pred_cols = gt_rows[keep], pred_cols[keep]
    order = np.lexsort(
        (pred_values[pred_cols], gt_values[gt_rows], -counts[gt_rows, pred_cols])
    )

    matching = {BACKGROUND_LABEL: BACKGROUND_LABEL}
    used_gt: set[int] = set()
    for i in order:
        p, g = int(pred_values[pred_cols[i]]), int(gt_values[gt_rows[i]])
        if p in matching or g in used_gt:
            continue
        matching[p] = g
        used_gt.add(g)
    return matching


def compute_miou_acc(pred: LabelMap, gt: LabelMap) -> tuple[float, float]:
    """Instance mIoU and pixel accuracy after greedy label matching.

    mIoU averages over ground-truth objects (unmatched objects score 0).
    Accuracy counts every pixel, background included. A pair of maps with
    no objects on either side scores (1.0, Acc).

    Raises:
        DimensionMismatchError: if the maps differ in shape.
    """
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"Prediction {pred.shape} and ground truth {gt.shape} differ")
    matching = match_labels(pred, gt)
    values, inverse = np.unique(pred.labels, return_inverse=True)
    lookup = np.array([matching.get(int(v), -1) for v in values], dtype=np.int64)
    matched = lookup[inverse].reshape(pred.shape)
    target = gt.labels.astype(np.int64)
    acc = float(np.mean(matched == target))

    objects = sorted(gt.label_set())
    if not objects:
        return (1.0 if not pred.label_set() else 0.0), acc
    ious = []
    for g in objects:
        gt_mask = target == g
        pred_mask = matched == g
        union = np.count_nonzero(gt_mask | pred_mask)
        ious.append(np.count_nonzero(gt_mask & pred_mask) / union)
    return float(np.mean(ious)), acc


def compute_psnr(pred_rgb: np.ndarray, gt_rgb: np.ndarray) -> float:
    """Peak signal-to-noise ratio of [0, 1] images; inf for identical images."""
    if np.shape(pred_rgb) != np.shape(gt_rgb):
        raise DimensionMismatchError(
            f"Image shapes differ: {np.shape(pred_rgb)} vs {np.shape(gt_rgb)}"
        )
    mse = float(np.mean((np.asarray(pred_rgb) - np.asarray(gt_rgb)) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


@dataclass
class FrameMetrics:
    """Everything recorded about one processed frame."""

    frame: int
    miou: float | None = None  # rendered map vs ground truth
    acc: float | None = None
    psnr: float | None = None
    label_count: int = 0
    gaussian_count: int = 0
    added: int = 0
    pruned: int = 0
    new_labels: int = 0
    decayed: int = 0
    relabeled: int = 0
    part_overwrites: int = 0
    incorrect_part_overwrites: int | None = None
    rgb_ms: float = 0.0
    label_ms: float = 0.0


@dataclass
class RunMetrics:
    """Per-frame metrics plus the evaluation of the final map."""

    frames: list[FrameMetrics] = field(default_factory=list)
    final_miou: float | None = None
    final_acc: float | None = None

    def append(self, metrics: FrameMetrics) -> None:
        self.frames.append(metrics)

    def to_frame(self, include_timing: bool = True) -> pd.DataFrame:
        """Per-frame table, one row per frame."""
        columns = [f.name for f in fields(FrameMetrics)]
        if not include_timing:
            columns = [c for c in columns if c not in TIMING_COLUMNS]
        rows = [asdict(m) for m in self.frames]
        return pd.DataFrame(rows, columns=columns)

    @property
    def label_counts(self) -> list[int]:
        return [m.label_count for m in self.frames]

    @property
    def total_pruned(self) -> int:
        return sum(m.pruned for m in self.frames)

    @property
    def render_ratio(self) -> float | None:
        """Mean RGB+label render time over mean RGB-only render time."""
        rgb = sum(m.rgb_ms for m in self.frames)
        if rgb <= 0:
            return None
        return sum(m.label_ms for m in self.frames) / rgb

    def summary(self) -> dict[str, float | int | None]:
        """Aggregate figures for logging and the CLI report."""
        table = self.to_frame()
        scored = table["miou"].dropna() if len(table) else pd.Series(dtype=float)
        accs = table["acc"].dropna() if len(table) else pd.Series(dtype=float)
        return {
            "frames": len(self.frames),
            "final_miou": self.final_miou,
            "final_acc": self.final_acc,
            "mean_miou": float(scored.mean()) if len(scored) else None,
            "mean_acc": float(accs.mean()) if len(accs) else None,
            "final_label_count": self.frames[-1].label_count if self.frames else 0,
            "final_gaussian_count": self.frames[-1].gaussian_count if self.frames else 0,
            "pruned": self.total_pruned,
            "render_ratio": self.render_ratio,
        }

    def write_csv(self, path) -> None:
        """Write the per-frame table as CSV."""
        self.to_frame().to_csv(path, index=False)
        logger.debug(f"Wrote metrics for {len(self.frames)} frames to {path}")
