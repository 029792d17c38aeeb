"""Box detections and their association with segmentation labels."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from semsplat.pipeline.formats import read_text_table
from semsplat.scene.registry import NONE_CLASS, LabelClassTable
from semsplat.voting.label_map import LabelMap

logger = logging.getLogger(__name__)

IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class Detection:
    """Open-set detection: class name, score and a half-open (x0, y0, x1, y1) box."""

    class_name: str
    score: float
    bbox: tuple[int, int, int, int]

    def __post_init__(self):
        """Validate detection."""
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Detection score {self.score} not in [0, 1]")
        x0, y0, x1, y1 = self.bbox
        if x1 < x0 or y1 < y0:
            raise ValueError(f"Invalid bbox {self.bbox}")


def bbox_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    """Intersection over union of two half-open boxes."""
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def label_bboxes(label_map: LabelMap) -> dict[int, tuple[int, int, int, int]]:
    """Tight half-open box of every nonzero label."""
    values, inverse = np.unique(label_map.labels, return_inverse=True)
    slices = ndimage.find_objects(inverse.reshape(label_map.shape) + 1)
    boxes = {}
    for value, found in zip(values, slices, strict=True):
        if value == 0 or found is None:
            continue
        rows, cols = found
        boxes[int(value)] = (cols.start, rows.start, cols.stop, rows.stop)
    return boxes


def associate_detections(
    label_map: LabelMap,
    detections: Sequence[Detection],
    iou_threshold: float = IOU_THRESHOLD,
) -> LabelClassTable:
    """Give each label the class of its best-IoU detection above the threshold.

    Labels without such a detection get the None class with score 0.0.
    """
    table = LabelClassTable()
    for label, box in label_bboxes(label_map).items():
        best_iou, best = 0.0, None
        for detection in detections:
            iou = bbox_iou(box, detection.bbox)
            if iou > best_iou:
                best_iou, best = iou, detection
        if best is not None and best_iou > iou_threshold:
            table.set(label, best.class_name, best.score)
        else:
            table.set(label, NONE_CLASS, 0.0)
    return table


def write_detections(path: str | Path, detections: Sequence[Detection]) -> None:
    """Write `class_name score x0 y0 x1 y1` lines."""
    lines = [
        f"{d.class_name} {d.score:.6f} {d.bbox[0]} {d.bbox[1]} {d.bbox[2]} {d.bbox[3]}\n"
        for d in detections
    ]
    Path(path).write_text("".join(lines))


def read_detections(path: str | Path) -> list[Detection]:
    """Read a detections text file."""
    frame = read_text_table(path, ["class_name", "score", "x0", "y0", "x1", "y1"])
    return [
        Detection(
            class_name=str(row.class_name),
            score=float(row.score),
            bbox=(int(row.x0), int(row.y0), int(row.x1), int(row.y1)),
        )
        for row in frame.itertuples(index=False)
    ]
