"""Per-frame inputs and the on-disk layout of recorded sequences.

A sequence directory holds `intrinsics.txt`, `trajectory.txt` and, for frame
i, `rgb_{i:05d}.ppm`, `depth_{i:05d}.ogdm`, `labels_{i:05d}.oglm`,
`confidence_{i:05d}.ogcm`, optional `detections_{i:05d}.txt` and optional
ground truth `gt_{i:05d}.oglm`.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from semsplat.consensus.matching import InputSegmentation
from semsplat.errors import DimensionMismatchError, FormatError
from semsplat.pipeline import formats
from semsplat.pipeline.detections import Detection, read_detections, write_detections
from semsplat.render.camera import CameraIntrinsics, Pose
from semsplat.voting.label_map import LabelMap

logger = logging.getLogger(__name__)


@dataclass
class FrameInput:
    """One RGB-D frame with its pose, segmentation and detections."""

    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) world units, 0 = invalid
    pose: Pose  # world-to-camera
    segmentation: InputSegmentation
    detections: list[Detection] = field(default_factory=list)
    ground_truth: LabelMap | None = None

    def __post_init__(self):
        """Check that every raster has the same size."""
        shape = self.segmentation.label_map.shape
        rasters = {"rgb": self.rgb.shape, "depth": self.depth.shape}
        if self.ground_truth is not None:
            rasters["ground truth"] = self.ground_truth.shape
        for name, raster_shape in rasters.items():
            if tuple(raster_shape[:2]) != shape:
                raise DimensionMismatchError(
                    f"Frame {name} shape {raster_shape} does not match labels {shape}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.segmentation.label_map.shape


def _frame_path(directory: Path, stem: str, index: int, suffix: str) -> Path:
    return directory / f"{stem}_{index:05d}.{suffix}"


def write_sequence(
    directory: str | Path, intrinsics: CameraIntrinsics, frames: Sequence[FrameInput]
) -> Path:
    """Write frames in the sequence layout."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    formats.write_intrinsics(directory / "intrinsics.txt", intrinsics)
    formats.write_trajectory(directory / "trajectory.txt", [f.pose for f in frames])
    for i, frame in enumerate(frames):
        formats.write_rgb(_frame_path(directory, "rgb", i, "ppm"), frame.rgb)
        formats.write_depth(_frame_path(directory, "depth", i, "ogdm"), frame.depth)
        formats.write_label_map(
            _frame_path(directory, "labels", i, "oglm"), frame.segmentation.label_map
        )
        formats.write_confidence_map(
            _frame_path(directory, "confidence", i, "ogcm"),
            frame.segmentation.confidence_map(),
        )
        write_detections(_frame_path(directory, "detections", i, "txt"), frame.detections)
        if frame.ground_truth is not None:
            formats.write_label_map(_frame_path(directory, "gt", i, "oglm"), frame.ground_truth)
    logger.info(f"Wrote {len(frames)} frames to {directory}")
    return directory


def _segmentation_from_maps(label_map: LabelMap, confidence: np.ndarray) -> InputSegmentation:
    """Per-label confidence is the mean of the confidence map over the label."""
    label_map.check_shape(confidence.shape, "confidence map")
    values, inverse = np.unique(label_map.labels, return_inverse=True)
    inverse = inverse.ravel()
    sums = np.bincount(inverse, weights=confidence.ravel(), minlength=len(values))
    areas = np.bincount(inverse, minlength=len(values))
    confidences = {
        int(v): float(np.clip(sums[i] / areas[i], 0.0, 1.0))
        for i, v in enumerate(values)
        if v != 0
    }
    return InputSegmentation(label_map, confidences)


def read_sequence(directory: str | Path) -> tuple[CameraIntrinsics, list[FrameInput]]:
    """Load every frame of a sequence directory.

    Raises:
        FormatError: if a frame file named by the trajectory is missing.
    """
    directory = Path(directory)
    intrinsics = formats.read_intrinsics(directory / "intrinsics.txt")
    poses = formats.read_trajectory(directory / "trajectory.txt")
    frames = []
    for i, pose in enumerate(poses):
        paths = {
            "rgb": _frame_path(directory, "rgb", i, "ppm"),
            "depth": _frame_path(directory, "depth", i, "ogdm"),
            "labels": _frame_path(directory, "labels", i, "oglm"),
            "confidence": _frame_path(directory, "confidence", i, "ogcm"),
        }
        for name, path in paths.items():
            if not path.exists():
                raise FormatError(f"Frame {i} is missing its {name} file {path}")
        detections_path = _frame_path(directory, "detections", i, "txt")
        gt_path = _frame_path(directory, "gt", i, "oglm")
        frames.append(
            FrameInput(
                rgb=formats.read_rgb(paths["rgb"]),
                depth=formats.read_depth(paths["depth"]),
                pose=pose,
                segmentation=_segmentation_from_maps(
                    formats.read_label_map(paths["labels"]),
                    formats.read_confidence_map(paths["confidence"]),
                ),
                detections=read_detections(detections_path) if detections_path.exists() else [],
                ground_truth=formats.read_label_map(gt_path) if gt_path.exists() else None,
            )
        )
    logger.info(f"Loaded {len(frames)} frames from {directory}")
    return intrinsics, frames
