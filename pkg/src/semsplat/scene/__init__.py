"""Labeled Gaussian scene representation."""

from semsplat.scene.gaussian import LabeledGaussian, build_covariances
from semsplat.scene.registry import (
    BACKGROUND_LABEL,
    NONE_CLASS,
    ClassEntry,
    LabelClassTable,
    LabelRegistry,
    SegmentRecord,
)
from semsplat.scene.scene import GaussianScene, SceneSnapshot

__all__ = [
    "BACKGROUND_LABEL",
    "NONE_CLASS",
    "ClassEntry",
    "GaussianScene",
    "LabelClassTable",
    "LabelRegistry",
    "LabeledGaussian",
    "SceneSnapshot",
    "SegmentRecord",
    "build_covariances",
]
