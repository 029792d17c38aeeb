"""Splat projection and alpha-compositing rasterizer."""

from semsplat.render.camera import CameraIntrinsics, Pose, look_at
from semsplat.render.projection import (
    ProjectedSplats,
    Splat2D,
    evaluate_alpha,
    project_covariance,
    project_splats,
)
from semsplat.render.rasterizer import (
    ContributorBuffer,
    FrameRender,
    PixelContributor,
    Rasterizer,
    composite,
    reference_render,
)

__all__ = [
    "CameraIntrinsics",
    "Pose",
    "look_at",
    "ProjectedSplats",
    "Splat2D",
    "evaluate_alpha",
    "project_covariance",
    "project_splats",
    "ContributorBuffer",
    "FrameRender",
    "PixelContributor",
    "Rasterizer",
    "composite",
    "reference_render",
]
