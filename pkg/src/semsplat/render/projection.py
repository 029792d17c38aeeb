"""Projection of 3D Gaussians to image-plane splats (EWA splatting)."""

import logging
from dataclasses import dataclass

import numpy as np

from semsplat.config import RenderConfig
from semsplat.errors import RenderError
from semsplat.render.camera import CameraIntrinsics, Pose
from semsplat.scene.gaussian import LabeledGaussian, build_covariances
from semsplat.scene.scene import SceneSnapshot

logger = logging.getLogger(__name__)

ORTHOGRAPHIC_JACOBIAN = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass
class Splat2D:
    """Image-plane footprint of one Gaussian."""

    mean2d: np.ndarray  # (2,) pixels
    cov2d: np.ndarray  # (2, 2) pixels^2, regularized
    depth: float  # camera-frame z
    source_index: int


@dataclass
class ProjectedSplats:
    """Batch of visible splats, sorted front to back."""

    indices: np.ndarray  # (M,) source Gaussian indices
    means: np.ndarray  # (M, 2)
    conics: np.ndarray  # (M, 3) inverse covariance entries (a, b, c)
    depths: np.ndarray  # (M,)
    radii: np.ndarray  # (M,) footprint radius in pixels
    opacities: np.ndarray  # (M,)
    colors: np.ndarray  # (M, 3)
    labels: np.ndarray  # (M,)

    def __len__(self) -> int:
        return len(self.indices)


def projection_jacobian(point_cam: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Jacobian of the perspective projection at a camera-frame point."""
    x, y, z = point_cam
    return np.array(
        [
            [intrinsics.fx / z, 0.0, -intrinsics.fx * x / (z * z)],
            [0.0, intrinsics.fy / z, -intrinsics.fy * y / (z * z)],
        ]
    )


def project_covariance(
    gaussian: LabeledGaussian,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    config: RenderConfig | None = None,
    index: int = 0,
    orthographic: bool = False,
) -> Splat2D | None:
    """Project one Gaussian: Σ' = J W Σ Wᵀ Jᵀ plus a diagonal regularizer.

    Returns None when the centre is not in front of the near plane.
    The orthographic flag replaces J with the identity projection.

    Raises:
        RenderError: if the projected values are not finite.
    """
    config = config or RenderConfig()
    center = pose.transform(np.asarray([gaussian.position], dtype=np.float64))[0]
    if center[2] <= config.near_plane:
        return None

    W = pose.rotation_matrix
    if orthographic:
        J = ORTHOGRAPHIC_JACOBIAN
        mean2d = center[:2].copy()
    else:
        J = projection_jacobian(center, intrinsics)
        mean2d = np.array(
            [
                intrinsics.fx * center[0] / center[2] + intrinsics.cx,
                intrinsics.fy * center[1] / center[2] + intrinsics.cy,
            ]
        )
    T = J @ W
    cov2d = T @ gaussian.covariance() @ T.T
    cov2d = 0.5 * (cov2d + cov2d.T) + config.cov2d_regularizer * np.eye(2)

    if not (np.all(np.isfinite(cov2d)) and np.all(np.isfinite(mean2d))):
        raise RenderError(f"Gaussian {index} projected to non-finite values")
    return Splat2D(mean2d=mean2d, cov2d=cov2d, depth=float(center[2]), source_index=index)


def conic_from_cov2d(cov2d: np.ndarray, index: int = 0) -> np.ndarray:
    """Inverse of a symmetric 2×2 covariance as (a, b, c).

    Raises:
        RenderError: if the covariance is singular.
    """
    a, b, c = cov2d[0, 0], cov2d[0, 1], cov2d[1, 1]
    det = a * c - b * b
    if not det > 0:
        raise RenderError(f"Gaussian {index} has a singular 2D covariance")
    return np.array([c / det, -b / det, a / det])


def evaluate_alpha(
    splat: Splat2D,
    opacity: float,
    pixel: np.ndarray,
    config: RenderConfig | None = None,
) -> float:
    """Opacity-weighted density of a splat at a pixel.

    α = opacity·exp(−½ dᵀΣ'⁻¹d), clamped to alpha_max; zero below alpha_cutoff
    and outside the extent_sigma ellipse.
    """
    config = config or RenderConfig()
    conic = conic_from_cov2d(splat.cov2d, splat.source_index)
    d = np.asarray(pixel, dtype=np.float64) - splat.mean2d
    power = conic[0] * d[0] * d[0] + 2.0 * conic[1] * d[0] * d[1] + conic[2] * d[1] * d[1]
    return float(_alpha_from_power(np.asarray([power]), np.asarray([opacity]), config)[0])


def splat_alphas(
    means: np.ndarray,
    conics: np.ndarray,
    opacities: np.ndarray,
    pixels: np.ndarray,
    config: RenderConfig,
) -> np.ndarray:
    """Alpha of every splat at every pixel, shape (n_splats, n_pixels)."""
    dx = pixels[None, :, 0] - means[:, None, 0]
    dy = pixels[None, :, 1] - means[:, None, 1]
    power = (
        conics[:, 0, None] * dx * dx
        + 2.0 * conics[:, 1, None] * dx * dy
        + conics[:, 2, None] * dy * dy
    )
    return _alpha_from_power(power, opacities[:, None], config)


def _alpha_from_power(
    power: np.ndarray, opacities: np.ndarray, config: RenderConfig
) -> np.ndarray:
    alpha = np.minimum(config.alpha_max, opacities * np.exp(-0.5 * power))
    keep = (alpha >= config.alpha_cutoff) & (power <= config.extent_sigma**2)
    return np.where(keep, alpha, 0.0)


def project_splats(
    snapshot: SceneSnapshot,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    config: RenderConfig,
) -> ProjectedSplats:
    """Project every Gaussian, cull, and sort by depth (ties by index).

    Raises:
        RenderError: naming the first Gaussian with a non-finite projection.
    """
    n = len(snapshot)
    cam = pose.transform(snapshot.positions) if n else np.zeros((0, 3))
    front = np.flatnonzero(cam[:, 2] > config.near_plane)
    if len(front) == 0:
        return _empty_splats()

    p = cam[front]
    z = p[:, 2]
    fx, fy = intrinsics.fx, intrinsics.fy
    J = np.zeros((len(front), 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * p[:, 0] / (z * z)
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * p[:, 1] / (z * z)
    T = J @ pose.rotation_matrix
    sigma = build_covariances(snapshot.scales[front], snapshot.rotations[front])
    cov = T @ sigma @ np.transpose(T, (0, 2, 1))
    a = cov[:, 0, 0] + config.cov2d_regularizer
    b = 0.5 * (cov[:, 0, 1] + cov[:, 1, 0])
    c = cov[:, 1, 1] + config.cov2d_regularizer
    means = np.stack([fx * p[:, 0] / z + intrinsics.cx, fy * p[:, 1] / z + intrinsics.cy], axis=1)

    finite = np.isfinite(a) & np.isfinite(b) & np.isfinite(c) & np.all(np.isfinite(means), axis=1)
    if not np.all(finite):
        bad = int(front[np.flatnonzero(~finite)[0]])
        raise RenderError(f"Gaussian {bad} projected to non-finite values")

    det = a * c - b * b
    if np.any(det <= 0):
        bad = int(front[np.flatnonzero(det <= 0)[0]])
        raise RenderError(f"Gaussian {bad} has a singular 2D covariance")
    conics = np.stack([c / det, -b / det, a / det], axis=1)
    mid = 0.5 * (a + c)
    lambda_max = mid + np.sqrt(np.maximum(0.1, mid * mid - det))
    radii = config.extent_sigma * np.sqrt(lambda_max)

    on_screen = (
        (means[:, 0] + radii >= 0)
        & (means[:, 0] - radii <= intrinsics.width - 1)
        & (means[:, 1] + radii >= 0)
        & (means[:, 1] - radii <= intrinsics.height - 1)
    )
    keep = np.flatnonzero(on_screen)
    indices = front[keep]
    order = np.lexsort((indices, z[keep]))
    keep, indices = keep[order], indices[order]

    return ProjectedSplats(
        indices=indices,
        means=means[keep],
        conics=conics[keep],
        depths=z[keep],
        radii=radii[keep],
        opacities=np.asarray(snapshot.opacities)[indices],
        colors=np.asarray(snapshot.colors)[indices],
        labels=np.asarray(snapshot.labels)[indices],
    )


def _empty_splats() -> ProjectedSplats:
    return ProjectedSplats(
        indices=np.zeros(0, dtype=np.int64),
        means=np.zeros((0, 2)),
        conics=np.zeros((0, 3)),
        depths=np.zeros(0),
        radii=np.zeros(0),
        opacities=np.zeros(0),
        colors=np.zeros((0, 3)),
        labels=np.zeros(0, dtype=np.uint32),
    )
