"""Pinhole camera intrinsics and world-to-camera poses."""

from dataclasses import dataclass, field

import numpy as np

from semsplat.scene.gaussian import (
    QUAT_NORM_TOLERANCE,
    matrix_to_quat_wxyz,
    quat_wxyz_to_matrix,
)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        """Validate intrinsics after initialization."""
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"Focal lengths must be positive, got {self.fx}, {self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"Invalid image size {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"Principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    @classmethod
    def from_fov(cls, width: int, height: int, fov_x_deg: float) -> "CameraIntrinsics":
        """Square-pixel intrinsics with a centred principal point."""
        focal = 0.5 * width / np.tan(np.radians(fov_x_deg) / 2)
        return cls(
            fx=float(focal),
            fy=float(focal),
            cx=(width - 1) / 2,
            cy=(height - 1) / 2,
            width=width,
            height=height,
        )

    @property
    def shape(self) -> tuple[int, int]:
        """Image shape as (height, width)."""
        return self.height, self.width


@dataclass(frozen=True)
class Pose:
    """World-to-camera rigid transform T = {R, t} with R as a (w, x, y, z) quaternion.

    Camera axes: x right, y down, z forward.
    """

    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        """Validate the quaternion and cache the rotation matrix."""
        norm = float(np.linalg.norm(self.rotation))
        if abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
            raise ValueError(f"Pose quaternion norm {norm} is not within tolerance of 1")
        object.__setattr__(self, "_matrix", quat_wxyz_to_matrix(np.asarray(self.rotation)))

    @classmethod
    def from_matrix(cls, rotation: np.ndarray, translation: np.ndarray) -> "Pose":
        """Build a pose from a world-to-camera rotation matrix and translation."""
        quat = matrix_to_quat_wxyz(rotation)
        return cls(
            rotation=tuple(float(q) for q in quat),
            translation=tuple(float(t) for t in np.asarray(translation).reshape(3)),
        )

    @classmethod
    def from_camera_to_world(
        cls, position: np.ndarray, rotation_wxyz: np.ndarray
    ) -> "Pose":
        """Invert a camera-to-world pose (camera centre + orientation)."""
        R_c2w = quat_wxyz_to_matrix(np.asarray(rotation_wxyz, dtype=np.float64))
        R = R_c2w.T
        return cls.from_matrix(R, -R @ np.asarray(position, dtype=np.float64))

    @property
    def rotation_matrix(self) -> np.ndarray:
        """World-to-camera rotation W."""
        return self._matrix

    @property
    def camera_center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self._matrix.T @ np.asarray(self.translation)

    def camera_to_world(self) -> tuple[np.ndarray, np.ndarray]:
        """Camera centre and (w, x, y, z) camera-to-world orientation."""
        return self.camera_center, matrix_to_quat_wxyz(self._matrix.T)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) world points into the camera frame."""
        return np.asarray(points) @ self._matrix.T + np.asarray(self.translation)

    def inverse_transform(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) camera-frame points back to the world."""
        return (np.asarray(points) - np.asarray(self.translation)) @ self._matrix


def look_at(
    eye: np.ndarray, target: np.ndarray, up: np.ndarray = (0.0, 0.0, 1.0)
) -> Pose:
    """World-to-camera pose of a camera at eye looking at target."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R_c2w = np.stack([right, down, forward], axis=1)
    R = R_c2w.T
    return Pose.from_matrix(R, -R @ eye)
