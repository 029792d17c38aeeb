"""Labeled 3D Gaussian primitive and quaternion helpers."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from semsplat.errors import GaussianValidationError

QUAT_NORM_TOLERANCE = 1e-6
MAX_LABEL = 2**32 - 1


def quat_wxyz_to_matrix(quaternions: np.ndarray) -> np.ndarray:
    """Convert (w, x, y, z) quaternions to rotation matrices.

    Accepts a single quaternion of shape (4,) or a batch of shape (N, 4).
    """
    quaternions = np.asarray(quaternions, dtype=np.float64)
    xyzw = np.roll(quaternions, -1, axis=-1)
    if xyzw.ndim == 2 and len(xyzw) == 0:
        return np.zeros((0, 3, 3))
    return Rotation.from_quat(xyzw).as_matrix()


def matrix_to_quat_wxyz(matrix: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a unit (w, x, y, z) quaternion with w >= 0."""
    xyzw = Rotation.from_matrix(np.asarray(matrix, dtype=np.float64)).as_quat()
    wxyz = np.roll(xyzw, 1, axis=-1)
    if wxyz.ndim == 1:
        if wxyz[0] < 0:
            wxyz = -wxyz
        return wxyz / np.linalg.norm(wxyz)
    wxyz = np.where(wxyz[:, :1] < 0, -wxyz, wxyz)
    return wxyz / np.linalg.norm(wxyz, axis=1, keepdims=True)


def build_covariances(scales: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Reconstruct Σ = R·diag(scale²)·Rᵀ for a batch of Gaussians."""
    scales = np.asarray(scales, dtype=np.float64).reshape(-1, 3)
    R = quat_wxyz_to_matrix(np.asarray(rotations, dtype=np.float64).reshape(-1, 4))
    M = R * scales[:, None, :]
    return M @ np.transpose(M, (0, 2, 1))


def validate_gaussian_arrays(
    positions: np.ndarray,
    scales: np.ndarray,
    rotations: np.ndarray,
    opacities: np.ndarray,
    colors: np.ndarray,
    labels: np.ndarray,
) -> None:
    """Check every Gaussian invariant, naming the first offending index.

    Raises:
        GaussianValidationError: if any element violates an invariant.
    """
    n = len(labels)
    shapes = {
        "position": (positions, (n, 3)),
        "scale": (scales, (n, 3)),
        "rotation": (rotations, (n, 4)),
        "opacity": (opacities, (n,)),
        "color": (colors, (n, 3)),
    }
    for name, (array, shape) in shapes.items():
        if array.shape != shape:
            raise GaussianValidationError(
                f"Field '{name}' has shape {array.shape}, expected {shape}"
            )

    checks = [
        ("position", ~np.all(np.isfinite(positions), axis=1), "must be finite"),
        ("scale", ~np.all(scales > 0, axis=1), "components must be > 0"),
        ("scale", ~np.all(np.isfinite(scales), axis=1), "must be finite"),
        (
            "rotation",
            ~(np.abs(np.linalg.norm(rotations, axis=1) - 1.0) <= QUAT_NORM_TOLERANCE),
            f"quaternion norm must be within {QUAT_NORM_TOLERANCE} of 1",
        ),
        ("opacity", ~((opacities >= 0) & (opacities <= 1)), "must be in [0, 1]"),
        ("color", ~np.all((colors >= 0) & (colors <= 1), axis=1), "must be in [0, 1]"),
        ("label", (labels < 0) | (labels > MAX_LABEL), "must be an unsigned 32-bit value"),
    ]
    for name, bad, rule in checks:
        if np.any(bad):
            index = int(np.flatnonzero(bad)[0])
            raise GaussianValidationError(f"Gaussian {index}: {name} {rule}")


@dataclass
class LabeledGaussian:
    """A 3D Gaussian carrying an explicit instance label.

    Covariance is stored factored as per-axis standard deviations plus a unit
    (w, x, y, z) quaternion; label 0 is the background.
    """

    position: tuple[float, float, float]
    scale: tuple[float, float, float]
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    opacity: float = 1.0
    color: tuple[float, float, float] = (0.5, 0.5, 0.5)
    label: int = 0

    def validate(self) -> None:
        """Raise GaussianValidationError if an invariant does not hold."""
        validate_gaussian_arrays(
            np.asarray([self.position], dtype=np.float64),
            np.asarray([self.scale], dtype=np.float64),
            np.asarray([self.rotation], dtype=np.float64),
            np.asarray([self.opacity], dtype=np.float64),
            np.asarray([self.color], dtype=np.float64),
            np.asarray([self.label], dtype=np.int64),
        )

    def covariance(self) -> np.ndarray:
        """Return the 3×3 world-space covariance matrix."""
        return build_covariances(np.asarray(self.scale), np.asarray(self.rotation))[0]
