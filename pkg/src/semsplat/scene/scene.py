"""Labeled Gaussian scene with bulk edits and object-level manipulation."""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from semsplat.errors import GaussianValidationError
from semsplat.scene.gaussian import (
    LabeledGaussian,
    build_covariances,
    validate_gaussian_arrays,
)
from semsplat.scene.registry import (
    BACKGROUND_LABEL,
    LabelClassTable,
    LabelRegistry,
    SegmentRecord,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneSnapshot:
    """Read-only copy of the scene arrays taken for one render."""

    positions: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    opacities: np.ndarray
    colors: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def covariances(self) -> np.ndarray:
        """Reconstruct the (N, 3, 3) world covariances."""
        return build_covariances(self.scales, self.rotations)


class GaussianScene:
    """Labeled 3D Gaussian scene plus its label registry.

    Edits mutate the scene in place and are all-or-nothing: a rejected edit
    leaves every array and record untouched. Renderers read a SceneSnapshot.
    """

    def __init__(self, max_labels: int = 2000):
        """Initialize an empty scene."""
        self.positions = np.zeros((0, 3))
        self.scales = np.zeros((0, 3))
        self.rotations = np.zeros((0, 4))
        self.opacities = np.zeros(0)
        self.colors = np.zeros((0, 3))
        self.labels = np.zeros(0, dtype=np.uint32)
        self.registry = LabelRegistry(max_labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def label_registry(self) -> dict[int, SegmentRecord]:
        """Per-label segment records."""
        return self.registry.records

    @property
    def global_table(self) -> LabelClassTable:
        """Global Label-Class table."""
        return self.registry.global_table

    @property
    def next_label(self) -> int:
        """Next label id the registry will hand out."""
        return self.registry.next_label

    def gaussian(self, index: int) -> LabeledGaussian:
        """Return one Gaussian as a value object."""
        self._check_indices([index])
        return LabeledGaussian(
            position=tuple(self.positions[index].tolist()),
            scale=tuple(self.scales[index].tolist()),
            rotation=tuple(self.rotations[index].tolist()),
            opacity=float(self.opacities[index]),
            color=tuple(self.colors[index].tolist()),
            label=int(self.labels[index]),
        )

    def snapshot(self) -> SceneSnapshot:
        """Copy the arrays into an immutable snapshot."""
        arrays = [
            self.positions.copy(),
            self.scales.copy(),
            self.rotations.copy(),
            self.opacities.copy(),
            self.colors.copy(),
            self.labels.copy(),
        ]
        for array in arrays:
            array.setflags(write=False)
        return SceneSnapshot(*arrays)

    def add_gaussians(self, batch: Sequence[LabeledGaussian]) -> int:
        """Append a batch of Gaussians, rejecting it whole on any violation."""
        if not batch:
            return 0
        try:
            arrays = {
                "positions": [g.position for g in batch],
                "scales": [g.scale for g in batch],
                "rotations": [g.rotation for g in batch],
                "opacities": [g.opacity for g in batch],
                "colors": [g.color for g in batch],
            }
            fields = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}
            labels = np.asarray([g.label for g in batch], dtype=np.int64)
        except (TypeError, ValueError) as e:
            raise GaussianValidationError(f"Malformed Gaussian batch: {e}") from e
        return self.add_arrays(labels=labels, **fields)

    def add_arrays(
        self,
        positions: np.ndarray,
        scales: np.ndarray,
        rotations: np.ndarray,
        opacities: np.ndarray,
        colors: np.ndarray,
        labels: np.ndarray,
    ) -> int:
        """Append Gaussians given as parallel arrays.

        Unknown labels get a SegmentRecord with confidence 0.0.

        Raises:
            GaussianValidationError: if any element violates an invariant.
        """
        labels = np.asarray(labels).astype(np.int64).reshape(-1)
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        scales = np.asarray(scales, dtype=np.float64).reshape(-1, 3)
        rotations = np.asarray(rotations, dtype=np.float64).reshape(-1, 4)
        opacities = np.asarray(opacities, dtype=np.float64).reshape(-1)
        colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
        validate_gaussian_arrays(positions, scales, rotations, opacities, colors, labels)
        if len(labels) == 0:
            return 0

        new_labels = sorted(
            {int(label) for label in np.unique(labels)} - {BACKGROUND_LABEL}
            - set(self.registry.records)
        )
        for label in new_labels:
            if label > self.registry.max_labels:
                raise GaussianValidationError(
                    f"Label {label} exceeds the budget of {self.registry.max_labels}"
                )
        for label in new_labels:
            self.registry.ensure(label, confidence=0.0)

        self.positions = np.concatenate([self.positions, positions])
        self.scales = np.concatenate([self.scales, scales])
        self.rotations = np.concatenate([self.rotations, rotations])
        self.opacities = np.concatenate([self.opacities, opacities])
        self.colors = np.concatenate([self.colors, colors])
        self.labels = np.concatenate([self.labels, labels.astype(np.uint32)])
        self._refresh_counts()
        return len(labels)

    def relabel(self, ids: Iterable[int], target: int) -> int:
        """Set the label of exactly the listed Gaussians to target.

        Returns the number of Gaussians whose label actually changed.

        Raises:
            IndexError: naming the first out-of-range index; nothing is applied.
        """
        index_array = np.fromiter((int(i) for i in ids), dtype=np.int64)
        if len(index_array) == 0:
            return 0
        self._check_indices(index_array)
        if target != BACKGROUND_LABEL:
            self.registry.ensure(target)
        changed = int(np.count_nonzero(self.labels[index_array] != target))
        self.labels[index_array] = target
        if changed:
            self._refresh_counts()
        return changed

    def remove_label(self, target: int) -> int:
        """Remove every Gaussian carrying target along with its records.

        Returns the number of Gaussians removed; unknown labels are a no-op.

        Raises:
            ValueError: if target is the background label.
        """
        if target == BACKGROUND_LABEL:
            raise ValueError("Background label 0 cannot be removed")
        mask = self.labels == target
        if target not in self.registry and not np.any(mask):
            logger.warning(f"Label {target} not present in scene, nothing removed")
            return 0
        removed = int(np.count_nonzero(mask))
        self._keep(~mask)
        self.registry.drop(target)
        logger.info(f"Removed label {target} ({removed} Gaussians)")
        return removed

    def remove_indices(self, ids: Iterable[int]) -> int:
        """Remove the listed Gaussians; indices of later Gaussians shift down."""
        index_array = np.unique(np.fromiter((int(i) for i in ids), dtype=np.int64))
        if len(index_array) == 0:
            return 0
        self._check_indices(index_array)
        keep = np.ones(len(self), dtype=bool)
        keep[index_array] = False
        self._keep(keep)
        return len(index_array)

    def label_census(self) -> dict[int, int]:
        """Exact per-label Gaussian counts, zero-count labels omitted."""
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts, strict=True)}

    def labels_for_class(self, class_name: str) -> list[int]:
        """Labels present in the scene whose global class matches the name."""
        census = self.label_census()
        return [
            label
            for label in self.global_table.labels_for_class(class_name)
            if label in census
        ]

    def translate_label(self, target: int, offset: Sequence[float]) -> int:
        """Move every Gaussian of a label by a world-space offset."""
        mask = self._label_mask(target)
        if mask is None:
            return 0
        self.positions[mask] += np.asarray(offset, dtype=np.float64).reshape(1, 3)
        return int(np.count_nonzero(mask))

    def rotate_label(self, target: int, rotation: Sequence[float]) -> int:
        """Rotate a labeled object about its centroid by a (w, x, y, z) quaternion."""
        mask = self._label_mask(target)
        if mask is None:
            return 0
        w, x, y, z = np.asarray(rotation, dtype=np.float64)
        turn = Rotation.from_quat([x, y, z, w])
        centroid = self.positions[mask].mean(axis=0)
        self.positions[mask] = turn.apply(self.positions[mask] - centroid) + centroid
        own = Rotation.from_quat(np.roll(self.rotations[mask], -1, axis=1))
        composed = np.roll((turn * own).as_quat(), 1, axis=1)
        composed = np.where(composed[:, :1] < 0, -composed, composed)
        self.rotations[mask] = composed / np.linalg.norm(composed, axis=1, keepdims=True)
        return int(np.count_nonzero(mask))

    def _label_mask(self, target: int) -> np.ndarray | None:
        mask = self.labels == target
        if not np.any(mask):
            logger.warning(f"Label {target} not present in scene, nothing moved")
            return None
        return mask

    def _check_indices(self, indices: Iterable[int]) -> None:
        index_array = np.asarray(list(indices), dtype=np.int64)
        bad = (index_array < 0) | (index_array >= len(self))
        if np.any(bad):
            raise IndexError(
                f"Gaussian index {int(index_array[bad][0])} out of range "
                f"for scene of {len(self)}"
            )

    def _keep(self, keep: np.ndarray) -> None:
        self.positions = self.positions[keep]
        self.scales = self.scales[keep]
        self.rotations = self.rotations[keep]
        self.opacities = self.opacities[keep]
        self.colors = self.colors[keep]
        self.labels = self.labels[keep]
        self._refresh_counts()

    def _refresh_counts(self) -> None:
        self.registry.sync_counts(self.label_census())
