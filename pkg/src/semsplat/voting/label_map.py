"""Instance label images and prompt-based label selection."""

from dataclasses import dataclass

import numpy as np

from semsplat.errors import DimensionMismatchError


@dataclass
class LabelMap:
    """Row-major unsigned 32-bit instance label image; 0 is background."""

    labels: np.ndarray

    def __post_init__(self):
        """Normalize dtype and check rank."""
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise ValueError(f"Label map must be 2D, got shape {self.labels.shape}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 2**32 - 1):
            raise ValueError("Label map values must be unsigned 32-bit")
        self.labels = self.labels.astype(np.uint32, copy=False)

    @classmethod
    def blank(cls, height: int, width: int) -> "LabelMap":
        """All-background map."""
        return cls(np.zeros((height, width), dtype=np.uint32))

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def label_set(self) -> set[int]:
        """Distinct nonzero labels."""
        return {int(v) for v in np.unique(self.labels) if v != 0}

    def areas(self) -> dict[int, int]:
        """Pixel count of every nonzero label."""
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts, strict=True) if v != 0}

    def mask(self, label: int) -> np.ndarray:
        """Boolean support of one label."""
        return self.labels == label

    def remap(self, mapping: dict[int, int]) -> "LabelMap":
        """Apply a label mapping; unmapped labels pass through unchanged."""
        if not mapping:
            return LabelMap(self.labels.copy())
        values, inverse = np.unique(self.labels, return_inverse=True)
        lookup = np.array([mapping.get(int(v), int(v)) for v in values], dtype=np.uint32)
        return LabelMap(lookup[inverse].reshape(self.shape))

    def check_shape(self, other_shape: tuple[int, ...], what: str = "raster") -> None:
        """Raise DimensionMismatchError unless other_shape matches this map."""
        if tuple(other_shape[:2]) != self.shape:
            raise DimensionMismatchError(
                f"{what} shape {tuple(other_shape)} does not match label map {self.shape}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.labels, other.labels))


def select_label_at_pixel(label_map: LabelMap, pixel: tuple[int, int]) -> int:
    """Resolve a point prompt (row, col) to the label rendered there.

    Raises:
        IndexError: if the pixel lies outside the map.
    """
    row, col = pixel
    if not (0 <= row < label_map.height and 0 <= col < label_map.width):
        raise IndexError(f"Pixel {pixel} outside {label_map.height}x{label_map.width} map")
    return int(label_map.labels[row, col])


def select_labels_in_bbox(
    label_map: LabelMap,
    bbox: tuple[int, int, int, int],
    min_fraction: float = 0.5,
) -> list[int]:
    """Resolve a box prompt (x0, y0, x1, y1) to labels mostly inside it.

    A label is selected when at least min_fraction of its pixels fall inside
    the box. Results are ordered by pixel count inside the box, largest first.
    """
    x0, y0, x1, y1 = (int(v) for v in bbox)
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(label_map.width, x1), min(label_map.height, y1)
    if x1 <= x0 or y1 <= y0:
        return []
    totals = label_map.areas()
    window = LabelMap(label_map.labels[y0:y1, x0:x1]).areas()
    chosen = [
        (count, label)
        for label, count in window.items()
        if count >= min_fraction * totals[label]
    ]
    return [label for _, label in sorted(chosen, key=lambda item: (-item[0], item[1]))]
