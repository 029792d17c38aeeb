"""Global label registry and Label-Class tables."""

import logging
from collections.abc import Iterator, Mapping
from dataclasses import dataclass

from semsplat.errors import LabelBudgetExceededError

logger = logging.getLogger(__name__)

NONE_CLASS = "None"
BACKGROUND_LABEL = 0


@dataclass
class SegmentRecord:
    """Map-side state of one instance label."""

    confidence: float = 0.0
    gaussian_count: int = 0
    part_decay_applied: int = 0


@dataclass(frozen=True)
class ClassEntry:
    """Open-set class name and detection score for one label."""

    class_name: str = NONE_CLASS
    score: float = 0.0

    @property
    def is_none(self) -> bool:
        """Check if this entry carries no class."""
        return self.class_name == NONE_CLASS


class LabelClassTable:
    """Association from instance label to open-set class and detection score.

    Labels without an entry read as the None class with score 0.0.
    """

    def __init__(self, entries: Mapping[int, ClassEntry] | None = None):
        """Initialize table."""
        self._entries: dict[int, ClassEntry] = dict(entries or {})

    def get(self, label: int) -> ClassEntry:
        """Get the entry for a label, None class when unmatched."""
        return self._entries.get(label, ClassEntry())

    def set(self, label: int, class_name: str, score: float) -> None:
        """Set the entry for a label."""
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"Detection score {score} for label {label} not in [0, 1]")
        self._entries[label] = ClassEntry(class_name, float(score))

    def remove(self, label: int) -> None:
        """Drop the entry for a label if present."""
        self._entries.pop(label, None)

    def labels_for_class(self, class_name: str) -> list[int]:
        """Return labels whose class matches the name (case-insensitive)."""
        wanted = class_name.lower()
        return sorted(
            label
            for label, entry in self._entries.items()
            if entry.class_name.lower() == wanted
        )

    def copy(self) -> "LabelClassTable":
        """Return an independent copy."""
        return LabelClassTable(self._entries)

    def items(self) -> Iterator[tuple[int, ClassEntry]]:
        """Iterate over (label, entry) pairs in label order."""
        return iter(sorted(self._entries.items()))

    def __contains__(self, label: object) -> bool:
        return label in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelClassTable):
            return NotImplemented
        return self._entries == other._entries


class LabelRegistry:
    """Owns label allocation, per-label confidence and the global class table.

    Label ids are never recycled: next_label only grows.
    """

    def __init__(self, max_labels: int = 2000):
        """Initialize registry."""
        self.max_labels = max_labels
        self.records: dict[int, SegmentRecord] = {}
        self.global_table = LabelClassTable()
        self.next_label = 1

    def allocate(self, confidence: float = 0.0) -> int:
        """Allocate a fresh label seeded with the given confidence.

        Raises:
            LabelBudgetExceededError: if the run already assigned max_labels labels.
        """
        if self.next_label > self.max_labels:
            raise LabelBudgetExceededError(
                f"Label budget of {self.max_labels} exhausted"
            )
        label = self.next_label
        self.next_label += 1
        self.records[label] = SegmentRecord(confidence=_clamp(confidence))
        return label

    def ensure(self, label: int, confidence: float = 0.0) -> SegmentRecord:
        """Register a label introduced from outside allocation (e.g. file input)."""
        if label == BACKGROUND_LABEL:
            raise ValueError("Background label 0 has no segment record")
        record = self.records.get(label)
        if record is None:
            if label > self.max_labels:
                raise LabelBudgetExceededError(
                    f"Label {label} exceeds the budget of {self.max_labels}"
                )
            record = SegmentRecord(confidence=_clamp(confidence))
            self.records[label] = record
            self.next_label = max(self.next_label, label + 1)
        return record

    def confidence(self, label: int) -> float:
        """Get the map-side confidence of a label (0.0 when unknown)."""
        record = self.records.get(label)
        return record.confidence if record else 0.0

    def set_confidence(self, label: int, confidence: float) -> None:
        """Set a label's confidence, clamped to [0, 1]."""
        self.ensure(label).confidence = _clamp(confidence)

    def decay(self, label: int, delta: float) -> float | None:
        """Reduce a label's confidence by delta, flooring at zero.

        Returns the new confidence, or None when the label is unknown.
        """
        record = self.records.get(label)
        if record is None:
            logger.warning(f"Cannot decay unknown label {label}")
            return None
        record.confidence = max(0.0, record.confidence - delta)
        record.part_decay_applied += 1
        return record.confidence

    def drop(self, label: int) -> None:
        """Forget a label and its class entry."""
        self.records.pop(label, None)
        self.global_table.remove(label)

    def sync_counts(self, census: Mapping[int, int]) -> None:
        """Refresh cached Gaussian counts from an exact census."""
        for label, record in self.records.items():
            record.gaussian_count = int(census.get(label, 0))

    def sweep_empty(self) -> list[int]:
        """Drop records whose label no longer has any Gaussian."""
        empty = [label for label, r in self.records.items() if r.gaussian_count == 0]
        for label in empty:
            self.drop(label)
        if empty:
            logger.debug(f"Swept {len(empty)} empty labels")
        return empty

    def __contains__(self, label: object) -> bool:
        return label in self.records

    def __len__(self) -> int:
        return len(self.records)


def _clamp(value: float) -> float:
    return float(min(1.0, max(0.0, value)))
