"""Overlap statistics and match classification between input and rendered labels."""

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from sklearn.metrics.cluster import contingency_matrix

from semsplat.errors import DimensionMismatchError
from semsplat.scene.registry import BACKGROUND_LABEL, LabelClassTable
from semsplat.voting.label_map import LabelMap

logger = logging.getLogger(__name__)


@dataclass
class InputSegmentation:
    """One frame's 2D segmentation: label map, per-label confidence, class table."""

    label_map: LabelMap
    confidences: dict[int, float]
    table: LabelClassTable = field(default_factory=LabelClassTable)

    def __post_init__(self):
        """Validate confidences against the map."""
        missing = sorted(self.label_map.label_set() - set(self.confidences))
        if missing:
            raise ValueError(f"Input label {missing[0]} has no confidence entry")
        for label, value in self.confidences.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Confidence {value} for input label {label} not in [0, 1]")

    def confidence_map(self) -> np.ndarray:
        """Per-pixel input confidence image; background pixels are 0."""
        values, inverse = np.unique(self.label_map.labels, return_inverse=True)
        lookup = np.array([self.confidences.get(int(v), 0.0) if v else 0.0 for v in values])
        return lookup[inverse].reshape(self.label_map.shape)


class MatchKind(Enum):
    """Relationship between an input label and the rendered labels."""

    FULL_MATCH = "full_match"
    PART_OF = "part_of"
    WHOLE_OF = "whole_of"
    NEW = "new"
    BACKGROUND = "background"


@dataclass(frozen=True)
class Match:
    """Classification of one input label."""

    kind: MatchKind
    rendered: tuple[int, ...] = ()
    input_ratio: float = 0.0  # r_s against the counterpart
    rendered_ratio: float = 0.0  # r_r against the counterpart

    @property
    def target(self) -> int:
        """Counterpart rendered label (first of the set for WholeOf)."""
        return self.rendered[0] if self.rendered else BACKGROUND_LABEL


class MatchClassification(Mapping[int, Match]):
    """Exactly one Match per nonzero input label."""

    def __init__(self, matches: Mapping[int, Match]):
        """Initialize classification."""
        self._matches = dict(sorted(matches.items()))

    def __getitem__(self, label: int) -> Match:
        return self._matches[label]

    def __iter__(self) -> Iterator[int]:
        return iter(self._matches)

    def __len__(self) -> int:
        return len(self._matches)

    def of_kind(self, kind: MatchKind) -> dict[int, Match]:
        """Input labels of one kind, in label order."""
        return {label: m for label, m in self._matches.items() if m.kind is kind}

    def part_groups(self) -> dict[int, list[int]]:
        """Rendered label → input labels classified PartOf it, both sorted."""
        groups: dict[int, list[int]] = {}
        for label, match in self.of_kind(MatchKind.PART_OF).items():
            groups.setdefault(match.target, []).append(label)
        return dict(sorted(groups.items()))

    def counts(self) -> dict[str, int]:
        """Number of input labels per kind."""
        return {kind.value: len(self.of_kind(kind)) for kind in MatchKind}


@dataclass
class OverlapStats:
    """Co-occurrence counts of input and rendered labels, background included."""

    input_labels: np.ndarray  # sorted distinct values of the input map
    rendered_labels: np.ndarray  # sorted distinct values of the rendered map
    counts: np.ndarray  # (len(input_labels), len(rendered_labels)) pixel counts

    def intersection(self, input_label: int, rendered_label: int) -> int:
        """|ℓ_s ∩ ℓ_r| in pixels."""
        i = np.searchsorted(self.input_labels, input_label)
        j = np.searchsorted(self.rendered_labels, rendered_label)
        if (
            i >= len(self.input_labels)
            or j >= len(self.rendered_labels)
            or self.input_labels[i] != input_label
            or self.rendered_labels[j] != rendered_label
        ):
            return 0
        return int(self.counts[i, j])

    @property
    def input_areas(self) -> dict[int, int]:
        """|ℓ_s| for every nonzero input label."""
        sums = self.counts.sum(axis=1)
        return {int(v): int(s) for v, s in zip(self.input_labels, sums, strict=True) if v}

    @property
    def rendered_areas(self) -> dict[int, int]:
        """|ℓ_r| for every nonzero rendered label."""
        sums = self.counts.sum(axis=0)
        return {int(v): int(s) for v, s in zip(self.rendered_labels, sums, strict=True) if v}

    def object_block(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nonzero input labels, nonzero rendered labels and their count block."""
        rows = np.flatnonzero(self.input_labels != BACKGROUND_LABEL)
        cols = np.flatnonzero(self.rendered_labels != BACKGROUND_LABEL)
        return self.input_labels[rows], self.rendered_labels[cols], self.counts[np.ix_(rows, cols)]


def overlap_stats(input_map: LabelMap, rendered_map: LabelMap) -> OverlapStats:
    """Exact per-pair intersections and per-label areas.

    Raises:
        DimensionMismatchError: if the maps differ in shape.
    """
    input_map.check_shape(rendered_map.shape, "rendered label map")
    truth = input_map.labels.ravel()
    pred = rendered_map.labels.ravel()
    if truth.size == 0:
        empty = np.zeros(0, dtype=np.uint32)
        return OverlapStats(empty, empty, np.zeros((0, 0), dtype=np.int64))
    counts = contingency_matrix(truth, pred)
    return OverlapStats(
        input_labels=np.unique(truth),
        rendered_labels=np.unique(pred),
        counts=np.asarray(counts, dtype=np.int64),
    )


def classify_matches(
    stats: OverlapStats, tau1: float = 0.85, tau2: float = 0.9, tau3: float = 0.1
) -> MatchClassification:
    """Classify every nonzero input label against the rendered labels.

    Both ratios are taken over full label areas: r_s = |∩|/|ℓ_s| and
    r_r = |∩|/|ℓ_r|, so pixels on the other map's background count against
    the match. A label whose best r_s is below tau3 is New.

    FullMatch (r_s ≥ tau1 and r_r ≥ tau1) is settled first, greedily by
    descending intersection and one-to-one. The remaining labels are tested
    against their max-intersection counterpart for PartOf (r_s ≥ tau2,
    r_r < tau1), then WholeOf (the rendered labels with r_r ≥ tau2 jointly
    cover ≥ tau2 of the label), then New; anything left is Background.
    """
    s_labels, r_labels, block = stats.object_block()
    if len(s_labels) == 0:
        return MatchClassification({})

    areas_s = stats.input_areas
    areas_r = stats.rendered_areas
    full_area = np.array([areas_s[int(s)] for s in s_labels], dtype=np.float64)
    rendered_area = np.array([areas_r[int(r)] for r in r_labels], dtype=np.float64)
    r_s = block / full_area[:, None]
    r_r = block / rendered_area[None, :]

    matches: dict[int, Match] = {}
    taken: set[int] = set()
    pairs = np.argwhere((r_s >= tau1) & (r_r >= tau1) & (block > 0))
    ranked = sorted(
        ((int(i), int(j)) for i, j in pairs),
        key=lambda ij: (-int(block[ij]), int(s_labels[ij[0]]), int(r_labels[ij[1]])),
    )
    for i, j in ranked:
        label_s, label_r = int(s_labels[i]), int(r_labels[j])
        if label_s in matches or label_r in taken:
            continue
        matches[label_s] = Match(
            MatchKind.FULL_MATCH, (label_r,), float(r_s[i, j]), float(r_r[i, j])
        )
        taken.add(label_r)

    for i, value in enumerate(s_labels):
        label_s = int(value)
        if label_s in matches:
            continue
        row = block[i]
        best = int(np.argmax(row)) if len(row) else 0
        if len(row) == 0 or row[best] < tau3 * full_area[i]:
            matches[label_s] = Match(MatchKind.NEW)
            continue

        best_r = int(r_labels[best])
        if r_s[i, best] >= tau2 and r_r[i, best] < tau1:
            matches[label_s] = Match(
                MatchKind.PART_OF, (best_r,), float(r_s[i, best]), float(r_r[i, best])
            )
            continue

        contained = np.flatnonzero((r_r[i] >= tau2) & (row > 0))
        if len(contained) and row[contained].sum() >= tau2 * full_area[i]:
            matches[label_s] = Match(
                MatchKind.WHOLE_OF,
                tuple(int(r_labels[j]) for j in contained),
                float(row[contained].sum() / full_area[i]),
                float(r_r[i, contained].min()),
            )
            continue

        matches[label_s] = Match(
            MatchKind.BACKGROUND, (best_r,), float(r_s[i, best]), float(r_r[i, best])
        )

    classification = MatchClassification(matches)
    logger.debug(f"Match classification: {classification.counts()}")
    return classification


def area_weighted_confidence(parts: Sequence[tuple[float, int]]) -> float:
    """Σ c_i·|ℓ_i| / Σ |ℓ_i| over (confidence, area) pairs.

    Raises:
        ValueError: if parts is empty or an area is not positive.
    """
    if not parts:
        raise ValueError("Area-weighted confidence needs at least one part")
    confidences = np.array([c for c, _ in parts], dtype=np.float64)
    areas = np.array([a for _, a in parts], dtype=np.float64)
    if np.any(areas <= 0):
        raise ValueError(f"Part areas must be positive, got {areas.tolist()}")
    value = float(np.dot(confidences, areas) / areas.sum())
    return min(max(value, float(confidences.min())), float(confidences.max()))
