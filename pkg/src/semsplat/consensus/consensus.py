"""Confidence-based label consensus between an input segmentation and the map."""

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from semsplat.config import ConsensusConfig
from semsplat.consensus.matching import (
    InputSegmentation,
    MatchClassification,
    MatchKind,
    area_weighted_confidence,
    classify_matches,
    overlap_stats,
)
from semsplat.scene.registry import BACKGROUND_LABEL, LabelClassTable, LabelRegistry
from semsplat.voting.label_map import LabelMap
from semsplat.voting.voting import RelabelCommands, TopKContributorMatrix

logger = logging.getLogger(__name__)


@dataclass
class PartOverwrite:
    """A PartOf arbitration won by the input parts."""

    rendered_label: int
    parts: dict[int, int]  # input part → newly allocated label


@dataclass
class ConsensusOutcome:
    """Result of unifying one input segmentation with the rendered map."""

    classification: MatchClassification
    mapping: dict[int, int]  # input label → target label (0 = background)
    consistent_map: LabelMap
    relabel_commands: RelabelCommands
    confidence_updates: dict[int, float] = field(default_factory=dict)
    new_labels: set[int] = field(default_factory=set)
    decayed_labels: set[int] = field(default_factory=set)  # map side
    decayed_input_labels: set[int] = field(default_factory=set)
    part_overwrites: list[PartOverwrite] = field(default_factory=list)


def update_input_confidence(
    segmentation: InputSegmentation, coverage: np.ndarray
) -> InputSegmentation:
    """Scale input confidences by the coverage ratio of what the map renders there.

    Each label's new confidence is the mean of Cov_r·𝓘_s over its pixels.

    Raises:
        DimensionMismatchError: if the coverage image does not match the map.
    """
    label_map = segmentation.label_map
    label_map.check_shape(np.shape(coverage), "coverage ratio map")
    values, inverse = np.unique(label_map.labels, return_inverse=True)
    inverse = inverse.ravel()
    integrated = np.asarray(coverage, dtype=np.float64).ravel()
    integrated = integrated * segmentation.confidence_map().ravel()
    sums = np.bincount(inverse, weights=integrated, minlength=len(values))
    areas = np.bincount(inverse, minlength=len(values))

    confidences = dict(segmentation.confidences)
    for i, value in enumerate(values):
        label = int(value)
        if label != BACKGROUND_LABEL:
            confidences[label] = float(min(1.0, max(0.0, sums[i] / areas[i])))
    return InputSegmentation(label_map, confidences, segmentation.table)


def resolve_consensus(
    segmentation: InputSegmentation,
    rendered: LabelMap,
    registry: LabelRegistry,
    classification: MatchClassification,
    topk: TopKContributorMatrix,
) -> ConsensusOutcome:
    """Arbitrate every classified input label and build the label mapping.

    Allocates labels from the registry for New labels and winning parts;
    every other registry change is returned in the outcome for the caller
    to apply.

    Raises:
        DimensionMismatchError: if the maps differ in shape.
        IndexError: if the top-K matrix does not cover the rendered map.
        LabelBudgetExceededError: if allocation exceeds the label budget.
    """
    input_map = segmentation.label_map
    input_map.check_shape(rendered.shape, "rendered label map")
    if topk.shape != rendered.shape:
        raise IndexError(
            f"Top-K matrix of shape {topk.shape} does not cover map {rendered.shape}"
        )

    confidences = segmentation.confidences
    areas_s = input_map.areas()
    areas_r = rendered.areas()
    outcome = ConsensusOutcome(
        classification=classification,
        mapping={},
        consistent_map=input_map,
        relabel_commands=RelabelCommands(),
    )
    commands: list[RelabelCommands] = []

    for label_s, match in classification.of_kind(MatchKind.FULL_MATCH).items():
        label_r = match.target
        outcome.mapping[label_s] = label_r
        current = outcome.confidence_updates.get(label_r, registry.confidence(label_r))
        outcome.confidence_updates[label_r] = max(current, confidences[label_s])

    for label_r, parts in classification.part_groups().items():
        confidence_r = registry.confidence(label_r)
        mean_s = area_weighted_confidence([(confidences[p], areas_s[p]) for p in parts])
        if confidence_r > mean_s:
            for part in parts:
                outcome.mapping[part] = label_r
                outcome.decayed_input_labels.add(part)
            continue

        overwrite = PartOverwrite(rendered_label=label_r, parts={})
        for part in parts:
            if confidences[part] > confidence_r:
                target = registry.allocate(confidences[part])
                outcome.new_labels.add(target)
                overwrite.parts[part] = target
                outcome.mapping[part] = target
                region = (input_map.labels == part) & (rendered.labels == label_r)
                commands.append(RelabelCommands.over_mask(region, label_r, target))
            else:
                outcome.mapping[part] = label_r
        if overwrite.parts:
            outcome.part_overwrites.append(overwrite)
            logger.debug(f"Input parts {sorted(overwrite.parts)} split rendered label {label_r}")

    for label_s, match in classification.of_kind(MatchKind.WHOLE_OF).items():
        parts = sorted(match.rendered)
        mean_r = area_weighted_confidence(
            [(registry.confidence(p), areas_r[p]) for p in parts]
        )
        whole = input_map.labels == label_s
        if confidences[label_s] > mean_r:
            target = min(parts, key=lambda p: (-areas_r[p], p))
            for part in parts:
                if part != target:
                    region = whole & (rendered.labels == part)
                    commands.append(RelabelCommands.over_mask(region, part, target))
                    outcome.decayed_labels.add(part)
            outcome.confidence_updates[target] = confidences[label_s]
        else:
            target = min(
                parts,
                key=lambda p: (-int(np.count_nonzero(whole & (rendered.labels == p))), p),
            )
            outcome.decayed_input_labels.add(label_s)
        outcome.mapping[label_s] = target

    # labels that won an arbitration this frame keep their confidence
    outcome.decayed_labels -= set(outcome.confidence_updates)

    for label_s in classification.of_kind(MatchKind.NEW):
        target = registry.allocate(confidences[label_s])
        outcome.new_labels.add(target)
        outcome.mapping[label_s] = target

    for label_s in classification.of_kind(MatchKind.BACKGROUND):
        outcome.mapping[label_s] = BACKGROUND_LABEL

    unmapped = rendered.labels == BACKGROUND_LABEL
    for label_s, target in sorted(outcome.mapping.items()):
        if target != BACKGROUND_LABEL:
            region = unmapped & (input_map.labels == label_s)
            if region.any():
                commands.append(RelabelCommands.over_mask(region, BACKGROUND_LABEL, target))

    outcome.relabel_commands = RelabelCommands.concat(commands)
    outcome.consistent_map = input_map.remap(outcome.mapping)
    outcome.confidence_updates = {
        label: float(min(1.0, max(0.0, value)))
        for label, value in outcome.confidence_updates.items()
    }
    return outcome


def apply_part_decay(
    confidences: LabelRegistry | Mapping[int, float],
    decayed: Iterable[int],
    delta: float = 0.06,
) -> dict[int, float]:
    """Lower each decayed label's confidence by delta, flooring at 0.

    A registry is updated in place (its decay counters advance); a plain
    mapping is left untouched. Unknown labels are skipped with a warning.

    Returns:
        New confidence of every decayed label that exists.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"Invalid delta {delta}. Must be in [0, 1].")
    updated: dict[int, float] = {}
    for label in sorted(set(decayed)):
        if isinstance(confidences, LabelRegistry):
            value = confidences.decay(label, delta)
            if value is not None:
                updated[label] = value
        elif label in confidences:
            updated[label] = max(0.0, confidences[label] - delta)
        else:
            logger.warning(f"Cannot decay unknown input label {label}")
    return updated


def merge_tables(
    global_table: LabelClassTable,
    input_table: LabelClassTable,
    mapping: Mapping[int, int],
) -> LabelClassTable:
    """Fold an input Label-Class table into the global one through a mapping.

    Per target, the higher detection score wins; a None entry never replaces
    a named class. Returns a new table.
    """
    merged = global_table.copy()
    for label_s, entry in input_table.items():
        target = mapping.get(label_s)
        if target is None:
            logger.debug(f"Input table label {label_s} has no mapping, skipped")
            continue
        if target == BACKGROUND_LABEL or entry.is_none:
            continue
        existing = merged.get(target)
        if existing.is_none or entry.score > existing.score:
            merged.set(target, entry.class_name, entry.score)
    return merged


class LabelConsensus:
    """Runs the consensus step of one frame against the scene's registry."""

    def __init__(self, config: ConsensusConfig | None = None):
        """Initialize consensus with thresholds and decay."""
        self.config = config or ConsensusConfig()

    def classify(self, input_map: LabelMap, rendered: LabelMap) -> MatchClassification:
        """Overlap statistics followed by match classification."""
        stats = overlap_stats(input_map, rendered)
        return classify_matches(stats, self.config.tau1, self.config.tau2, self.config.tau3)

    def unify(
        self,
        segmentation: InputSegmentation,
        rendered: LabelMap,
        registry: LabelRegistry,
        topk: TopKContributorMatrix,
    ) -> ConsensusOutcome:
        """Classify and resolve; registry edits other than allocation are left to apply()."""
        classification = self.classify(segmentation.label_map, rendered)
        return resolve_consensus(segmentation, rendered, registry, classification, topk)

    def apply(
        self,
        outcome: ConsensusOutcome,
        registry: LabelRegistry,
        input_table: LabelClassTable,
    ) -> dict[int, float]:
        """Commit confidence updates, part decay and the table merge.

        Returns:
            Post-decay confidences of the decayed map labels.
        """
        for label, confidence in outcome.confidence_updates.items():
            registry.set_confidence(label, confidence)
        decayed = apply_part_decay(registry, outcome.decayed_labels, self.config.delta)
        registry.global_table = merge_tables(registry.global_table, input_table, outcome.mapping)
        return decayed
