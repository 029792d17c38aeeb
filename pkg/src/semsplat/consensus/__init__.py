"""Confidence-based 2D label consensus."""

from semsplat.consensus.consensus import (
    ConsensusOutcome,
    LabelConsensus,
    PartOverwrite,
    apply_part_decay,
    merge_tables,
    resolve_consensus,
    update_input_confidence,
)
from semsplat.consensus.matching import (
    InputSegmentation,
    Match,
    MatchClassification,
    MatchKind,
    OverlapStats,
    area_weighted_confidence,
    classify_matches,
    overlap_stats,
)

__all__ = [
    "ConsensusOutcome",
    "InputSegmentation",
    "LabelConsensus",
    "Match",
    "MatchClassification",
    "MatchKind",
    "OverlapStats",
    "PartOverwrite",
    "apply_part_decay",
    "area_weighted_confidence",
    "classify_matches",
    "merge_tables",
    "overlap_stats",
    "resolve_consensus",
    "update_input_confidence",
]
