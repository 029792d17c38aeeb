"""Gaussian voting label rendering."""

from semsplat.voting.label_map import LabelMap, select_label_at_pixel, select_labels_in_bbox
from semsplat.voting.voting import (
    LabelRender,
    LabelWeightTally,
    RelabelCommands,
    RelabelResult,
    TopKContributorMatrix,
    compute_completeness,
    coverage_ratio_map,
    relabel_via_topk,
    render_label_map,
    vote_pixel,
    votes_from_frame,
)

__all__ = [
    "LabelMap",
    "LabelRender",
    "LabelWeightTally",
    "RelabelCommands",
    "RelabelResult",
    "TopKContributorMatrix",
    "compute_completeness",
    "coverage_ratio_map",
    "relabel_via_topk",
    "render_label_map",
    "select_label_at_pixel",
    "select_labels_in_bbox",
    "vote_pixel",
    "votes_from_frame",
]
