"""Segmentation counter pruning."""

from semsplat.pruning.counter_pruning import (
    CounterPruner,
    PruneReport,
    counter_prune,
    find_counter_gaussians,
    symmetric_difference_pixels,
)

__all__ = [
    "CounterPruner",
    "PruneReport",
    "counter_prune",
    "find_counter_gaussians",
    "symmetric_difference_pixels",
]
