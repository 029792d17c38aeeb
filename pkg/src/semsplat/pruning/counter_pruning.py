"""Segmentation counter pruning.

For a fully matched pair (ℓ_s, ℓ_r) the pixels where the two masks disagree
are the symmetric difference S. Gaussians recorded in the top-K matrix inside
S with label ℓ_r are counter Gaussians; those too large along any axis are
removed.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from semsplat.config import PruningConfig
from semsplat.scene.scene import GaussianScene
from semsplat.voting.label_map import LabelMap
from semsplat.voting.voting import TopKContributorMatrix

logger = logging.getLogger(__name__)


@dataclass
class PruneReport:
    """Counter Gaussians found and removed in one pass."""

    counter_candidates: set[int] = field(default_factory=set)
    pruned: set[int] = field(default_factory=set)
    pruned_max_scale: dict[int, float] = field(default_factory=dict)

    def merge(self, other: "PruneReport") -> None:
        """Absorb another report."""
        self.counter_candidates |= other.counter_candidates
        self.pruned |= other.pruned
        self.pruned_max_scale.update(other.pruned_max_scale)


def symmetric_difference_pixels(mask_s: np.ndarray, mask_r: np.ndarray) -> np.ndarray:
    """Pixels in exactly one of two same-shaped boolean masks."""
    if np.shape(mask_s) != np.shape(mask_r):
        raise ValueError(f"Mask shapes differ: {np.shape(mask_s)} vs {np.shape(mask_r)}")
    return np.logical_xor(mask_s, mask_r)


def find_counter_gaussians(
    scene: GaussianScene,
    region: np.ndarray,
    label_r: int,
    topk: TopKContributorMatrix,
    theta: float,
) -> PruneReport:
    """Counter candidates of one region and the ones exceeding theta (no edit)."""
    if theta <= 0:
        raise ValueError(f"Invalid theta {theta}. Must be positive.")
    if not np.any(region):
        return PruneReport()
    candidates = topk.gaussians_with_label(region, label_r)
    candidates = candidates[candidates < len(scene)]
    # relabels committed since the render take the Gaussian out of ℓ_r
    candidates = candidates[scene.labels[candidates] == label_r]
    max_scale = scene.scales[candidates].max(axis=1) if len(candidates) else np.zeros(0)
    oversized = max_scale > theta
    return PruneReport(
        counter_candidates={int(g) for g in candidates},
        pruned={int(g) for g in candidates[oversized]},
        pruned_max_scale={
            int(g): float(s)
            for g, s in zip(candidates[oversized], max_scale[oversized], strict=True)
        },
    )


def counter_prune(
    scene: GaussianScene,
    region: np.ndarray,
    label_r: int,
    topk: TopKContributorMatrix,
    theta: float = 0.10,
) -> PruneReport:
    """Remove counter Gaussians of ℓ_r inside S whose max scale exceeds theta."""
    report = find_counter_gaussians(scene, region, label_r, topk, theta)
    if report.pruned:
        scene.remove_indices(report.pruned)
        logger.debug(f"Pruned {len(report.pruned)} counter Gaussians of label {label_r}")
    return report


class CounterPruner:
    """Prunes counter Gaussians over every fully matched pair of a frame.

    Candidates from all pairs are gathered against the same top-K matrix and
    removed in one edit so that matrix indices stay valid.
    """

    def __init__(self, config: PruningConfig | None = None):
        """Initialize pruner."""
        self.config = config or PruningConfig()

    def prune_pairs(
        self,
        scene: GaussianScene,
        input_map: LabelMap,
        rendered: LabelMap,
        pairs: Iterable[tuple[int, int]],
        topk: TopKContributorMatrix,
    ) -> PruneReport:
        """Prune counter Gaussians for (input label, rendered label) pairs."""
        report = PruneReport()
        if not self.config.enabled:
            return report
        for label_s, label_r in pairs:
            region = symmetric_difference_pixels(
                input_map.labels == label_s, rendered.labels == label_r
            )
            report.merge(find_counter_gaussians(scene, region, label_r, topk, self.config.theta))
        if report.pruned:
            scene.remove_indices(report.pruned)
            logger.info(
                f"Pruned {len(report.pruned)} of {len(report.counter_candidates)} "
                f"counter candidates"
            )
        return report
