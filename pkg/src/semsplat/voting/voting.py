"""Gaussian voting: per-pixel label election from blending weights.

Each contributing Gaussian votes for its label with its compositing weight
w_i = α_i·Π_{j<i}(1−α_j); a pixel takes the label with the highest total
weight. The K heaviest contributors per pixel are kept so that a later label
change at that pixel can be pushed back onto the responsible Gaussians.
"""

import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from semsplat.config import RenderConfig
from semsplat.render.camera import CameraIntrinsics, Pose
from semsplat.render.rasterizer import ContributorBuffer, FrameRender, Rasterizer
from semsplat.scene.registry import BACKGROUND_LABEL
from semsplat.scene.scene import GaussianScene, SceneSnapshot
from semsplat.voting.label_map import LabelMap

logger = logging.getLogger(__name__)

EMPTY_SLOT = -1


def vote_pixel(contributors: Iterable[tuple[int, float]]) -> tuple[int, dict[int, float]]:
    """Elect the label of one pixel from depth-ascending (label, alpha) pairs.

    Returns:
        (winner, tally) where tally maps label to cumulative weight. Ties go to
        the smaller label; an empty sequence elects the background.
    """
    tally: dict[int, float] = {}
    transmittance = 1.0
    for label, alpha in contributors:
        tally[label] = tally.get(label, 0.0) + alpha * transmittance
        transmittance *= 1.0 - alpha
    if not tally:
        return BACKGROUND_LABEL, tally
    winner = min(tally, key=lambda label: (-tally[label], label))
    return winner, tally


@dataclass
class TopKContributorMatrix:
    """The K highest-weight contributors of every pixel.

    Slots hold a pixel's kept contributors in depth order; unused slots hold
    index -1 and weight 0. Labels are the Gaussians' labels at render time.
    """

    index: np.ndarray  # (H, W, K) int64
    label: np.ndarray  # (H, W, K) uint32
    weight: np.ndarray  # (H, W, K) float64

    @property
    def k(self) -> int:
        return int(self.index.shape[2])

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.index.shape[0]), int(self.index.shape[1])

    def at(self, row: int, col: int) -> list[tuple[int, int, float]]:
        """(gaussian_index, label, weight) records of one pixel, weight-descending."""
        index, label, weight = self.index[row, col], self.label[row, col], self.weight[row, col]
        used = np.flatnonzero(index != EMPTY_SLOT)
        order = used[np.argsort(-weight[used], kind="stable")]
        return [(int(index[s]), int(label[s]), float(weight[s])) for s in order]

    def gaussians_with_label(self, pixel_mask: np.ndarray, label: int) -> np.ndarray:
        """Sorted unique Gaussians recorded with label anywhere inside the mask."""
        index = self.index[pixel_mask]
        hit = (index != EMPTY_SLOT) & (self.label[pixel_mask] == label)
        return np.unique(index[hit])

    @classmethod
    def from_buffer(cls, buffer: ContributorBuffer, k: int) -> "TopKContributorMatrix":
        """Keep the k heaviest entries per pixel, stored in depth order.

        Pixels with at most k contributors keep them all; only the crowded
        ones are ranked by weight (ties to the nearer entry).
        """
        height, width = buffer.height, buffer.width
        index = np.full((height * width, k), EMPTY_SLOT, dtype=np.int64)
        label = np.zeros((height * width, k), dtype=np.uint32)
        weight = np.zeros((height * width, k))
        if len(buffer):
            pixel = buffer.pixel_ids()
            keep = buffer.counts[pixel] <= k
            crowded = np.flatnonzero(~keep)
            if len(crowded):
                order = crowded[np.lexsort((crowded, -buffer.weight[crowded], pixel[crowded]))]
                ranked_pixel = pixel[order]
                first = np.ones(len(order), dtype=bool)
                first[1:] = ranked_pixel[1:] != ranked_pixel[:-1]
                rank = np.arange(len(order)) - np.flatnonzero(first)[np.cumsum(first) - 1]
                keep[order[rank < k]] = True
            kept = np.flatnonzero(keep)
            rows = pixel[kept]
            starts = np.zeros(height * width, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=height * width)[:-1], out=starts[1:])
            slots = np.arange(len(kept)) - starts[rows]
            index[rows, slots] = buffer.gaussian_index[kept]
            label[rows, slots] = buffer.label[kept]
            weight[rows, slots] = buffer.weight[kept]
        return cls(
            index=index.reshape(height, width, k),
            label=label.reshape(height, width, k),
            weight=weight.reshape(height, width, k),
        )


@dataclass
class LabelWeightTally:
    """Cumulative weight W_j of every label at every pixel, grouped by pixel."""

    height: int
    width: int
    pixel: np.ndarray  # (E,) row-major pixel id, ascending
    label: np.ndarray  # (E,) ascending within a pixel
    weight: np.ndarray  # (E,)

    def at(self, row: int, col: int) -> dict[int, float]:
        """Label → W_j at one pixel."""
        target = row * self.width + col
        lo, hi = np.searchsorted(self.pixel, [target, target + 1])
        labels, weights = self.label[lo:hi], self.weight[lo:hi]
        return {int(lab): float(w) for lab, w in zip(labels, weights, strict=True)}

    def totals(self) -> np.ndarray:
        """Σ_j W_j per pixel, shape (H, W)."""
        total = np.bincount(self.pixel, weights=self.weight, minlength=self.height * self.width)
        return total.reshape(self.height, self.width)

    def winners(self) -> np.ndarray:
        """Per-pixel argmax label (smaller label on ties), 0 where nothing voted."""
        labels = np.zeros(self.height * self.width, dtype=np.uint32)
        if len(self.pixel):
            first = np.ones(len(self.pixel), dtype=bool)
            first[1:] = self.pixel[1:] != self.pixel[:-1]
            starts = np.flatnonzero(first)
            best = np.maximum.reduceat(self.weight, starts)
            leading = np.flatnonzero(self.weight == best[np.cumsum(first) - 1])
            # labels ascend within a pixel, so the first maximum is the smallest label
            once = np.ones(len(leading), dtype=bool)
            once[1:] = self.pixel[leading[1:]] != self.pixel[leading[:-1]]
            chosen = leading[once]
            labels[self.pixel[chosen]] = self.label[chosen]
        return labels.reshape(self.height, self.width)

    @classmethod
    def from_buffer(cls, buffer: ContributorBuffer) -> "LabelWeightTally":
        """Sum weights per (pixel, label), accumulating in depth order."""
        pixel = buffer.pixel_ids()
        if len(pixel) == 0:
            empty = np.zeros(0, dtype=np.int64)
            return cls(buffer.height, buffer.width, empty, empty.astype(np.uint32), np.zeros(0))
        span = int(buffer.label.max()) + 1
        key = pixel * span + buffer.label.astype(np.int64)
        # entries already ascend by pixel, so the stable sort only reorders within pixels
        order = np.argsort(key, kind="stable")
        key = key[order]
        starts = np.flatnonzero(np.concatenate([[True], key[1:] != key[:-1]]))
        return cls(
            height=buffer.height,
            width=buffer.width,
            pixel=key[starts] // span,
            label=(key[starts] % span).astype(np.uint32),
            weight=np.add.reduceat(buffer.weight[order], starts),
        )


@dataclass
class LabelRender:
    """Everything a voting pass produces for one view."""

    label_map: LabelMap
    topk: TopKContributorMatrix
    tally: LabelWeightTally
    visible: np.ndarray  # sorted unique contributing Gaussian indices
    frame: FrameRender


def votes_from_frame(
    frame: FrameRender, k: int = 50, coverage_min: float = 0.5
) -> LabelRender:
    """Run the election over an already rasterized frame.

    Pixels whose total coverage is below coverage_min render as background.
    """
    if frame.contributors is None:
        raise ValueError("Frame was rendered without contributor recording")
    buffer = frame.contributors
    tally = LabelWeightTally.from_buffer(buffer)
    labels = tally.winners()
    labels[frame.coverage < coverage_min] = BACKGROUND_LABEL
    return LabelRender(
        label_map=LabelMap(labels),
        topk=TopKContributorMatrix.from_buffer(buffer, k),
        tally=tally,
        visible=np.flatnonzero(np.bincount(buffer.gaussian_index)),
        frame=frame,
    )


def render_label_map(
    scene: GaussianScene | SceneSnapshot,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    config: RenderConfig | None = None,
    k: int = 50,
    rasterizer: Rasterizer | None = None,
) -> LabelRender:
    """Render the label map, top-K matrix, weight tally and visible set."""
    config = config or (rasterizer.config if rasterizer else RenderConfig())
    rasterizer = rasterizer or Rasterizer(config)
    frame = rasterizer.render(scene, pose, intrinsics, record_contributors=True)
    return votes_from_frame(frame, k, config.label_coverage_min)


@dataclass
class RelabelCommands:
    """Batch of (pixel, source label, target label) updates; pixels are (row, col)."""

    pixels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    source: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    target: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.source)

    def __iter__(self) -> Iterator[tuple[tuple[int, int], int, int]]:
        for (row, col), src, dst in zip(self.pixels, self.source, self.target, strict=True):
            yield (int(row), int(col)), int(src), int(dst)

    @classmethod
    def over_mask(cls, mask: np.ndarray, source: int, target: int) -> "RelabelCommands":
        """One command per pixel of a boolean mask."""
        rows, cols = np.nonzero(mask)
        n = len(rows)
        return cls(
            pixels=np.stack([rows, cols], axis=1).astype(np.int64),
            source=np.full(n, source, dtype=np.int64),
            target=np.full(n, target, dtype=np.int64),
        )

    @classmethod
    def from_tuples(
        cls, updates: Iterable[tuple[tuple[int, int], int, int]]
    ) -> "RelabelCommands":
        """Build a batch from ((row, col), source, target) tuples."""
        updates = list(updates)
        if not updates:
            return cls()
        return cls(
            pixels=np.asarray([p for p, _, _ in updates], dtype=np.int64).reshape(-1, 2),
            source=np.asarray([s for _, s, _ in updates], dtype=np.int64),
            target=np.asarray([t for _, _, t in updates], dtype=np.int64),
        )

    @classmethod
    def concat(cls, batches: Sequence["RelabelCommands"]) -> "RelabelCommands":
        """Join batches, preserving order."""
        batches = [b for b in batches if len(b)]
        if not batches:
            return cls()
        return cls(
            pixels=np.concatenate([b.pixels for b in batches]),
            source=np.concatenate([b.source for b in batches]),
            target=np.concatenate([b.target for b in batches]),
        )


@dataclass
class RelabelResult:
    """Outcome of pushing label updates through the top-K matrix."""

    relabeled: set[int]
    skipped: int = 0  # updates with no matching Gaussian
    conflicts: int = 0  # Gaussians asked to take more than one target


def relabel_via_topk(
    scene: GaussianScene,
    topk: TopKContributorMatrix,
    updates: RelabelCommands | Iterable[tuple[tuple[int, int], int, int]],
) -> RelabelResult:
    """Relabel the Gaussians recorded at each update's pixel with its source label.

    When two updates send one Gaussian to different targets the earlier update
    wins.

    Raises:
        IndexError: if an update references a pixel outside the matrix.
    """
    commands = updates
    if not isinstance(updates, RelabelCommands):
        commands = RelabelCommands.from_tuples(updates)
    if len(commands) == 0:
        return RelabelResult(relabeled=set())

    height, width = topk.shape
    rows, cols = commands.pixels[:, 0], commands.pixels[:, 1]
    outside = (rows < 0) | (rows >= height) | (cols < 0) | (cols >= width)
    if np.any(outside):
        bad = commands.pixels[np.flatnonzero(outside)[0]]
        raise IndexError(f"Relabel pixel ({bad[0]}, {bad[1]}) outside {height}x{width} map")

    changing = commands.source != commands.target
    slot_index = topk.index[rows, cols]
    match = (
        (slot_index != EMPTY_SLOT)
        & (topk.label[rows, cols] == commands.source[:, None])
        & changing[:, None]
    )
    skipped = int(np.count_nonzero(changing & ~match.any(axis=1)))
    command_ids, slots = np.nonzero(match)
    if len(command_ids) == 0:
        if skipped:
            logger.debug(f"Skipped {skipped} relabel updates with no matching Gaussian")
        return RelabelResult(relabeled=set(), skipped=skipped)

    gaussians = slot_index[command_ids, slots]
    targets = commands.target[command_ids]
    unique, first = np.unique(gaussians, return_index=True)
    chosen = targets[first]

    pairs = np.unique(np.stack([gaussians, targets], axis=1), axis=0)
    conflicts = len(pairs) - len(unique)
    if conflicts:
        logger.warning(f"{conflicts} Gaussians received conflicting relabel targets")
    if skipped:
        logger.debug(f"Skipped {skipped} relabel updates with no matching Gaussian")

    for target in np.unique(chosen):
        scene.relabel(unique[chosen == target], int(target))
    return RelabelResult(
        relabeled={int(g) for g in unique}, skipped=skipped, conflicts=conflicts
    )


def compute_completeness(scene: GaussianScene, visible: np.ndarray) -> dict[int, float]:
    """Fraction of each label's Gaussians that contributed to the view.

    Labels with no Gaussians are omitted; background is not a label here.
    """
    census = scene.label_census()
    visible = np.asarray(visible, dtype=np.int64)
    seen_values, seen_counts = np.unique(scene.labels[visible], return_counts=True)
    seen = {int(v): int(c) for v, c in zip(seen_values, seen_counts, strict=True)}
    return {
        label: seen.get(label, 0) / count
        for label, count in census.items()
        if label != BACKGROUND_LABEL and count > 0
    }


def coverage_ratio_map(rendered: LabelMap, completeness: dict[int, float]) -> np.ndarray:
    """Per-pixel completeness of the rendered object; background reads 1.0.

    Raises:
        KeyError: naming the first rendered label without a completeness entry.
    """
    values, inverse = np.unique(rendered.labels, return_inverse=True)
    lookup = np.ones(len(values))
    for i, value in enumerate(values):
        label = int(value)
        if label == BACKGROUND_LABEL:
            continue
        if label not in completeness:
            raise KeyError(f"No completeness entry for rendered label {label}")
        lookup[i] = completeness[label]
    return lookup[inverse].reshape(rendered.shape)
