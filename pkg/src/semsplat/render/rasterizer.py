"""Tile-based front-to-back alpha compositing with contributor recording."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from semsplat.config import RenderConfig
from semsplat.render.camera import CameraIntrinsics, Pose
from semsplat.render.projection import (
    ProjectedSplats,
    conic_from_cov2d,
    project_covariance,
    project_splats,
    splat_alphas,
)
from semsplat.scene.gaussian import LabeledGaussian
from semsplat.scene.scene import GaussianScene, SceneSnapshot

logger = logging.getLogger(__name__)


@dataclass
class PixelContributor:
    """One Gaussian's contribution at one pixel."""

    gaussian_index: int
    alpha: float
    weight: float  # α_i·Π_{j<i}(1−α_j)
    depth: float
    color: tuple[float, float, float]
    label: int


@dataclass
class ContributorBuffer:
    """Per-pixel contributor sequences in compressed row form.

    Entries of pixel p (row-major id) live in [offsets[p], offsets[p+1]) and
    are depth-ascending.
    """

    height: int
    width: int
    offsets: np.ndarray  # (H*W + 1,) int64
    gaussian_index: np.ndarray  # (M,) int64
    alpha: np.ndarray  # (M,)
    weight: np.ndarray  # (M,)
    depth: np.ndarray  # (M,)
    color: np.ndarray  # (M, 3)
    label: np.ndarray  # (M,) uint32, labels at render time

    def __len__(self) -> int:
        return len(self.gaussian_index)

    @property
    def counts(self) -> np.ndarray:
        """Number of contributors per pixel, shape (H*W,)."""
        return np.diff(self.offsets)

    def pixel_ids(self) -> np.ndarray:
        """Row-major pixel id of every entry."""
        return np.repeat(np.arange(self.height * self.width), self.counts)

    def span(self, row: int, col: int) -> slice:
        """Slice of the entries belonging to a pixel."""
        pixel = row * self.width + col
        return slice(int(self.offsets[pixel]), int(self.offsets[pixel + 1]))

    def at(self, row: int, col: int) -> list[PixelContributor]:
        """Depth-ascending contributors of one pixel."""
        span = self.span(row, col)
        return [
            PixelContributor(
                gaussian_index=int(self.gaussian_index[i]),
                alpha=float(self.alpha[i]),
                weight=float(self.weight[i]),
                depth=float(self.depth[i]),
                color=tuple(self.color[i].tolist()),
                label=int(self.label[i]),
            )
            for i in range(span.start, span.stop)
        ]

    @classmethod
    def from_entries(
        cls,
        height: int,
        width: int,
        pixel: np.ndarray,
        gaussian_index: np.ndarray,
        alpha: np.ndarray,
        weight: np.ndarray,
        depth: np.ndarray,
        color: np.ndarray,
        label: np.ndarray,
    ) -> "ContributorBuffer":
        """Group entries by pixel, keeping their relative (depth) order."""
        order = np.argsort(pixel, kind="stable")
        offsets = np.zeros(height * width + 1, dtype=np.int64)
        np.cumsum(np.bincount(pixel, minlength=height * width), out=offsets[1:])
        return cls(
            height=height,
            width=width,
            offsets=offsets,
            gaussian_index=np.asarray(gaussian_index, dtype=np.int64)[order],
            alpha=np.asarray(alpha, dtype=np.float64)[order],
            weight=np.asarray(weight, dtype=np.float64)[order],
            depth=np.asarray(depth, dtype=np.float64)[order],
            color=np.asarray(color, dtype=np.float64).reshape(-1, 3)[order],
            label=np.asarray(label, dtype=np.uint32)[order],
        )


@dataclass
class FrameRender:
    """Rendered frame: C(p), D(p), final transmittance and contributors."""

    rgb: np.ndarray  # (H, W, 3)
    depth: np.ndarray  # (H, W), 0 where nothing contributes
    transmittance: np.ndarray  # (H, W)
    contributors: ContributorBuffer | None = None
    elapsed_ms: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        """Image shape as (height, width)."""
        return self.depth.shape

    @property
    def coverage(self) -> np.ndarray:
        """Accumulated opacity 1 − T per pixel."""
        return 1.0 - self.transmittance

    def normalized_depth(self, min_coverage: float = 0.5) -> np.ndarray:
        """Depth divided by coverage, 0 where coverage is below the floor."""
        coverage = self.coverage
        safe = np.where(coverage >= min_coverage, coverage, 1.0)
        return np.where(coverage >= min_coverage, self.depth / safe, 0.0)


@dataclass
class _TileResult:
    y0: int
    y1: int
    x0: int
    x1: int
    rgb: np.ndarray
    depth: np.ndarray
    transmittance: np.ndarray
    entries: tuple[np.ndarray, ...] | None


class Rasterizer:
    """Software splat rasterizer over 16×16 tiles.

    Tiles are independent and may run on a thread pool; results are always
    assembled in tile order so output does not depend on the schedule.
    """

    def __init__(self, config: RenderConfig | None = None):
        """Initialize rasterizer."""
        self.config = config or RenderConfig()

    def render(
        self,
        scene: GaussianScene | SceneSnapshot,
        pose: Pose,
        intrinsics: CameraIntrinsics,
        record_contributors: bool = True,
    ) -> FrameRender:
        """Render RGB and depth, optionally recording contributor sequences."""
        start = time.perf_counter()
        snapshot = scene.snapshot() if isinstance(scene, GaussianScene) else scene
        splats = project_splats(snapshot, pose, intrinsics, self.config)
        height, width = intrinsics.height, intrinsics.width

        tiles = self._assign_tiles(splats, height, width)
        if self.config.workers > 1 and len(tiles) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                results = list(
                    pool.map(
                        lambda job: self._render_tile(splats, job, width, record_contributors),
                        tiles,
                    )
                )
        else:
            results = [self._render_tile(splats, job, width, record_contributors) for job in tiles]

        rgb = np.zeros((height, width, 3))
        depth = np.zeros((height, width))
        transmittance = np.ones((height, width))
        for tile in results:
            rgb[tile.y0 : tile.y1, tile.x0 : tile.x1] = tile.rgb
            depth[tile.y0 : tile.y1, tile.x0 : tile.x1] = tile.depth
            transmittance[tile.y0 : tile.y1, tile.x0 : tile.x1] = tile.transmittance

        contributors = None
        if record_contributors:
            parts = [tile.entries for tile in results if tile.entries is not None]
            if parts:
                merged = [np.concatenate(column) for column in zip(*parts, strict=True)]
            else:
                merged = _empty_entries()
            contributors = ContributorBuffer.from_entries(height, width, *merged)

        if len(splats) == 0:
            logger.debug("No splats in view, frame is all background")
        return FrameRender(
            rgb=np.clip(rgb, 0.0, 1.0),
            depth=depth,
            transmittance=transmittance,
            contributors=contributors,
            elapsed_ms=(time.perf_counter() - start) * 1000.0,
        )

    def _assign_tiles(
        self, splats: ProjectedSplats, height: int, width: int
    ) -> list[tuple[int, int, int, int, np.ndarray]]:
        """Pair every tile with the depth-ordered splats whose 3σ box touches it."""
        size = self.config.tile_size
        lo_x = np.floor(np.maximum(0.0, splats.means[:, 0] - splats.radii) / size)
        hi_x = np.floor(np.minimum(width - 1.0, splats.means[:, 0] + splats.radii) / size)
        lo_y = np.floor(np.maximum(0.0, splats.means[:, 1] - splats.radii) / size)
        hi_y = np.floor(np.minimum(height - 1.0, splats.means[:, 1] + splats.radii) / size)

        jobs = []
        for ty in range(0, (height + size - 1) // size):
            rows = (lo_y <= ty) & (hi_y >= ty)
            for tx in range(0, (width + size - 1) // size):
                members = np.flatnonzero(rows & (lo_x <= tx) & (hi_x >= tx))
                y0, x0 = ty * size, tx * size
                jobs.append((y0, min(y0 + size, height), x0, min(x0 + size, width), members))
        return jobs

    def _render_tile(
        self,
        splats: ProjectedSplats,
        job: tuple[int, int, int, int, np.ndarray],
        width: int,
        record: bool,
    ) -> _TileResult:
        y0, y1, x0, x1, members = job
        shape = (y1 - y0, x1 - x0)
        if len(members) == 0:
            return _TileResult(
                y0, y1, x0, x1,
                rgb=np.zeros(shape + (3,)),
                depth=np.zeros(shape),
                transmittance=np.ones(shape),
                entries=None,
            )

        ys, xs = np.mgrid[y0:y1, x0:x1]
        pixels = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
        alpha = splat_alphas(
            splats.means[members],
            splats.conics[members],
            splats.opacities[members],
            pixels,
            self.config,
        )
        weight, active, transmittance = composite(alpha, self.config.transmittance_min)
        rgb = weight.T @ splats.colors[members]
        depth = weight.T @ splats.depths[members]

        entries = None
        if record:
            keep = self._bounded(weight, active)
            # pixel-major, depth-ascending within a pixel
            local, position = np.nonzero(keep.T)
            pixel_id = (y0 + local // shape[1]) * width + x0 + local % shape[1]
            source = members[position]
            entries = (
                pixel_id,
                splats.indices[source],
                alpha[position, local],
                weight[position, local],
                splats.depths[source],
                splats.colors[source],
                splats.labels[source],
            )
        return _TileResult(
            y0, y1, x0, x1,
            rgb=rgb.reshape(shape + (3,)),
            depth=depth.reshape(shape),
            transmittance=transmittance.reshape(shape),
            entries=entries,
        )

    def _bounded(self, weight: np.ndarray, active: np.ndarray) -> np.ndarray:
        """Drop the lowest-weight entries of pixels above the contributor bound."""
        bound = self.config.contributor_bound
        counts = active.sum(axis=0)
        over = np.flatnonzero(counts > bound)
        if len(over) == 0:
            return active
        keep = active.copy()
        for column in over:
            order = np.argsort(-weight[:, column], kind="stable")
            keep[order[bound:], column] = False
        logger.debug(f"Contributor bound {bound} truncated {len(over)} pixels")
        return keep


def composite(
    alpha: np.ndarray, transmittance_min: float = 1e-4
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Front-to-back blending weights for depth-ordered alphas of shape (n, P).

    A contributor is blended iff its alpha is nonzero and the transmittance in
    front of it is at least transmittance_min.

    Returns:
        weights (n, P), active mask (n, P), final transmittance (P,).
    """
    survive = 1.0 - alpha
    before = np.ones_like(alpha)
    if len(alpha) > 1:
        before[1:] = np.cumprod(survive[:-1], axis=0)
    active = (alpha > 0) & (before >= transmittance_min)
    weight = np.where(active, alpha * before, 0.0)
    final = np.prod(np.where(active, survive, 1.0), axis=0)
    return weight, active, final


def reference_render(
    scene: GaussianScene | SceneSnapshot,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    config: RenderConfig | None = None,
    early_stop: bool = True,
) -> FrameRender:
    """Naive evaluator: every Gaussian against every pixel, one at a time.

    Projects each Gaussian on its own and composites sequentially with no
    tiling or contributor bound. Used to check the tiled rasterizer.
    """
    config = config or RenderConfig()
    snapshot = scene.snapshot() if isinstance(scene, GaussianScene) else scene
    height, width = intrinsics.height, intrinsics.width
    ys, xs = np.mgrid[0:height, 0:width]
    pixels = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)

    projected = []
    for index in range(len(snapshot)):
        gaussian = LabeledGaussian(
            position=tuple(snapshot.positions[index].tolist()),
            scale=tuple(snapshot.scales[index].tolist()),
            rotation=tuple(snapshot.rotations[index].tolist()),
        )
        splat = project_covariance(gaussian, pose, intrinsics, config, index=index)
        if splat is not None:
            projected.append(splat)
    projected.sort(key=lambda s: (s.depth, s.source_index))

    transmittance = np.ones(height * width)
    rgb = np.zeros((height * width, 3))
    depth = np.zeros(height * width)
    columns: list[list[np.ndarray]] = [[] for _ in range(7)]
    for splat in projected:
        index = splat.source_index
        alpha = splat_alphas(
            splat.mean2d[None, :],
            conic_from_cov2d(splat.cov2d, index)[None, :],
            np.asarray([snapshot.opacities[index]]),
            pixels,
            config,
        )[0]
        live = alpha > 0
        if early_stop:
            live &= transmittance >= config.transmittance_min
        weight = np.where(live, alpha * transmittance, 0.0)
        rgb += weight[:, None] * snapshot.colors[index]
        depth += weight * splat.depth
        transmittance = np.where(live, transmittance * (1.0 - alpha), transmittance)

        hit = np.flatnonzero(live)
        columns[0].append(hit)
        columns[1].append(np.full(len(hit), index))
        columns[2].append(alpha[hit])
        columns[3].append(weight[hit])
        columns[4].append(np.full(len(hit), splat.depth))
        columns[5].append(np.tile(snapshot.colors[index], (len(hit), 1)))
        columns[6].append(np.full(len(hit), snapshot.labels[index], dtype=np.uint32))

    if projected:
        merged = [np.concatenate(column) for column in columns]
    else:
        merged = _empty_entries()
    return FrameRender(
        rgb=np.clip(rgb.reshape(height, width, 3), 0.0, 1.0),
        depth=depth.reshape(height, width),
        transmittance=transmittance.reshape(height, width),
        contributors=ContributorBuffer.from_entries(height, width, *merged),
    )


def _empty_entries() -> list[np.ndarray]:
    return [
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        np.zeros(0),
        np.zeros(0),
        np.zeros(0),
        np.zeros((0, 3)),
        np.zeros(0, dtype=np.uint32),
    ]
