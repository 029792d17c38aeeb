"""Rendering throughput and storage benchmark."""

import logging
import time
from dataclasses import dataclass

import numpy as np

from semsplat.config import RenderConfig
from semsplat.pipeline.formats import BYTES_PER_GAUSSIAN, scene_to_bytes
from semsplat.render.camera import CameraIntrinsics, look_at
from semsplat.render.rasterizer import Rasterizer
from semsplat.scene.scene import GaussianScene
from semsplat.voting.voting import render_label_map

logger = logging.getLogger(__name__)


@dataclass
class BenchmarkReport:
    """Median render times and storage figures."""

    gaussians: int
    width: int
    height: int
    repeats: int
    rgb_ms: float
    label_ms: float
    bytes_per_gaussian: int
    scene_bytes: int

    @property
    def ratio(self) -> float:
        """RGB+label time over RGB-only time."""
        return self.label_ms / self.rgb_ms if self.rgb_ms > 0 else float("inf")

    def to_dict(self) -> dict[str, float | int]:
        return {
            "gaussians": self.gaussians,
            "resolution": f"{self.width}x{self.height}",
            "rgb_ms": round(self.rgb_ms, 2),
            "label_ms": round(self.label_ms, 2),
            "ratio": round(self.ratio, 3),
            "bytes_per_gaussian": self.bytes_per_gaussian,
            "scene_bytes": self.scene_bytes,
        }


def random_scene(count: int, labels: int = 20, seed: int = 0) -> GaussianScene:
    """Uniform cloud of small labeled Gaussians in a 2 m cube."""
    rng = np.random.default_rng(seed)
    quats = rng.normal(size=(count, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    scene = GaussianScene(max_labels=max(labels, 1))
    scene.add_arrays(
        positions=rng.uniform(-1.0, 1.0, size=(count, 3)),
        scales=np.exp(rng.uniform(np.log(0.005), np.log(0.04), size=(count, 3))),
        rotations=quats,
        opacities=rng.uniform(0.3, 0.95, size=count),
        colors=rng.uniform(0.0, 1.0, size=(count, 3)),
        labels=rng.integers(1, labels + 1, size=count),
    )
    return scene


def run_benchmark(
    gaussian_count: int = 10000,
    width: int = 320,
    height: int = 240,
    repeats: int = 3,
    workers: int = 1,
    topk: int = 50,
    seed: int = 0,
) -> BenchmarkReport:
    """Time RGB-only against RGB+label rendering of one random scene."""
    if repeats <= 0:
        raise ValueError(f"Invalid repeats {repeats}. Must be positive.")
    scene = random_scene(gaussian_count, seed=seed)
    intrinsics = CameraIntrinsics.from_fov(width, height, 60.0)
    pose = look_at((0.0, -3.5, 1.2), (0.0, 0.0, 0.0))
    config = RenderConfig(workers=workers, contributor_bound=4 * topk)
    rasterizer = Rasterizer(config)
    snapshot = scene.snapshot()

    rgb_times, label_times = [], []
    for _ in range(repeats):
        start = time.perf_counter()
        rasterizer.render(snapshot, pose, intrinsics, record_contributors=False)
        rgb_times.append((time.perf_counter() - start) * 1000.0)

        start = time.perf_counter()
        render_label_map(snapshot, pose, intrinsics, config, k=topk, rasterizer=rasterizer)
        label_times.append((time.perf_counter() - start) * 1000.0)

    report = BenchmarkReport(
        gaussians=len(scene),
        width=width,
        height=height,
        repeats=repeats,
        rgb_ms=float(np.median(rgb_times)),
        label_ms=float(np.median(label_times)),
        bytes_per_gaussian=BYTES_PER_GAUSSIAN,
        scene_bytes=len(scene_to_bytes(scene)),
    )
    logger.info(
        f"Benchmark {width}x{height}, {len(scene)} Gaussians: RGB {report.rgb_ms:.1f} ms, "
        f"RGB+label {report.label_ms:.1f} ms (x{report.ratio:.2f})"
    )
    return report
