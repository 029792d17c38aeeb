"""Per-frame semantic mapping loop."""

import logging
import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from semsplat.config import MapperConfig, PipelineConfig, RenderConfig
from semsplat.consensus.consensus import (
    ConsensusOutcome,
    LabelConsensus,
    PartOverwrite,
    apply_part_decay,
    update_input_confidence,
)
from semsplat.consensus.matching import InputSegmentation, MatchKind
from semsplat.errors import DimensionMismatchError, PipelineError
from semsplat.pipeline import formats
from semsplat.pipeline.dataset import FrameInput
from semsplat.pipeline.detections import associate_detections
from semsplat.pipeline.metrics import FrameMetrics, RunMetrics, compute_miou_acc, compute_psnr
from semsplat.pipeline.synthetic import (
    PerturbationSpec,
    SyntheticDataset,
    SyntheticSceneSpec,
    generate_synthetic,
)
from semsplat.pruning.counter_pruning import CounterPruner
from semsplat.render.camera import CameraIntrinsics
from semsplat.render.rasterizer import FrameRender, Rasterizer
from semsplat.scene.registry import BACKGROUND_LABEL
from semsplat.scene.scene import GaussianScene
from semsplat.voting.label_map import LabelMap
from semsplat.voting.voting import (
    LabelRender,
    compute_completeness,
    coverage_ratio_map,
    relabel_via_topk,
    render_label_map,
)

logger = logging.getLogger(__name__)


def densify_keyframe(
    scene: GaussianScene,
    frame: FrameInput,
    rendered: FrameRender | None,
    consistent_map: LabelMap,
    intrinsics: CameraIntrinsics,
    config: PipelineConfig | None = None,
    render_config: RenderConfig | None = None,
) -> int:
    """Back-project grid pixels the map does not explain yet into new Gaussians.

    A grid pixel qualifies when its input depth is valid and the rendered
    depth is absent or off by more than depth_thresh. Each new Gaussian takes
    the consistent label and input color of its pixel. Pixels the input
    segments as an object but consensus sent to background are skipped, so
    an object never gains background Gaussians.

    Returns:
        Number of Gaussians added.
    """
    config = config or PipelineConfig()
    render_config = render_config or RenderConfig()
    consistent_map.check_shape(frame.shape, "frame")
    height, width = frame.shape
    stride = config.densify_stride
    rows, cols = np.meshgrid(
        np.arange(stride // 2, height, stride),
        np.arange(stride // 2, width, stride),
        indexing="ij",
    )
    rows, cols = rows.ravel(), cols.ravel()
    depth = frame.depth[rows, cols]
    keep = np.isfinite(depth) & (depth > 0)
    labels = consistent_map.labels[rows, cols]
    segmented = frame.segmentation.label_map.labels[rows, cols] != BACKGROUND_LABEL
    keep &= (labels != BACKGROUND_LABEL) | ~segmented
    if rendered is not None:
        rendered_depth = rendered.normalized_depth(render_config.label_coverage_min)[rows, cols]
        keep &= (rendered_depth <= 0) | (np.abs(rendered_depth - depth) > config.depth_thresh)
    rows, cols, depth, labels = rows[keep], cols[keep], depth[keep], labels[keep]
    if len(depth) == 0:
        return 0

    points = np.column_stack(
        [
            (cols - intrinsics.cx) / intrinsics.fx * depth,
            (rows - intrinsics.cy) / intrinsics.fy * depth,
            depth,
        ]
    )
    scale = stride * depth / intrinsics.fx * 0.5
    n = len(depth)
    return scene.add_arrays(
        positions=frame.pose.inverse_transform(points),
        scales=np.repeat(scale[:, None], 3, axis=1),
        rotations=np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)),
        opacities=np.full(n, config.init_opacity),
        colors=np.clip(frame.rgb[rows, cols], 0.0, 1.0),
        labels=labels,
    )


def _majority_label(labels: np.ndarray, mask: np.ndarray) -> int:
    values, counts = np.unique(labels[mask], return_counts=True)
    if len(values) == 0:
        return BACKGROUND_LABEL
    return int(values[np.argmax(counts)])


def count_incorrect_overwrites(
    overwrites: Sequence[PartOverwrite],
    input_map: LabelMap,
    rendered: LabelMap,
    ground_truth: LabelMap,
) -> int:
    """PartOf arbitrations won by parts that belong to the rendered whole's object."""
    incorrect = 0
    for overwrite in overwrites:
        whole = _majority_label(ground_truth.labels, rendered.labels == overwrite.rendered_label)
        if whole == BACKGROUND_LABEL:
            continue
        if all(
            _majority_label(ground_truth.labels, input_map.labels == part) == whole
            for part in overwrite.parts
        ):
            incorrect += 1
    return incorrect


class SemanticMapper:
    """Maintains a labeled Gaussian scene over a stream of segmented RGB-D frames."""

    def __init__(
        self,
        config: MapperConfig | None = None,
        intrinsics: CameraIntrinsics | None = None,
        scene: GaussianScene | None = None,
    ):
        """Initialize the mapper."""
        self.config = config or MapperConfig.from_env()
        self._setup_logging()
        if intrinsics is None:
            raise ValueError("Camera intrinsics are required")
        self.intrinsics = intrinsics

        self.scene = scene or GaussianScene(max_labels=self.config.scene.max_labels)
        self.rasterizer = Rasterizer(self.config.render)
        self.consensus = LabelConsensus(self.config.consensus)
        self.pruner = CounterPruner(self.config.pruning)

        self.metrics = RunMetrics()
        self.final_labels: LabelMap | None = None
        self._frame_index = 0

    def _setup_logging(self) -> None:
        """Configure logging."""
        logging.basicConfig(
            level=getattr(logging, self.config.log_level),
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        )

    @contextmanager
    def _phase(self, name: str) -> Iterator[None]:
        try:
            yield
        except Exception as e:
            logger.error(f"Frame {self._frame_index} failed during {name}: {e}")
            raise PipelineError(self._frame_index, name, e) from e

    def is_keyframe(self, index: int) -> bool:
        """Whether frame index densifies the map (every keyframe_every frames, from 0)."""
        return index % self.config.pipeline.keyframe_every == 0

    def process_frame(self, frame: FrameInput) -> FrameMetrics:
        """Render, unify, relabel, prune and densify for one frame.

        Raises:
            PipelineError: wrapping the first module error, with frame index and phase.
        """
        index = self._frame_index
        scene = self.scene
        config = self.config

        with self._phase("ingest"):
            if frame.shape != self.intrinsics.shape:
                raise DimensionMismatchError(
                    f"Frame shape {frame.shape} does not match camera {self.intrinsics.shape}"
                )
            segmentation = frame.segmentation

        with self._phase("render"):
            rgb_only = self.rasterizer.render(
                scene, frame.pose, self.intrinsics, record_contributors=False
            )
            start = time.perf_counter()
            rendered = render_label_map(
                scene,
                frame.pose,
                self.intrinsics,
                config.render,
                k=config.consensus.topk,
                rasterizer=self.rasterizer,
            )
            label_ms = (time.perf_counter() - start) * 1000.0
            if len(scene) and not rendered.label_map.label_set():
                logger.warning(f"Frame {index}: map renders no labeled pixels from this pose")

        if config.consensus.input_confidence_update:
            with self._phase("confidence_update"):
                completeness = compute_completeness(scene, rendered.visible)
                coverage = coverage_ratio_map(rendered.label_map, completeness)
                segmentation = update_input_confidence(segmentation, coverage)

        if frame.detections:
            with self._phase("detections"):
                segmentation = InputSegmentation(
                    segmentation.label_map,
                    segmentation.confidences,
                    associate_detections(segmentation.label_map, frame.detections),
                )

        with self._phase("consensus"):
            outcome = self.consensus.unify(
                segmentation, rendered.label_map, scene.registry, rendered.topk
            )

        with self._phase("relabel"):
            relabel = relabel_via_topk(scene, rendered.topk, outcome.relabel_commands)

        with self._phase("decay"):
            decayed = self.consensus.apply(outcome, scene.registry, segmentation.table)
            decayed_inputs = apply_part_decay(
                segmentation.confidences,
                outcome.decayed_input_labels,
                config.consensus.delta,
            )

        with self._phase("pruning"):
            pairs = [
                (label_s, match.target)
                for label_s, match in outcome.classification.of_kind(MatchKind.FULL_MATCH).items()
            ]
            pruned = self.pruner.prune_pairs(
                scene, segmentation.label_map, rendered.label_map, pairs, rendered.topk
            )

        added = 0
        if self.is_keyframe(index):
            with self._phase("densify"):
                added = densify_keyframe(
                    scene,
                    frame,
                    rendered.frame,
                    outcome.consistent_map,
                    self.intrinsics,
                    config.pipeline,
                    config.render,
                )
        scene.registry.sweep_empty()

        metrics = self._frame_metrics(
            index, frame, rendered, outcome, segmentation.label_map
        )
        metrics.added = added
        metrics.pruned = len(pruned.pruned)
        metrics.decayed = len(decayed) + len(decayed_inputs)
        metrics.relabeled = len(relabel.relabeled)
        metrics.rgb_ms = rgb_only.elapsed_ms
        metrics.label_ms = label_ms
        self.metrics.append(metrics)

        logger.info(
            f"Frame {index}: {metrics.label_count} labels, {metrics.new_labels} new, "
            f"{metrics.decayed} decayed, {metrics.relabeled} relabeled, "
            f"{metrics.pruned} pruned, {added} added, "
            f"render {rgb_only.elapsed_ms:.1f}/{label_ms:.1f} ms"
        )
        self._frame_index += 1
        return metrics

    def _frame_metrics(
        self,
        index: int,
        frame: FrameInput,
        rendered: LabelRender,
        outcome: ConsensusOutcome,
        input_map: LabelMap,
    ) -> FrameMetrics:
        census = self.scene.label_census()
        metrics = FrameMetrics(
            frame=index,
            psnr=compute_psnr(rendered.frame.rgb, frame.rgb),
            label_count=sum(1 for label in census if label != BACKGROUND_LABEL),
            gaussian_count=len(self.scene),
            new_labels=len(outcome.new_labels),
            part_overwrites=len(outcome.part_overwrites),
        )
        if frame.ground_truth is not None:
            metrics.miou, metrics.acc = compute_miou_acc(rendered.label_map, frame.ground_truth)
            metrics.incorrect_part_overwrites = count_incorrect_overwrites(
                outcome.part_overwrites, input_map, rendered.label_map, frame.ground_truth
            )
        return metrics

    def finish(self, last_frame: FrameInput | None) -> RunMetrics:
        """Evaluate a fresh render of the final map at the last pose."""
        if last_frame is None:
            return self.metrics
        with self._phase("evaluate"):
            final = render_label_map(
                self.scene,
                last_frame.pose,
                self.intrinsics,
                self.config.render,
                k=self.config.consensus.topk,
                rasterizer=self.rasterizer,
            )
            self.final_labels = final.label_map
            if last_frame.ground_truth is not None:
                self.metrics.final_miou, self.metrics.final_acc = compute_miou_acc(
                    final.label_map, last_frame.ground_truth
                )
        return self.metrics

    def run(self, frames: Sequence[FrameInput]) -> RunMetrics:
        """Process every frame, evaluate the final map and write outputs."""
        logger.info(f"Mapping {len(frames)} frames...")
        for frame in frames:
            self.process_frame(frame)
        self.finish(frames[-1] if frames else None)
        if self.config.pipeline.output_dir:
            self.write_outputs(self.config.pipeline.output_dir)
        summary = self.metrics.summary()
        logger.info(
            f"Finished: {summary['final_label_count']} labels, "
            f"{summary['final_gaussian_count']} Gaussians, final mIoU {summary['final_miou']}"
        )
        return self.metrics

    def write_outputs(self, directory: str | Path) -> Path:
        """Write the scene, Label-Class table, metrics and final label map."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        formats.write_scene(directory / "scene.ogs", self.scene)
        formats.write_label_table(directory / "labels.txt", self.scene.global_table)
        self.metrics.write_csv(directory / "metrics.csv")
        if self.final_labels is not None:
            formats.write_label_map(directory / "final_labels.oglm", self.final_labels)
        logger.info(f"Wrote run outputs to {directory}")
        return directory


def run_pipeline(
    config: MapperConfig,
    frames: Sequence[FrameInput],
    intrinsics: CameraIntrinsics,
    scene: GaussianScene | None = None,
) -> RunMetrics:
    """Map a sequence of frames from scratch (or onto a given scene)."""
    return SemanticMapper(config, intrinsics, scene).run(frames)


def run_synthetic(
    config: MapperConfig,
    scene_spec: SyntheticSceneSpec | None = None,
    perturbation: PerturbationSpec | None = None,
) -> tuple[SyntheticDataset, SemanticMapper]:
    """Generate a synthetic sequence and map it; both seeded from the pipeline seed."""
    seed = config.pipeline.seed
    dataset = generate_synthetic(scene_spec or SyntheticSceneSpec(), seed=seed)
    perturbation = perturbation or PerturbationSpec(seed=seed)
    mapper = SemanticMapper(config, dataset.intrinsics)
    mapper.run(dataset.frames(perturbation))
    return dataset, mapper
