"""Frame loop, synthetic data, metrics and file formats."""

from semsplat.pipeline.benchmark import BenchmarkReport, run_benchmark
from semsplat.pipeline.dataset import FrameInput, read_sequence, write_sequence
from semsplat.pipeline.detections import Detection, associate_detections
from semsplat.pipeline.formats import BYTES_PER_GAUSSIAN, read_scene, write_scene
from semsplat.pipeline.mapper import (
    SemanticMapper,
    densify_keyframe,
    run_pipeline,
    run_synthetic,
)
from semsplat.pipeline.metrics import FrameMetrics, RunMetrics, compute_miou_acc, compute_psnr
from semsplat.pipeline.synthetic import (
    PerturbationSpec,
    SyntheticDataset,
    SyntheticObject,
    SyntheticSceneSpec,
    generate_synthetic,
    make_trajectory,
    perturb_segmentation,
)

__all__ = [
    "BYTES_PER_GAUSSIAN",
    "BenchmarkReport",
    "Detection",
    "FrameInput",
    "FrameMetrics",
    "PerturbationSpec",
    "RunMetrics",
    "SemanticMapper",
    "SyntheticDataset",
    "SyntheticObject",
    "SyntheticSceneSpec",
    "associate_detections",
    "compute_miou_acc",
    "compute_psnr",
    "densify_keyframe",
    "generate_synthetic",
    "make_trajectory",
    "perturb_segmentation",
    "read_scene",
    "read_sequence",
    "run_benchmark",
    "run_pipeline",
    "run_synthetic",
    "write_scene",
    "write_sequence",
]
