"""Command-line interface for the semantic mapper."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from semsplat.config import MapperConfig
from semsplat.consensus.consensus import LabelConsensus
from semsplat.consensus.matching import InputSegmentation
from semsplat.errors import FormatError, PipelineError
from semsplat.pipeline import formats
from semsplat.pipeline.benchmark import run_benchmark
from semsplat.pipeline.dataset import read_sequence, write_sequence
from semsplat.pipeline.mapper import SemanticMapper
from semsplat.pipeline.synthetic import (
    TRAJECTORIES,
    PerturbationSpec,
    SyntheticSceneSpec,
    generate_synthetic,
)
from semsplat.render.rasterizer import Rasterizer
from semsplat.scene.registry import LabelRegistry
from semsplat.voting.voting import EMPTY_SLOT, TopKContributorMatrix, votes_from_frame

logger = logging.getLogger(__name__)


def _add_synthetic_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("synthetic scene")
    group.add_argument("--objects", type=int, default=8)
    group.add_argument("--gaussians-per-object", type=int, default=300)
    group.add_argument("--frames", type=int, default=40)
    group.add_argument("--trajectory", choices=TRAJECTORIES, default="orbit")
    group.add_argument("--width", type=int, default=128)
    group.add_argument("--height", type=int, default=96)
    group.add_argument("--no-permute", action="store_true", help="Keep ground-truth label ids")
    group.add_argument("--oversegment-prob", type=float, default=0.0)
    group.add_argument("--merge-prob", type=float, default=0.0)
    group.add_argument("--base-confidence", type=float, default=0.8)
    group.add_argument("--confidence-noise", type=float, default=0.0)


def _scene_spec(args: argparse.Namespace) -> SyntheticSceneSpec:
    return SyntheticSceneSpec(
        object_count=args.objects,
        gaussians_per_object=args.gaussians_per_object,
        frame_count=args.frames,
        trajectory=args.trajectory,
        width=args.width,
        height=args.height,
    )


def _perturbation(args: argparse.Namespace, seed: int) -> PerturbationSpec:
    return PerturbationSpec(
        permute_labels=not args.no_permute,
        oversegment_prob=args.oversegment_prob,
        merge_prob=args.merge_prob,
        base_confidence=args.base_confidence,
        confidence_noise=args.confidence_noise,
        seed=seed,
    )


def _config_from_args(args: argparse.Namespace) -> MapperConfig:
    """Environment configuration with command-line overrides applied."""
    config = MapperConfig.from_env()
    flags = {
        "consensus": {
            "tau1": args.tau1,
            "tau2": args.tau2,
            "tau3": args.tau3,
            "delta": args.delta,
            "topk": args.topk,
        },
        "pruning": {"theta": args.theta},
        "pipeline": {
            "keyframe_every": args.keyframe_every,
            "densify_stride": args.densify_stride,
            "seed": args.seed,
            "output_dir": args.output,
        },
        "scene": {"max_labels": args.max_labels},
        "render": {"workers": args.workers},
    }
    if args.no_confidence_update:
        flags["consensus"]["input_confidence_update"] = False
    if args.no_pruning:
        flags["pruning"]["enabled"] = False
    sections = {
        name: replace(
            getattr(config, name),
            **{key: value for key, value in values.items() if value is not None},
        )
        for name, values in flags.items()
    }
    return MapperConfig(**sections, log_level=args.log_level or config.log_level)


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a synthetic sequence with perturbed segmentations."""
    dataset = generate_synthetic(_scene_spec(args), seed=args.seed)
    frames = dataset.frames(_perturbation(args, args.seed))
    out = write_sequence(args.out, dataset.intrinsics, frames)
    formats.write_scene(out / "gt_scene.ogs", dataset.scene)
    formats.write_label_table(out / "gt_labels.txt", dataset.scene.global_table)
    print(f"Wrote {len(frames)} frames and {len(dataset.scene)} ground-truth Gaussians to {out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    """Map a recorded or synthetic sequence."""
    config = _config_from_args(args)
    if args.input:
        intrinsics, frames = read_sequence(args.input)
    else:
        seed = config.pipeline.seed
        dataset = generate_synthetic(_scene_spec(args), seed=seed)
        intrinsics = dataset.intrinsics
        frames = dataset.frames(_perturbation(args, seed))

    mapper = SemanticMapper(config, intrinsics)
    try:
        metrics = mapper.run(frames)
    except PipelineError as e:
        print(f"Run aborted at frame {e.frame_index} ({e.phase}): {e.cause}", file=sys.stderr)
        return 1
    print(json.dumps(metrics.summary(), indent=2))
    return 0


def _max_labels(args: argparse.Namespace) -> int:
    """Label bound for reading scene files: the flag, else SEMSPLAT_MAX_LABELS."""
    if args.max_labels is not None:
        if args.max_labels <= 0:
            raise ValueError(f"Invalid max_labels {args.max_labels}. Must be positive.")
        return args.max_labels
    return MapperConfig.from_env().scene.max_labels


def cmd_render(args: argparse.Namespace) -> int:
    """Render RGB, depth and labels of a scene at one trajectory pose."""
    scene = formats.read_scene(args.scene, _max_labels(args))
    intrinsics = formats.read_intrinsics(args.intrinsics)
    poses = formats.read_trajectory(args.trajectory)
    if not 0 <= args.frame < len(poses):
        print(f"Frame {args.frame} outside trajectory of {len(poses)} poses", file=sys.stderr)
        return 1
    config = MapperConfig.from_env()
    votes = votes_from_frame(
        Rasterizer(config.render).render(scene, poses[args.frame], intrinsics),
        k=config.consensus.topk,
        coverage_min=config.render.label_coverage_min,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_rgb(out / f"rgb_{args.frame:05d}.ppm", votes.frame.rgb)
    formats.write_depth(
        out / f"depth_{args.frame:05d}.ogdm",
        votes.frame.normalized_depth(config.render.label_coverage_min),
    )
    formats.write_label_map(out / f"labels_{args.frame:05d}.oglm", votes.label_map)
    print(f"Rendered frame {args.frame}: labels {sorted(votes.label_map.label_set())}")
    return 0


def cmd_manipulate(args: argparse.Namespace) -> int:
    """Remove, move or rotate labeled objects of a scene file."""
    scene = formats.read_scene(args.scene, _max_labels(args))
    if args.remove_label is not None:
        removed = scene.remove_label(args.remove_label)
        print(f"Removed {removed} Gaussians of label {args.remove_label}")
    if args.move_label is not None:
        moved = scene.translate_label(args.move_label, args.offset)
        print(f"Moved {moved} Gaussians of label {args.move_label}")
    if args.rotate_label is not None:
        x, y, z, w = Rotation.from_euler("z", args.yaw, degrees=True).as_quat()
        rotated = scene.rotate_label(args.rotate_label, (w, x, y, z))
        print(f"Rotated {rotated} Gaussians of label {args.rotate_label}")
    formats.write_scene(args.out or args.scene, scene)
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    """List labels of an open-set class."""
    table = formats.read_label_table(args.table)
    labels = table.labels_for_class(args.class_name)
    if args.scene:
        present = formats.read_scene(args.scene, _max_labels(args)).label_census()
        labels = [label for label in labels if label in present]
    print(" ".join(str(label) for label in labels))
    return 0


def cmd_consensus(args: argparse.Namespace) -> int:
    """Classify and resolve one input label map against a rendered one."""
    input_map = formats.read_label_map(args.input)
    rendered = formats.read_label_map(args.rendered)
    segmentation = InputSegmentation(
        input_map, {label: args.input_confidence for label in input_map.label_set()}
    )
    registry = LabelRegistry(max_labels=args.max_labels)
    for label in sorted(rendered.label_set()):
        registry.ensure(label, args.map_confidence)
    height, width = rendered.shape
    topk = TopKContributorMatrix(
        index=np.full((height, width, 1), EMPTY_SLOT, dtype=np.int64),
        label=np.zeros((height, width, 1), dtype=np.uint32),
        weight=np.zeros((height, width, 1)),
    )
    consensus = LabelConsensus(MapperConfig.from_env().consensus)
    outcome = consensus.unify(segmentation, rendered, registry, topk)
    report = {
        "counts": outcome.classification.counts(),
        "matches": {
            str(label): {"kind": match.kind.value, "rendered": list(match.rendered)}
            for label, match in sorted(outcome.classification.items())
        },
        "mapping": {str(s): t for s, t in sorted(outcome.mapping.items())},
        "new_labels": sorted(outcome.new_labels),
        "decayed": sorted(outcome.decayed_labels),
        "relabel_commands": len(outcome.relabel_commands),
    }
    print(json.dumps(report, indent=2))
    if args.out:
        formats.write_label_map(args.out, outcome.consistent_map)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    """Report RGB-only against RGB+label render time and storage."""
    report = run_benchmark(
        gaussian_count=args.gaussians,
        width=args.width,
        height=args.height,
        repeats=args.repeats,
        workers=args.workers,
        seed=args.seed,
    )
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semsplat", description=__doc__)
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="Emit a synthetic dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int, default=0)
    _add_synthetic_args(synth)
    synth.set_defaults(func=cmd_synth)

    run = sub.add_parser("run", help="Run the full mapping pipeline")
    run.add_argument("--input", help="Sequence directory (synthetic when omitted)")
    run.add_argument("--output", help="Directory for the scene, tables and metrics")
    run.add_argument("--tau1", type=float)
    run.add_argument("--tau2", type=float)
    run.add_argument("--tau3", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--theta", type=float)
    run.add_argument("--topk", type=int)
    run.add_argument("--keyframe-every", type=int)
    run.add_argument("--densify-stride", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--max-labels", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--no-confidence-update", action="store_true")
    run.add_argument("--no-pruning", action="store_true")
    _add_synthetic_args(run)
    run.set_defaults(func=cmd_run)

    render = sub.add_parser("render", help="Render a scene at a trajectory pose")
    render.add_argument("--scene", required=True)
    render.add_argument("--intrinsics", required=True)
    render.add_argument("--trajectory", required=True)
    render.add_argument("--frame", type=int, default=0)
    render.add_argument("--out", required=True)
    render.add_argument("--max-labels", type=int)
    render.set_defaults(func=cmd_render)

    manipulate = sub.add_parser("manipulate", help="Edit labeled objects of a scene file")
    manipulate.add_argument("--scene", required=True)
    manipulate.add_argument("--out", help="Output scene (defaults to editing in place)")
    manipulate.add_argument("--remove-label", type=int)
    manipulate.add_argument("--move-label", type=int)
    manipulate.add_argument("--offset", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    manipulate.add_argument("--rotate-label", type=int)
    manipulate.add_argument("--yaw", type=float, default=0.0, help="Degrees about +z")
    manipulate.add_argument("--max-labels", type=int)
    manipulate.set_defaults(func=cmd_manipulate)

    query = sub.add_parser("query", help="List labels of a class")
    query.add_argument("class_name")
    query.add_argument("--table", required=True)
    query.add_argument("--scene")
    query.add_argument("--max-labels", type=int)
    query.set_defaults(func=cmd_query)

    consensus = sub.add_parser("consensus", help="Single consensus step on two label maps")
    consensus.add_argument("--input", required=True)
    consensus.add_argument("--rendered", required=True)
    consensus.add_argument("--input-confidence", type=float, default=0.8)
    consensus.add_argument("--map-confidence", type=float, default=0.8)
    consensus.add_argument("--max-labels", type=int, default=2000)
    consensus.add_argument("--out", help="Write the consistent input label map here")
    consensus.set_defaults(func=cmd_consensus)

    bench = sub.add_parser("bench", help="Rendering throughput report")
    bench.add_argument("--gaussians", type=int, default=10000)
    bench.add_argument("--width", type=int, default=320)
    bench.add_argument("--height", type=int, default=240)
    bench.add_argument("--repeats", type=int, default=3)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.basicConfig(
            level=getattr(logging, args.log_level),
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        )
    try:
        return args.func(args)
    except (FormatError, ValueError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return 1
