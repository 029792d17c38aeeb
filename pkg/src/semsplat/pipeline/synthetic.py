"""Synthetic desk-scale scenes and inconsistent per-frame segmentations.

Objects are boxes, spheres or flat patches covered with small Gaussians.
Ground-truth RGB, depth and label maps come from rendering the ground-truth
scene; the perturbation model then breaks the label maps the way a 2D
segmenter does across views: random ids, over-segmentation and merges.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from semsplat.config import RenderConfig
from semsplat.consensus.matching import InputSegmentation
from semsplat.pipeline.dataset import FrameInput
from semsplat.pipeline.detections import Detection, label_bboxes
from semsplat.render.camera import CameraIntrinsics, Pose, look_at
from semsplat.render.rasterizer import Rasterizer
from semsplat.scene.scene import GaussianScene
from semsplat.voting.label_map import LabelMap
from semsplat.voting.voting import votes_from_frame

logger = logging.getLogger(__name__)

PRIMITIVES = ("box", "sphere", "patch")
TRAJECTORIES = ("orbit", "pan", "waypoints")
CLASS_NAMES = {
    "box": ("book", "monitor", "keyboard", "drawer"),
    "sphere": ("ball", "bowl", "plant", "globe"),
    "patch": ("mat", "poster", "tray"),
}
GT_OPACITY = 0.9
SCENE_CENTER = np.array([0.0, 0.0, 0.15])


@dataclass
class SyntheticObject:
    """One ground-truth object."""

    label: int
    primitive: str
    center: tuple[float, float, float]
    half_extent: tuple[float, float, float]  # sphere radius is half_extent[0]
    yaw: float
    color: tuple[float, float, float]
    class_name: str

    @property
    def footprint_radius(self) -> float:
        hx, hy, _ = self.half_extent
        return float(hx if self.primitive == "sphere" else np.hypot(hx, hy))


@dataclass
class SyntheticSceneSpec:
    """Layout, sampling density, camera and trajectory of a synthetic scene."""

    object_count: int = 8
    gaussians_per_object: int = 300
    room_extent: float = 2.0  # side of the square the objects are placed in
    objects: list[SyntheticObject] | None = None
    trajectory: str = "orbit"
    frame_count: int = 40
    orbit_radius: float = 3.0  # horizontal distance from the scene centre
    orbit_height: float = 1.6
    orbit_degrees: float = 360.0
    pan_degrees: float = 60.0
    waypoints: list[tuple[float, float, float]] = field(default_factory=list)
    width: int = 128
    height: int = 96
    fov_degrees: float = 60.0

    def __post_init__(self):
        """Validate the scene description."""
        if self.gaussians_per_object < 8:
            raise ValueError(
                f"Invalid gaussians_per_object {self.gaussians_per_object}. Must be >= 8."
            )
        if self.trajectory not in TRAJECTORIES:
            raise ValueError(f"Unknown trajectory '{self.trajectory}', expected {TRAJECTORIES}")
        if self.frame_count < 0:
            raise ValueError(f"Invalid frame_count {self.frame_count}")
        if self.objects is not None:
            labels = [o.label for o in self.objects]
            if len(set(labels)) != len(labels) or min(labels, default=1) <= 0:
                raise ValueError(f"Object labels must be unique and nonzero, got {labels}")
            for obj in self.objects:
                if obj.primitive not in PRIMITIVES:
                    raise ValueError(f"Unknown primitive '{obj.primitive}'")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_fov(self.width, self.height, self.fov_degrees)


@dataclass
class PerturbationSpec:
    """Noise model applied to ground-truth label maps."""

    permute_labels: bool = True
    oversegment_prob: float = 0.0
    merge_prob: float = 0.0
    min_parts: int = 2
    max_parts: int = 4
    base_confidence: float = 0.8
    confidence_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        """Validate probabilities and part counts."""
        for name in ("oversegment_prob", "merge_prob", "base_confidence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Invalid {name} {value}. Must be in [0, 1].")
        if self.confidence_noise < 0:
            raise ValueError(f"Invalid confidence_noise {self.confidence_noise}")
        if not 2 <= self.min_parts <= self.max_parts:
            raise ValueError(
                f"Invalid part range [{self.min_parts}, {self.max_parts}]. Need 2 <= min <= max."
            )


@dataclass
class SyntheticDataset:
    """Ground-truth scene, trajectory and per-frame renders."""

    scene: GaussianScene
    objects: list[SyntheticObject]
    intrinsics: CameraIntrinsics
    poses: list[Pose]
    rgb: list[np.ndarray]
    depth: list[np.ndarray]
    label_maps: list[LabelMap]
    detections: list[list[Detection]]

    def __len__(self) -> int:
        return len(self.poses)

    def frames(self, perturbation: PerturbationSpec | None = None) -> list[FrameInput]:
        """Per-frame inputs with perturbed segmentations and class tables."""
        perturbation = perturbation or PerturbationSpec()
        return [
            FrameInput(
                rgb=self.rgb[i],
                depth=self.depth[i],
                pose=self.poses[i],
                segmentation=perturb_segmentation(self.label_maps[i], perturbation, i),
                detections=self.detections[i],
                ground_truth=self.label_maps[i],
            )
            for i in range(len(self))
        ]


def _place_objects(spec: SyntheticSceneSpec, rng: np.random.Generator) -> list[SyntheticObject]:
    objects: list[SyntheticObject] = []
    half_room = spec.room_extent / 2
    for label in range(1, spec.object_count + 1):
        primitive = PRIMITIVES[int(rng.integers(len(PRIMITIVES)))]
        if primitive == "sphere":
            radius = rng.uniform(0.12, 0.22)
            half = (radius, radius, radius)
        elif primitive == "box":
            half = tuple(rng.uniform(0.08, 0.22, size=3))
        else:
            half = (rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.3), 0.005)
        yaw = rng.uniform(0.0, np.pi)
        color = tuple(rng.uniform(0.15, 0.95, size=3))
        names = CLASS_NAMES[primitive]
        class_name = names[int(rng.integers(len(names)))]

        candidate = None
        for _ in range(1000):
            xy = rng.uniform(-half_room, half_room, size=2)
            trial = SyntheticObject(
                label=label,
                primitive=primitive,
                center=(float(xy[0]), float(xy[1]), float(half[2])),
                half_extent=tuple(float(h) for h in half),
                yaw=float(yaw),
                color=tuple(float(c) for c in color),
                class_name=class_name,
            )
            if all(
                np.hypot(xy[0] - o.center[0], xy[1] - o.center[1])
                >= trial.footprint_radius + o.footprint_radius + 0.05
                for o in objects
            ):
                candidate = trial
                break
        if candidate is None:
            raise ValueError(
                f"Could not place {spec.object_count} objects "
                f"in a room of extent {spec.room_extent}"
            )
        objects.append(candidate)
    return objects


def _sample_surface(
    obj: SyntheticObject, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Surface points of an object and the matching isotropic Gaussian scale."""
    hx, hy, hz = obj.half_extent
    if obj.primitive == "sphere":
        directions = rng.normal(size=(count, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        local = directions * hx
        area = 4 * np.pi * hx**2
    elif obj.primitive == "patch":
        local = np.column_stack(
            [rng.uniform(-hx, hx, count), rng.uniform(-hy, hy, count), np.zeros(count)]
        )
        area = 4 * hx * hy
    else:
        faces = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
        face = rng.choice(6, size=count, p=faces / faces.sum())
        u, v = rng.uniform(-1.0, 1.0, size=(2, count))
        local = np.zeros((count, 3))
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        half = np.array([hx, hy, hz])
        for a in range(3):
            on_axis = axis == a
            others = [b for b in range(3) if b != a]
            local[on_axis, a] = sign[on_axis] * half[a]
            local[on_axis, others[0]] = u[on_axis] * half[others[0]]
            local[on_axis, others[1]] = v[on_axis] * half[others[1]]
        area = 8 * faces.sum()
    c, s = np.cos(obj.yaw), np.sin(obj.yaw)
    yaw = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    points = local @ yaw.T + np.asarray(obj.center)
    return points, 0.7 * float(np.sqrt(area / count))


def build_scene(
    objects: list[SyntheticObject], gaussians_per_object: int, rng: np.random.Generator
) -> GaussianScene:
    """Ground-truth scene with each object's class registered at score 1.0."""
    scene = GaussianScene(max_labels=max([o.label for o in objects], default=1))
    for obj in objects:
        points, scale = _sample_surface(obj, gaussians_per_object, rng)
        n = len(points)
        colors = np.clip(np.asarray(obj.color) + rng.normal(0.0, 0.03, size=(n, 3)), 0.0, 1.0)
        scene.add_arrays(
            positions=points,
            scales=np.full((n, 3), scale),
            rotations=np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)),
            opacities=np.full(n, GT_OPACITY),
            colors=colors,
            labels=np.full(n, obj.label),
        )
        scene.global_table.set(obj.label, obj.class_name, 1.0)
    return scene


def make_trajectory(spec: SyntheticSceneSpec) -> list[Pose]:
    """Camera poses for the configured trajectory.

    Raises:
        ValueError: for a trajectory with no frames.
    """
    n = spec.frame_count
    if n == 0:
        raise ValueError("Trajectory has zero frames")
    if spec.trajectory == "orbit":
        angles = np.radians(spec.orbit_degrees) * np.arange(n) / n
        return [
            look_at(
                (
                    SCENE_CENTER[0] + spec.orbit_radius * np.cos(a),
                    SCENE_CENTER[1] + spec.orbit_radius * np.sin(a),
                    spec.orbit_height,
                ),
                SCENE_CENTER,
            )
            for a in angles
        ]
    if spec.trajectory == "pan":
        eye = np.array([SCENE_CENTER[0] + spec.orbit_radius, SCENE_CENTER[1], spec.orbit_height])
        sweep = np.radians(spec.pan_degrees) * (np.arange(n) / max(n - 1, 1) - 0.5)
        base = np.arctan2(SCENE_CENTER[1] - eye[1], SCENE_CENTER[0] - eye[0])
        distance = np.hypot(*(SCENE_CENTER[:2] - eye[:2]))
        return [
            look_at(
                eye,
                (
                    eye[0] + distance * np.cos(base + a),
                    eye[1] + distance * np.sin(base + a),
                    SCENE_CENTER[2],
                ),
            )
            for a in sweep
        ]
    if len(spec.waypoints) < 2:
        raise ValueError("Waypoint trajectory needs at least two waypoints")
    points = np.asarray(spec.waypoints, dtype=np.float64)
    lengths = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    samples = np.linspace(0.0, lengths[-1], n)
    eyes = np.column_stack([np.interp(samples, lengths, points[:, a]) for a in range(3)])
    return [look_at(eye, SCENE_CENTER) for eye in eyes]


def generate_synthetic(spec: SyntheticSceneSpec, seed: int = 0) -> SyntheticDataset:
    """Build the ground-truth scene, trajectory and per-frame renders.

    Deterministic for a fixed spec and seed.
    """
    rng = np.random.default_rng(seed)
    objects = spec.objects if spec.objects is not None else _place_objects(spec, rng)
    poses = make_trajectory(spec)
    scene = build_scene(objects, spec.gaussians_per_object, rng)
    intrinsics = spec.intrinsics()
    config = RenderConfig()
    rasterizer = Rasterizer(config)
    names = {o.label: o.class_name for o in objects}

    rgb, depth, label_maps, detections = [], [], [], []
    for i, pose in enumerate(poses):
        votes = votes_from_frame(
            rasterizer.render(scene, pose, intrinsics), k=1, coverage_min=config.label_coverage_min
        )
        rgb.append(votes.frame.rgb)
        depth.append(votes.frame.normalized_depth(config.label_coverage_min))
        label_maps.append(votes.label_map)
        score_rng = np.random.default_rng([seed, i, 1])
        detections.append(
            [
                Detection(names[label], float(score_rng.uniform(0.6, 0.95)), box)
                for label, box in label_bboxes(votes.label_map).items()
            ]
        )
    logger.info(
        f"Generated {len(objects)} objects, {len(scene)} Gaussians, {len(poses)} frames"
    )
    return SyntheticDataset(
        scene=scene,
        objects=objects,
        intrinsics=intrinsics,
        poses=poses,
        rgb=rgb,
        depth=depth,
        label_maps=label_maps,
        detections=detections,
    )


def _split(mask: np.ndarray, parts: int, angle: float) -> list[np.ndarray]:
    """Cut a mask into parts with parallel image-space lines at an angle."""
    rows, cols = np.nonzero(mask)
    order = np.argsort(cols * np.cos(angle) + rows * np.sin(angle), kind="stable")
    pieces = []
    for chunk in np.array_split(order, parts):
        piece = np.zeros_like(mask)
        piece[rows[chunk], cols[chunk]] = True
        pieces.append(piece)
    return pieces


def perturb_segmentation(
    gt_map: LabelMap, spec: PerturbationSpec, frame_index: int
) -> InputSegmentation:
    """Turn a ground-truth map into an inconsistent per-frame segmentation.

    Deterministic per (spec.seed, frame_index).
    """
    rng = np.random.default_rng([spec.seed, frame_index])
    objects = sorted(gt_map.label_set())
    masks = {label: gt_map.mask(label) for label in objects}

    groups: list[list[int]] = []
    grouped: set[int] = set()
    for label in objects:
        if label in grouped:
            continue
        group = [label]
        if rng.random() < spec.merge_prob:
            grown = ndimage.binary_dilation(masks[label], iterations=2)
            neighbours = [
                o
                for o in objects
                if o not in grouped and o != label and (grown & masks[o]).any()
            ]
            if neighbours:
                group.append(neighbours[int(rng.integers(len(neighbours)))])
        grouped.update(group)
        groups.append(group)

    segments: list[tuple[np.ndarray, int | None]] = []
    for group in groups:
        mask = np.logical_or.reduce([masks[o] for o in group])
        if rng.random() < spec.oversegment_prob:
            parts = int(rng.integers(spec.min_parts, spec.max_parts + 1))
            parts = min(parts, int(mask.sum()))
            if parts >= 2:
                angle = rng.uniform(0.0, np.pi)
                segments.extend((piece, None) for piece in _split(mask, parts, angle))
                continue
        segments.append((mask, group[0] if len(group) == 1 else None))

    if spec.permute_labels:
        ids = rng.permutation(np.arange(1, len(segments) + 1)) + int(rng.integers(0, 1000))
    else:
        first = max(objects, default=0) + 1
        fresh = iter(range(first, first + len(segments)))
        ids = np.array([keep if keep is not None else next(fresh) for _, keep in segments])

    labels = np.zeros(gt_map.shape, dtype=np.uint32)
    confidences: dict[int, float] = {}
    for (mask, _), segment_id in zip(segments, ids, strict=True):
        labels[mask] = segment_id
        noise = 0.0
        if spec.confidence_noise:
            noise = rng.uniform(-spec.confidence_noise, spec.confidence_noise)
        confidences[int(segment_id)] = float(np.clip(spec.base_confidence + noise, 0.0, 1.0))
    return InputSegmentation(LabelMap(labels), confidences)
