"""Tests for synthetic scenes, trajectories and segmentation perturbation."""

import numpy as np
import pytest

from semsplat.pipeline import (
    PerturbationSpec,
    SyntheticObject,
    SyntheticSceneSpec,
    generate_synthetic,
    make_trajectory,
    perturb_segmentation,
)
from semsplat.pipeline.synthetic import SCENE_CENTER
from semsplat.voting import LabelMap


def single_sphere_spec(**overrides):
    """One sphere seen from close by on a short orbit."""
    values = dict(
        objects=[
            SyntheticObject(
                label=3,
                primitive="sphere",
                center=(0.0, 0.0, 0.15),
                half_extent=(0.15, 0.15, 0.15),
                yaw=0.0,
                color=(0.8, 0.2, 0.2),
                class_name="ball",
            )
        ],
        gaussians_per_object=400,
        frame_count=1,
        orbit_radius=1.0,
        orbit_height=0.6,
        width=64,
        height=48,
    )
    values.update(overrides)
    return SyntheticSceneSpec(**values)


def block_map():
    """12x12 ground truth: labels 1 and 2 touch, label 3 stands apart."""
    labels = np.zeros((12, 12), dtype=np.uint32)
    labels[0:4, 0:4] = 1
    labels[0:4, 4:8] = 2
    labels[8:12, 8:12] = 3
    return LabelMap(labels)


class TestSceneSpec:
    """Tests for scene description validation."""

    def test_unknown_trajectory(self):
        """Test trajectories are restricted to the known kinds."""
        with pytest.raises(ValueError, match="trajectory"):
            SyntheticSceneSpec(trajectory="spiral")

    def test_duplicate_object_labels(self):
        """Test object labels must be unique."""
        obj = single_sphere_spec().objects[0]
        with pytest.raises(ValueError, match="unique"):
            SyntheticSceneSpec(objects=[obj, obj])

    def test_too_few_gaussians(self):
        """Test objects need enough Gaussians to cover a surface."""
        with pytest.raises(ValueError, match="gaussians_per_object"):
            SyntheticSceneSpec(gaussians_per_object=4)


class TestTrajectory:
    """Tests for camera trajectories."""

    def test_orbit_radius_and_height(self):
        """Test every orbit camera sits on the configured circle."""
        spec = SyntheticSceneSpec(frame_count=8, orbit_radius=3.0, orbit_height=1.6)
        poses = make_trajectory(spec)
        assert len(poses) == 8
        for pose in poses:
            center = pose.camera_center
            assert np.hypot(*(center[:2] - SCENE_CENTER[:2])) == pytest.approx(3.0, abs=1e-6)
            assert center[2] == pytest.approx(1.6, abs=1e-6)

    def test_orbit_looks_at_center(self):
        """Test the scene centre projects onto the optical axis."""
        spec = SyntheticSceneSpec(frame_count=4)
        for pose in make_trajectory(spec):
            local = pose.transform(SCENE_CENTER[None, :])[0]
            assert np.allclose(local[:2], 0.0, atol=1e-6)
            assert local[2] > 0

    def test_zero_frames(self):
        """Test an empty trajectory is rejected."""
        with pytest.raises(ValueError, match="zero frames"):
            make_trajectory(SyntheticSceneSpec(frame_count=0))

    def test_pan_keeps_position(self):
        """Test a pan rotates in place."""
        spec = SyntheticSceneSpec(trajectory="pan", frame_count=5)
        centers = np.array([pose.camera_center for pose in make_trajectory(spec)])
        assert np.allclose(centers, centers[0], atol=1e-6)

    def test_waypoints(self):
        """Test waypoint paths start and end on the first and last waypoint."""
        waypoints = [(2.0, 0.0, 1.0), (0.0, 2.0, 1.0), (-2.0, 0.0, 1.5)]
        spec = SyntheticSceneSpec(trajectory="waypoints", waypoints=waypoints, frame_count=6)
        poses = make_trajectory(spec)
        assert np.allclose(poses[0].camera_center, waypoints[0], atol=1e-6)
        assert np.allclose(poses[-1].camera_center, waypoints[-1], atol=1e-6)

    def test_waypoints_need_two_points(self):
        """Test a single waypoint is not a path."""
        spec = SyntheticSceneSpec(trajectory="waypoints", waypoints=[(1.0, 1.0, 1.0)])
        with pytest.raises(ValueError, match="two waypoints"):
            make_trajectory(spec)


class TestGenerateSynthetic:
    """Tests for ground-truth rendering."""

    @pytest.fixture
    def dataset(self):
        """One sphere, one frame."""
        return generate_synthetic(single_sphere_spec(), seed=0)

    def test_single_object_frame(self, dataset):
        """Test the ground-truth map holds the object's label and background."""
        assert len(dataset) == 1
        labels = dataset.label_maps[0]
        assert labels.label_set() == {3}
        assert labels.labels[24, 32] == 3
        assert labels.labels[0, 0] == 0
        assert dataset.depth[0][24, 32] > 0
        assert dataset.depth[0][0, 0] == 0
        assert dataset.rgb[0].shape == (48, 64, 3)

    def test_scene_and_class_table(self, dataset):
        """Test the scene carries the object's Gaussians and class."""
        assert len(dataset.scene) == 400
        assert set(dataset.scene.label_census()) == {3}
        assert dataset.scene.global_table.get(3).class_name == "ball"

    def test_detections(self, dataset):
        """Test each visible object gets one detection with a plausible score."""
        (detection,) = dataset.detections[0]
        assert detection.class_name == "ball"
        assert 0.6 <= detection.score <= 0.95

    def test_frames_carry_ground_truth(self, dataset):
        """Test frame inputs expose the ground-truth map."""
        (frame,) = dataset.frames(PerturbationSpec(permute_labels=False))
        assert frame.ground_truth == dataset.label_maps[0]
        assert frame.segmentation.label_map == dataset.label_maps[0]

    def test_deterministic(self):
        """Test equal specs and seeds produce identical data."""
        spec = SyntheticSceneSpec(
            object_count=3, gaussians_per_object=60, frame_count=2, width=32, height=24
        )
        a = generate_synthetic(spec, seed=7)
        b = generate_synthetic(spec, seed=7)
        assert [o.center for o in a.objects] == [o.center for o in b.objects]
        assert np.array_equal(a.scene.positions, b.scene.positions)
        assert a.label_maps == b.label_maps
        assert all(np.array_equal(x, y) for x, y in zip(a.rgb, b.rgb, strict=True))
        assert a.detections == b.detections


class TestPerturbation:
    """Tests for the segmentation noise model."""

    def test_spec_validation(self):
        """Test probabilities and part counts are validated."""
        with pytest.raises(ValueError, match="merge_prob"):
            PerturbationSpec(merge_prob=1.5)
        with pytest.raises(ValueError, match="part range"):
            PerturbationSpec(min_parts=1)

    def test_no_noise_is_identity(self):
        """Test disabling every perturbation returns the ground truth."""
        gt = block_map()
        seg = perturb_segmentation(gt, PerturbationSpec(permute_labels=False), 0)
        assert seg.label_map == gt
        assert seg.confidences == {1: 0.8, 2: 0.8, 3: 0.8}

    def test_permutation_is_a_rename(self):
        """Test permuted ids describe the same segments."""
        gt = block_map()
        seg = perturb_segmentation(gt, PerturbationSpec(seed=4), 2)
        assert len(seg.label_map.label_set()) == 3
        for label in gt.label_set():
            ids = np.unique(seg.label_map.labels[gt.mask(label)])
            assert len(ids) == 1
            assert np.array_equal(seg.label_map.mask(int(ids[0])), gt.mask(label))

    def test_oversegmentation(self):
        """Test each object splits into the requested number of parts."""
        gt = block_map()
        spec = PerturbationSpec(oversegment_prob=1.0, min_parts=2, max_parts=2)
        seg = perturb_segmentation(gt, spec, 0)
        assert len(seg.label_map.label_set()) == 6
        for label in gt.label_set():
            parts = np.unique(seg.label_map.labels[gt.mask(label)])
            assert len(parts) == 2
            assert 0 not in parts

    def test_merge_joins_touching_objects(self):
        """Test merges only join objects that touch."""
        gt = block_map()
        spec = PerturbationSpec(permute_labels=False, merge_prob=1.0)
        seg = perturb_segmentation(gt, spec, 0)
        assert seg.label_map.label_set() == {3, 4}
        assert np.array_equal(seg.label_map.mask(4), gt.mask(1) | gt.mask(2))

    def test_confidence_noise_bounds(self):
        """Test noisy confidences stay around the base value."""
        gt = block_map()
        spec = PerturbationSpec(base_confidence=0.6, confidence_noise=0.1, seed=3)
        seg = perturb_segmentation(gt, spec, 5)
        assert all(0.5 - 1e-9 <= c <= 0.7 + 1e-9 for c in seg.confidences.values())

    def test_deterministic_per_frame(self):
        """Test the same seed and frame index reproduce the segmentation."""
        gt = block_map()
        spec = PerturbationSpec(oversegment_prob=0.5, merge_prob=0.5, seed=11)
        a = perturb_segmentation(gt, spec, 3)
        b = perturb_segmentation(gt, spec, 3)
        assert a.label_map == b.label_map
        assert a.confidences == b.confidences
