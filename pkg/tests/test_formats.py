"""Tests for file formats, detections and recorded sequences."""

import numpy as np
import pytest

from semsplat.consensus import InputSegmentation
from semsplat.errors import DimensionMismatchError, FormatError, GaussianValidationError
from semsplat.pipeline import (
    BYTES_PER_GAUSSIAN,
    FrameInput,
    read_scene,
    read_sequence,
    write_scene,
    write_sequence,
)
from semsplat.pipeline.detections import (
    Detection,
    associate_detections,
    bbox_iou,
    label_bboxes,
    read_detections,
    write_detections,
)
from semsplat.pipeline.formats import (
    read_confidence_map,
    read_depth,
    read_intrinsics,
    read_label_map,
    read_label_table,
    read_rgb,
    read_trajectory,
    scene_to_bytes,
    write_confidence_map,
    write_depth,
    write_intrinsics,
    write_label_map,
    write_label_table,
    write_rgb,
    write_trajectory,
)
from semsplat.render import CameraIntrinsics, Pose, look_at
from semsplat.scene import NONE_CLASS, GaussianScene, LabelClassTable, LabeledGaussian
from semsplat.voting import LabelMap


@pytest.fixture
def scene():
    """Two-Gaussian scene with distinct attributes."""
    scene = GaussianScene()
    scene.add_gaussians(
        [
            LabeledGaussian(
                position=(0.5, -1.0, 2.0),
                scale=(0.1, 0.2, 0.3),
                rotation=(np.cos(0.3), 0.0, np.sin(0.3), 0.0),
                opacity=0.75,
                color=(0.1, 0.5, 0.9),
                label=4,
            ),
            LabeledGaussian(position=(0.0, 0.0, 0.0), scale=(0.05, 0.05, 0.05), label=0),
        ]
    )
    return scene


class TestSceneFile:
    """Tests for the Gaussian scene file."""

    def test_record_size(self, scene):
        """Test each Gaussian takes 60 bytes after an 8-byte header."""
        assert BYTES_PER_GAUSSIAN == 60
        data = scene_to_bytes(scene)
        assert len(data) == 8 + 2 * 60
        assert data[:4] == b"OGS1"

    def test_write_read(self, scene, tmp_path):
        """Test attributes and labels survive a file round trip at float32 precision."""
        path = tmp_path / "scene.ogs"
        assert write_scene(path, scene) == 128
        loaded = read_scene(path)
        assert loaded.labels.tolist() == [4, 0]
        assert np.allclose(loaded.positions, scene.positions, atol=1e-6)
        assert np.allclose(loaded.rotations, scene.rotations, atol=1e-6)
        assert np.allclose(loaded.opacities, scene.opacities, atol=1e-6)
        assert 4 in loaded.label_registry

    def test_empty_scene(self, tmp_path):
        """Test an empty scene is just the header."""
        path = tmp_path / "empty.ogs"
        write_scene(path, GaussianScene())
        assert len(read_scene(path)) == 0

    def test_bad_magic(self, scene, tmp_path):
        """Test a wrong magic is a FormatError."""
        path = tmp_path / "scene.ogs"
        path.write_bytes(b"XXXX" + scene_to_bytes(scene)[4:])
        with pytest.raises(FormatError, match="magic"):
            read_scene(path)

    def test_truncated(self, scene, tmp_path):
        """Test a short body is a FormatError."""
        path = tmp_path / "scene.ogs"
        path.write_bytes(scene_to_bytes(scene)[:-10])
        with pytest.raises(FormatError, match="body"):
            read_scene(path)

    def test_label_over_budget(self, scene, tmp_path):
        """Test stored labels above the label budget are rejected."""
        path = tmp_path / "scene.ogs"
        write_scene(path, scene)
        with pytest.raises(GaussianValidationError):
            read_scene(path, max_labels=3)


class TestRasters:
    """Tests for label, confidence, depth and RGB images."""

    def test_label_map(self, tmp_path):
        """Test label maps keep width-major headers and exact values."""
        labels = np.arange(12, dtype=np.uint32).reshape(3, 4) * 1000
        path = tmp_path / "labels.oglm"
        write_label_map(path, LabelMap(labels))
        data = path.read_bytes()
        assert data[:4] == b"OGLM"
        assert np.frombuffer(data[4:12], dtype="<u4").tolist() == [4, 3]
        assert read_label_map(path) == LabelMap(labels)

    def test_confidence_and_depth(self, tmp_path):
        """Test float rasters keep float32 precision."""
        values = np.linspace(0.0, 1.0, 6).reshape(2, 3)
        write_confidence_map(tmp_path / "c.ogcm", values)
        write_depth(tmp_path / "d.ogdm", values * 4)
        assert np.allclose(read_confidence_map(tmp_path / "c.ogcm"), values, atol=1e-7)
        assert np.allclose(read_depth(tmp_path / "d.ogdm"), values * 4, atol=1e-6)

    def test_wrong_raster_kind(self, tmp_path):
        """Test reading a depth file as a label map fails on the magic."""
        write_depth(tmp_path / "d.ogdm", np.zeros((2, 2)))
        with pytest.raises(FormatError):
            read_label_map(tmp_path / "d.ogdm")

    def test_raster_size_mismatch(self, tmp_path):
        """Test a pixel payload that disagrees with the header is rejected."""
        path = tmp_path / "labels.oglm"
        write_label_map(path, LabelMap(np.zeros((2, 2), dtype=np.uint32)))
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(FormatError, match="pixel bytes"):
            read_label_map(path)

    def test_rgb_quantized(self, tmp_path):
        """Test PPM images round to 8-bit levels."""
        rgb = np.zeros((2, 3, 3))
        rgb[0, 0] = [1.0, 0.5, 0.0]
        path = tmp_path / "rgb.ppm"
        write_rgb(path, rgb)
        assert path.read_bytes()[:2] == b"P6"
        loaded = read_rgb(path)
        assert loaded.shape == (2, 3, 3)
        assert np.allclose(loaded[0, 0], [1.0, 128 / 255, 0.0])

    def test_rgb_not_an_image(self, tmp_path):
        """Test garbage bytes are a FormatError."""
        path = tmp_path / "rgb.ppm"
        path.write_bytes(b"not an image")
        with pytest.raises(FormatError):
            read_rgb(path)


class TestTextFiles:
    """Tests for trajectory, intrinsics, label table and detection files."""

    def test_trajectory(self, tmp_path):
        """Test poses are restored to world-to-camera within 1e-6."""
        poses = [look_at((3.0, 0.0, 1.5), (0.0, 0.0, 0.0)), Pose()]
        path = tmp_path / "trajectory.txt"
        write_trajectory(path, poses)
        loaded = read_trajectory(path)
        points = np.array([[0.3, -0.2, 0.1], [1.0, 2.0, 3.0]])
        for original, restored in zip(poses, loaded, strict=True):
            assert np.allclose(original.transform(points), restored.transform(points), atol=1e-6)

    def test_intrinsics(self, tmp_path):
        """Test intrinsics survive a round trip."""
        intrinsics = CameraIntrinsics.from_fov(128, 96, 60.0)
        write_intrinsics(tmp_path / "intrinsics.txt", intrinsics)
        loaded = read_intrinsics(tmp_path / "intrinsics.txt")
        assert loaded.width == 128
        assert loaded.height == 96
        assert loaded.fx == pytest.approx(intrinsics.fx)

    def test_intrinsics_wrong_columns(self, tmp_path):
        """Test a short intrinsics line is a FormatError."""
        path = tmp_path / "intrinsics.txt"
        path.write_text("100 100 64 48\n")
        with pytest.raises(FormatError):
            read_intrinsics(path)

    def test_label_table_keeps_none_class(self, tmp_path):
        """Test the None class is read back as a class name, not a missing value."""
        table = LabelClassTable()
        table.set(1, "chair", 0.9)
        table.set(2, NONE_CLASS, 0.0)
        write_label_table(tmp_path / "labels.txt", table)
        loaded = read_label_table(tmp_path / "labels.txt")
        assert loaded.get(1).class_name == "chair"
        assert loaded.get(2).is_none
        assert 2 in loaded

    def test_detections(self, tmp_path):
        """Test detections survive a round trip and empty files read as none."""
        detections = [Detection("mug", 0.8, (1, 2, 5, 6)), Detection("bowl", 0.6, (0, 0, 3, 3))]
        write_detections(tmp_path / "det.txt", detections)
        assert read_detections(tmp_path / "det.txt") == detections
        write_detections(tmp_path / "none.txt", [])
        assert read_detections(tmp_path / "none.txt") == []


class TestDetections:
    """Tests for box association."""

    def test_bbox_iou(self):
        """Test IoU of overlapping, identical and disjoint boxes."""
        assert bbox_iou((0, 0, 2, 2), (1, 0, 3, 2)) == pytest.approx(1 / 3)
        assert bbox_iou((0, 0, 2, 2), (0, 0, 2, 2)) == 1.0
        assert bbox_iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0

    def test_invalid_detection(self):
        """Test scores and boxes are validated."""
        with pytest.raises(ValueError):
            Detection("mug", 1.2, (0, 0, 1, 1))
        with pytest.raises(ValueError):
            Detection("mug", 0.5, (3, 0, 1, 1))

    def test_association(self):
        """Test labels take the class of a well-overlapping box, else None."""
        labels = np.zeros((8, 8), dtype=np.uint32)
        labels[1:4, 1:4] = 1
        labels[5:7, 5:8] = 2
        label_map = LabelMap(labels)
        assert label_bboxes(label_map) == {1: (1, 1, 4, 4), 2: (5, 5, 8, 7)}
        table = associate_detections(
            label_map,
            [Detection("mug", 0.9, (1, 1, 4, 4)), Detection("lamp", 0.7, (0, 5, 2, 8))],
        )
        assert table.get(1).class_name == "mug"
        assert table.get(1).score == 0.9
        assert table.get(2).is_none


class TestSequence:
    """Tests for the sequence directory layout."""

    def test_write_read(self, tmp_path):
        """Test frames, confidences and ground truth come back from disk."""
        intrinsics = CameraIntrinsics(fx=10.0, fy=10.0, cx=2.5, cy=1.5, width=6, height=4)
        labels = np.zeros((4, 6), dtype=np.uint32)
        labels[:, 3:] = 7
        segmentation = InputSegmentation(LabelMap(labels), {7: 0.625})
        frame = FrameInput(
            rgb=np.full((4, 6, 3), 0.2),
            depth=np.full((4, 6), 1.5),
            pose=look_at((1.0, 1.0, 1.0), (0.0, 0.0, 0.0)),
            segmentation=segmentation,
            detections=[Detection("mug", 0.8, (3, 0, 6, 4))],
            ground_truth=LabelMap(labels),
        )
        write_sequence(tmp_path / "seq", intrinsics, [frame, frame])
        loaded_intrinsics, frames = read_sequence(tmp_path / "seq")
        assert loaded_intrinsics.shape == (4, 6)
        assert len(frames) == 2
        assert frames[1].segmentation.label_map == LabelMap(labels)
        assert frames[1].segmentation.confidences == {7: pytest.approx(0.625)}
        assert frames[1].detections == frame.detections
        assert frames[1].ground_truth == LabelMap(labels)
        assert np.allclose(frames[0].depth, 1.5)

    def test_missing_frame_file(self, tmp_path):
        """Test a deleted raster is reported with its frame index."""
        intrinsics = CameraIntrinsics(fx=10.0, fy=10.0, cx=1.5, cy=1.5, width=4, height=4)
        frame = FrameInput(
            rgb=np.zeros((4, 4, 3)),
            depth=np.zeros((4, 4)),
            pose=Pose(),
            segmentation=InputSegmentation(LabelMap.blank(4, 4), {}),
        )
        directory = write_sequence(tmp_path / "seq", intrinsics, [frame])
        (directory / "depth_00000.ogdm").unlink()
        with pytest.raises(FormatError, match="Frame 0"):
            read_sequence(directory)

    def test_frame_shape_mismatch(self):
        """Test frames reject rasters of different sizes."""
        with pytest.raises(DimensionMismatchError, match="depth"):
            FrameInput(
                rgb=np.zeros((4, 4, 3)),
                depth=np.zeros((4, 5)),
                pose=Pose(),
                segmentation=InputSegmentation(LabelMap.blank(4, 4), {}),
            )
