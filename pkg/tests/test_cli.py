"""Tests for the command-line interface."""

import json

import numpy as np
import pytest

from semsplat.cli import main
from semsplat.pipeline.formats import (
    read_intrinsics,
    read_label_map,
    read_rgb,
    read_scene,
    read_trajectory,
    write_label_map,
    write_label_table,
    write_scene,
)
from semsplat.render import project_covariance
from semsplat.render.projection import conic_from_cov2d
from semsplat.scene import GaussianScene, LabelClassTable, LabeledGaussian
from semsplat.voting import LabelMap


def halves(left, right, size=10):
    """size×size map with distinct labels in the left and right column halves."""
    labels = np.full((size, size), right, dtype=np.uint32)
    labels[:, : size // 2] = left
    return LabelMap(labels)


class TestConsensusCommand:
    """Tests for the single-step consensus command."""

    def test_full_match_report(self, tmp_path, capsys):
        """Test matching halves map to the rendered labels."""
        write_label_map(tmp_path / "input.oglm", halves(5, 6))
        write_label_map(tmp_path / "rendered.oglm", halves(1, 2))
        out = tmp_path / "consistent.oglm"

        code = main(
            [
                "consensus",
                "--input",
                str(tmp_path / "input.oglm"),
                "--rendered",
                str(tmp_path / "rendered.oglm"),
                "--out",
                str(out),
            ]
        )

        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["counts"]["full_match"] == 2
        assert report["mapping"] == {"5": 1, "6": 2}
        assert report["new_labels"] == []
        assert read_label_map(out) == halves(1, 2)

    def test_missing_file(self, tmp_path):
        """Test a missing input map fails with exit code 1."""
        code = main(
            [
                "consensus",
                "--input",
                str(tmp_path / "absent.oglm"),
                "--rendered",
                str(tmp_path / "absent.oglm"),
            ]
        )
        assert code == 1

    def test_bad_magic(self, tmp_path):
        """Test a corrupt label map fails with exit code 1."""
        (tmp_path / "bad.oglm").write_bytes(b"XXXX" + bytes(16))
        write_label_map(tmp_path / "rendered.oglm", halves(1, 2))
        code = main(
            [
                "consensus",
                "--input",
                str(tmp_path / "bad.oglm"),
                "--rendered",
                str(tmp_path / "rendered.oglm"),
            ]
        )
        assert code == 1


class TestSceneCommands:
    """Tests for scene editing and class queries."""

    @pytest.fixture
    def scene_path(self, tmp_path):
        """Two labeled objects: label 1 at the origin, label 2 at x = 1."""
        scene = GaussianScene()
        scene.add_gaussians(
            [
                LabeledGaussian(position=(-0.1, 0.0, 0.0), scale=(0.05, 0.05, 0.05), label=1),
                LabeledGaussian(position=(0.1, 0.0, 0.0), scale=(0.05, 0.05, 0.05), label=1),
                LabeledGaussian(position=(1.0, 0.0, 0.0), scale=(0.05, 0.05, 0.05), label=2),
            ]
        )
        path = tmp_path / "scene.ogs"
        write_scene(path, scene)
        return path

    def test_remove_label(self, scene_path, tmp_path):
        """Test removing a label drops its Gaussians."""
        out = tmp_path / "edited.ogs"
        args = ["manipulate", "--scene", str(scene_path), "--remove-label", "2", "--out", str(out)]
        code = main(args)
        assert code == 0
        assert read_scene(out).labels.tolist() == [1, 1]
        assert len(read_scene(scene_path)) == 3

    def test_move_label_in_place(self, scene_path):
        """Test moving a label edits the scene file in place."""
        code = main(
            ["manipulate", "--scene", str(scene_path), "--move-label", "2"]
            + ["--offset", "0", "0", "0.5"]
        )
        assert code == 0
        scene = read_scene(scene_path)
        assert scene.positions[2] == pytest.approx([1.0, 0.0, 0.5])
        assert scene.positions[0] == pytest.approx([-0.1, 0.0, 0.0])

    def test_rotate_label(self, scene_path):
        """Test a half turn about +z swaps an object's Gaussians about its centroid."""
        args = ["manipulate", "--scene", str(scene_path), "--rotate-label", "1", "--yaw", "180"]
        code = main(args)
        assert code == 0
        scene = read_scene(scene_path)
        assert scene.positions[0] == pytest.approx([0.1, 0.0, 0.0], abs=1e-6)
        assert scene.positions[1] == pytest.approx([-0.1, 0.0, 0.0], abs=1e-6)
        assert scene.positions[2] == pytest.approx([1.0, 0.0, 0.0])

    def test_query(self, scene_path, tmp_path, capsys):
        """Test class queries list matching labels, optionally only those in a scene."""
        table = LabelClassTable()
        table.set(1, "chair", 0.9)
        table.set(2, "cup", 0.7)
        table.set(3, "chair", 0.6)
        write_label_table(tmp_path / "labels.txt", table)

        assert main(["query", "chair", "--table", str(tmp_path / "labels.txt")]) == 0
        assert capsys.readouterr().out.split() == ["1", "3"]

        table_path = str(tmp_path / "labels.txt")
        assert main(["query", "chair", "--table", table_path, "--scene", str(scene_path)]) == 0
        assert capsys.readouterr().out.split() == ["1"]

    def test_scene_labels_above_default_budget(self, tmp_path, monkeypatch, capsys):
        """Test scenes written with labels past 2000 reopen under --max-labels."""
        monkeypatch.delenv("SEMSPLAT_MAX_LABELS", raising=False)
        scene = GaussianScene(max_labels=5000)
        scene.add_gaussians(
            [
                LabeledGaussian(position=(0.0, 0.0, 0.0), scale=(0.05, 0.05, 0.05), label=1),
                LabeledGaussian(position=(1.0, 0.0, 0.0), scale=(0.05, 0.05, 0.05), label=4321),
            ]
        )
        path = tmp_path / "big.ogs"
        write_scene(path, scene)
        out = tmp_path / "edited.ogs"
        args = ["manipulate", "--scene", str(path), "--remove-label", "1", "--out", str(out)]

        assert main(args) == 1
        assert main(args + ["--max-labels", "5000"]) == 0
        assert read_scene(out, max_labels=5000).labels.tolist() == [4321]

        table = LabelClassTable()
        table.set(4321, "lamp", 0.8)
        write_label_table(tmp_path / "labels.txt", table)
        capsys.readouterr()
        query = ["query", "lamp", "--table", str(tmp_path / "labels.txt"), "--scene", str(out)]
        assert main(query + ["--max-labels", "5000"]) == 0
        assert capsys.readouterr().out.split() == ["4321"]

    def test_max_labels_from_environment(self, tmp_path, monkeypatch):
        """Test SEMSPLAT_MAX_LABELS raises the bound when no flag is given."""
        scene = GaussianScene(max_labels=3000)
        scene.add_gaussians(
            [LabeledGaussian(position=(0.0, 0.0, 0.0), scale=(0.05, 0.05, 0.05), label=2500)]
        )
        path = tmp_path / "big.ogs"
        write_scene(path, scene)
        monkeypatch.setenv("SEMSPLAT_MAX_LABELS", "3000")
        assert main(["manipulate", "--scene", str(path), "--move-label", "2500"]) == 0

    def test_rejects_nonpositive_max_labels(self, scene_path):
        """Test a zero label bound fails with exit code 1."""
        assert main(["manipulate", "--scene", str(scene_path), "--max-labels", "0"]) == 1


class TestSequenceCommands:
    """Tests for dataset generation, mapping and rendering."""

    @pytest.fixture
    def sequence(self, tmp_path):
        """Small synthetic sequence on disk."""
        out = tmp_path / "seq"
        code = main(
            [
                "synth",
                "--out",
                str(out),
                "--objects",
                "2",
                "--gaussians-per-object",
                "40",
                "--frames",
                "2",
                "--width",
                "32",
                "--height",
                "24",
            ]
        )
        assert code == 0
        return out

    def test_synth_layout(self, sequence):
        """Test the sequence holds per-frame files and the ground-truth scene."""
        assert (sequence / "intrinsics.txt").exists()
        assert (sequence / "trajectory.txt").exists()
        assert (sequence / "labels_00001.oglm").exists()
        assert (sequence / "gt_00000.oglm").exists()
        assert len(read_scene(sequence / "gt_scene.ogs")) == 80

    def test_run_sequence(self, sequence, tmp_path, capsys):
        """Test mapping a recorded sequence prints a summary and writes outputs."""
        capsys.readouterr()
        out = tmp_path / "run"
        args = ["run", "--input", str(sequence), "--output", str(out), "--keyframe-every", "1"]
        code = main(args)
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["frames"] == 2
        assert (out / "scene.ogs").exists()
        assert (out / "metrics.csv").exists()

    def test_run_rejects_bad_threshold(self, sequence):
        """Test invalid overrides fail with exit code 1."""
        assert main(["run", "--input", str(sequence), "--tau1", "1.5"]) == 1

    def test_render(self, sequence, tmp_path):
        """Test rendering the ground-truth scene writes all three rasters."""
        out = tmp_path / "render"
        args = [
            "render",
            "--scene",
            str(sequence / "gt_scene.ogs"),
            "--intrinsics",
            str(sequence / "intrinsics.txt"),
            "--trajectory",
            str(sequence / "trajectory.txt"),
            "--frame",
            "1",
            "--out",
            str(out),
        ]
        assert main(args) == 0
        assert (out / "rgb_00001.ppm").exists()
        assert (out / "depth_00001.ogdm").exists()
        assert read_label_map(out / "labels_00001.oglm").shape == (24, 32)

    def test_removed_label_leaves_rest_of_render_unchanged(self, sequence, tmp_path):
        """Test a removed object vanishes and RGB outside its 3-sigma footprint is unchanged."""
        render = ["render", "--intrinsics", str(sequence / "intrinsics.txt")]
        render += ["--trajectory", str(sequence / "trajectory.txt"), "--frame", "1"]
        before, after = tmp_path / "before", tmp_path / "after"
        assert main(render + ["--scene", str(sequence / "gt_scene.ogs"), "--out", str(before)]) == 0
        labels = read_label_map(before / "labels_00001.oglm")
        census = labels.areas()
        removed = max((label for label in census if label), key=lambda label: census[label])

        edited = tmp_path / "edited.ogs"
        args = ["manipulate", "--scene", str(sequence / "gt_scene.ogs")]
        args += ["--remove-label", str(removed), "--out", str(edited)]
        assert main(args) == 0
        assert main(render + ["--scene", str(edited), "--out", str(after)]) == 0

        assert removed not in read_label_map(after / "labels_00001.oglm").label_set()
        scene = read_scene(sequence / "gt_scene.ogs")
        intrinsics = read_intrinsics(sequence / "intrinsics.txt")
        pose = read_trajectory(sequence / "trajectory.txt")[1]
        ys, xs = np.mgrid[0 : intrinsics.height, 0 : intrinsics.width]
        pixels = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
        footprint = np.zeros(len(pixels), dtype=bool)
        for index in np.flatnonzero(scene.labels == removed):
            splat = project_covariance(scene.gaussian(index), pose, intrinsics, index=index)
            if splat is None:
                continue
            a, b, c = conic_from_cov2d(splat.cov2d, index)
            d = pixels - splat.mean2d
            footprint |= a * d[:, 0] ** 2 + 2 * b * d[:, 0] * d[:, 1] + c * d[:, 1] ** 2 <= 9.0
        footprint = footprint.reshape(intrinsics.height, intrinsics.width)
        assert footprint.any()
        rgb_before = read_rgb(before / "rgb_00001.ppm")
        rgb_after = read_rgb(after / "rgb_00001.ppm")
        assert np.abs(rgb_before - rgb_after)[~footprint].max(initial=0.0) < 1e-5

    def test_render_frame_out_of_range(self, sequence, tmp_path):
        """Test asking for a pose past the trajectory fails."""
        args = [
            "render",
            "--scene",
            str(sequence / "gt_scene.ogs"),
            "--intrinsics",
            str(sequence / "intrinsics.txt"),
            "--trajectory",
            str(sequence / "trajectory.txt"),
            "--frame",
            "7",
            "--out",
            str(tmp_path / "render"),
        ]
        assert main(args) == 1


class TestBenchCommand:
    """Tests for the rendering benchmark."""

    def test_report(self, capsys):
        """Test the benchmark prints timings and storage figures."""
        code = main(
            ["bench", "--gaussians", "200", "--width", "32", "--height", "24", "--repeats", "1"]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["gaussians"] == 200
        assert report["resolution"] == "32x24"
        assert report["bytes_per_gaussian"] > 0
