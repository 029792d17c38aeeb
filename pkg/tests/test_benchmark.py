"""Tests for the rendering benchmark."""

import pytest

from semsplat.pipeline.benchmark import random_scene, run_benchmark
from semsplat.pipeline.formats import BYTES_PER_GAUSSIAN


class TestRunBenchmark:
    """Tests for timing and storage reporting."""

    def test_small_report(self):
        """Test a tiny benchmark reports positive timings and storage."""
        report = run_benchmark(gaussian_count=100, width=32, height=24, repeats=1)
        assert report.gaussians == 100
        assert report.rgb_ms > 0
        assert report.label_ms > 0
        assert report.bytes_per_gaussian == BYTES_PER_GAUSSIAN
        assert report.scene_bytes == 8 + 100 * BYTES_PER_GAUSSIAN

    def test_rejects_zero_repeats(self):
        """Test the benchmark needs at least one repeat."""
        with pytest.raises(ValueError, match="repeats"):
            run_benchmark(gaussian_count=10, width=8, height=8, repeats=0)

    def test_random_scene_labels_in_range(self):
        """Test random scenes draw labels from 1..labels."""
        scene = random_scene(500, labels=7, seed=3)
        assert scene.labels.min() >= 1
        assert scene.labels.max() <= 7

    @pytest.mark.slow
    def test_label_rendering_at_most_twice_rgb(self):
        """Test RGB+label rendering of 10k Gaussians at 320x240 costs at most 2x RGB."""
        report = run_benchmark(gaussian_count=10000, width=320, height=240, repeats=3)
        assert report.ratio <= 2.0
