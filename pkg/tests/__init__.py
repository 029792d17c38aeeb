"""Tests for the semantic Gaussian splatting mapper."""
