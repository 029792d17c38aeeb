"""Configuration settings for the semantic splatting mapper."""

import os
from dataclasses import dataclass, field

from dotenv import load_dotenv

load_dotenv()


@dataclass
class RenderConfig:
    """Rasterization configuration."""

    tile_size: int = 16
    alpha_cutoff: float = 1.0 / 255.0  # Contributors below this alpha are skipped
    alpha_max: float = 0.999
    transmittance_min: float = 1e-4  # Early-stop threshold for compositing
    cov2d_regularizer: float = 0.3  # Added to the 2D covariance diagonal (px^2)
    near_plane: float = 0.01
    extent_sigma: float = 3.0  # Splat footprint in standard deviations
    contributor_bound: int = 200  # Per-pixel contributor buffer (4 * K)
    label_coverage_min: float = 0.5  # Pixels below this coverage render as background
    workers: int = 1

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.tile_size <= 0:
            raise ValueError(f"Invalid tile_size {self.tile_size}. Must be positive.")
        if not 0.0 < self.alpha_max <= 1.0:
            raise ValueError(f"Invalid alpha_max {self.alpha_max}. Must be in (0, 1].")
        if self.near_plane <= 0:
            raise ValueError(f"Invalid near_plane {self.near_plane}. Must be positive.")
        if self.contributor_bound <= 0:
            raise ValueError(
                f"Invalid contributor_bound {self.contributor_bound}. Must be positive."
            )
        if self.workers <= 0:
            raise ValueError(f"Invalid workers {self.workers}. Must be positive.")


@dataclass
class ConsensusConfig:
    """Label consensus configuration."""

    tau1: float = 0.85  # Mutual overlap ratio for a full match
    tau2: float = 0.9  # Containment ratio for part/whole matches
    tau3: float = 0.1  # Overlap floor below which a label is new
    delta: float = 0.06  # Part label decay
    topk: int = 50
    input_confidence_update: bool = True

    def __post_init__(self):
        """Validate configuration after initialization."""
        for name in ("tau1", "tau2", "tau3", "delta"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Invalid {name} {value}. Must be in [0, 1].")
        if self.topk <= 0:
            raise ValueError(f"Invalid topk {self.topk}. Must be positive.")


@dataclass
class PruningConfig:
    """Segmentation counter pruning configuration."""

    theta: float = 0.10  # World units; 0.25 for real-world captures
    enabled: bool = True

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.theta <= 0:
            raise ValueError(f"Invalid theta {self.theta}. Must be positive.")


@dataclass
class SceneConfig:
    """Scene representation configuration."""

    max_labels: int = 2000

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.max_labels <= 0:
            raise ValueError(f"Invalid max_labels {self.max_labels}. Must be positive.")


@dataclass
class PipelineConfig:
    """Frame loop configuration."""

    keyframe_every: int = 5
    densify_stride: int = 4  # Pixels between densification samples
    depth_thresh: float = 0.05  # World units
    init_opacity: float = 0.7
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.keyframe_every <= 0:
            raise ValueError(
                f"Invalid keyframe_every {self.keyframe_every}. Must be positive."
            )
        if self.densify_stride <= 0:
            raise ValueError(
                f"Invalid densify_stride {self.densify_stride}. Must be positive."
            )


@dataclass
class MapperConfig:
    """Main mapper configuration."""

    render: RenderConfig = field(default_factory=RenderConfig)
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)
    pruning: PruningConfig = field(default_factory=PruningConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    log_level: str = "INFO"

    def __post_init__(self):
        """Keep the contributor buffer in step with K."""
        self.render.contributor_bound = max(
            self.render.contributor_bound, 4 * self.consensus.topk
        )

    @classmethod
    def from_env(cls) -> "MapperConfig":
        """Create configuration from environment variables."""
        topk = int(os.getenv("SEMSPLAT_TOPK", "50"))

        return cls(
            render=RenderConfig(
                workers=int(os.getenv("SEMSPLAT_WORKERS", "1")),
                contributor_bound=4 * topk,
            ),
            consensus=ConsensusConfig(
                tau1=float(os.getenv("SEMSPLAT_TAU1", "0.85")),
                tau2=float(os.getenv("SEMSPLAT_TAU2", "0.9")),
                tau3=float(os.getenv("SEMSPLAT_TAU3", "0.1")),
                delta=float(os.getenv("SEMSPLAT_DELTA", "0.06")),
                topk=topk,
                input_confidence_update=os.getenv(
                    "SEMSPLAT_INPUT_CONFIDENCE_UPDATE", "true"
                ).lower()
                == "true",
            ),
            pruning=PruningConfig(
                theta=float(os.getenv("SEMSPLAT_THETA", "0.10")),
                enabled=os.getenv("SEMSPLAT_PRUNING", "true").lower() == "true",
            ),
            scene=SceneConfig(
                max_labels=int(os.getenv("SEMSPLAT_MAX_LABELS", "2000")),
            ),
            pipeline=PipelineConfig(
                keyframe_every=int(os.getenv("SEMSPLAT_KEYFRAME_EVERY", "5")),
                densify_stride=int(os.getenv("SEMSPLAT_DENSIFY_STRIDE", "4")),
                seed=int(os.getenv("SEMSPLAT_SEED", "0")),
                output_dir=os.getenv("SEMSPLAT_OUTPUT_DIR") or None,
            ),
            log_level=os.getenv("LOG_LEVEL", "INFO"),
        )
