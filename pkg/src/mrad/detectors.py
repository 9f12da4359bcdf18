"""End-to-end detector pipelines producing score maps, masks, and verdicts.

Three detectors share one config surface: RXD scores the query image alone
against its own whole-image statistics, PAD contrasts whole-image reference
statistics against query statistics, and MRAD runs the full grid-local
pipeline (scoring, noise removal, mean-shift seeding, region growing,
area-threshold classification).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mrad.clustering import (
    DetectionResult,
    GrowConfig,
    classify,
    mean_shift_seeds,
    region_grow,
)
from mrad.denoise import DenoiseConfig, denoise
from mrad.imaging import BinaryMask, ImageRGB
from mrad.scoring import ScoringConfig, compute_stats, mrad_scores, rxd_scores, scale_scores, score_map

ALGORITHMS = ("rxd", "pad", "mrad")


@dataclass(frozen=True)
class DetectorConfig:
    """Bundled pipeline parameters.

    area_threshold is in pixels; None resolves to 0.1% of the image area,
    the dataset's own minimum anomaly size.
    """

    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    grow: GrowConfig = field(default_factory=GrowConfig)
    area_threshold: int | None = None
    algorithm: str = "mrad"

    def __post_init__(self):
        if self.area_threshold is not None and self.area_threshold < 0:
            raise ValueError("area_threshold must be nonnegative")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")

    def resolve_area_threshold(self, width: int, height: int) -> int:
        if self.area_threshold is not None:
            return self.area_threshold
        return int(round(0.001 * width * height))


@dataclass(frozen=True, eq=False)
class PixelEvalMap:
    """Continuous nonnegative per-pixel scores used for pixel-level metrics."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"values must have shape (H, W), got {vals.shape}")
        if vals.size and vals.min() < 0:
            raise ValueError("values must be nonnegative")
        object.__setattr__(self, "values", vals)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def _check_dimensions(query: ImageRGB, reference: ImageRGB) -> None:
    if (query.width, query.height) != (reference.width, reference.height):
        raise ValueError(
            f"query {query.width}x{query.height} and reference "
            f"{reference.width}x{reference.height} dimensions differ"
        )


def detect_mrad(
    query: ImageRGB, reference: ImageRGB, config: DetectorConfig
) -> tuple[DetectionResult, PixelEvalMap]:
    """Full grid-local pipeline over a query/reference pair.

    The evaluation map is the blurred score map gated by the grown mask:
    zero outside detections, score-ordered inside them.
    """
    _check_dimensions(query, reference)
    smap = score_map(query, reference, config.scoring)
    blurred = denoise(smap, config.scoring.grid, config.scoring.min_score, config.denoise)
    seeds = mean_shift_seeds(blurred, config.grow)
    mask = region_grow(blurred, seeds, config.grow)
    result = classify(mask, config.resolve_area_threshold(query.width, query.height))
    gated = np.where(mask.bits > 0, blurred.scores, 0.0)
    return result, PixelEvalMap(gated)


def detect_pad(
    query: ImageRGB, reference: ImageRGB, config: DetectorConfig
) -> tuple[DetectionResult, PixelEvalMap]:
    """Reference-vs-query score difference under whole-image statistics.

    No grid, no noise removal, no region growing: scaled scores above
    min_score form the mask directly.
    """
    _check_dimensions(query, reference)
    eps = config.scoring.regularization_epsilon
    ref_stats = compute_stats(reference.pixels, eps)
    query_stats = compute_stats(query.pixels, eps)
    raw = mrad_scores(query.pixels, ref_stats, query_stats)
    return _threshold_detection(raw, config, query.width, query.height)


def detect_rxd(query: ImageRGB, config: DetectorConfig) -> tuple[DetectionResult, PixelEvalMap]:
    """Whole-image squared Mahalanobis distance of each query pixel."""
    eps = config.scoring.regularization_epsilon
    stats = compute_stats(query.pixels, eps)
    raw = rxd_scores(query.pixels, stats)
    return _threshold_detection(raw, config, query.width, query.height)


def _threshold_detection(
    raw: np.ndarray, config: DetectorConfig, width: int, height: int
) -> tuple[DetectionResult, PixelEvalMap]:
    # Scale without the low-end cut: the continuous map keeps every score,
    # the mask applies the threshold.
    scaled = scale_scores(raw, min_score=0.0)
    mask = BinaryMask((scaled > config.scoring.min_score).astype(np.uint8))
    result = classify(mask, config.resolve_area_threshold(width, height))
    return result, PixelEvalMap(scaled)


def detect(
    query: ImageRGB, reference: ImageRGB | None, config: DetectorConfig
) -> tuple[DetectionResult, PixelEvalMap]:
    """Dispatch on config.algorithm; reference may be None for RXD only."""
    if config.algorithm == "rxd":
        return detect_rxd(query, config)
    if reference is None:
        raise ValueError(f"algorithm {config.algorithm!r} requires a reference image")
    if config.algorithm == "pad":
        return detect_pad(query, reference, config)
    return detect_mrad(query, reference, config)
