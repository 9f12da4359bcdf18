"""Per-region color statistics and the RXD / MRAD anomaly scores.

The RXD score of a pixel is its squared Mahalanobis distance from a
background color distribution. The MRAD score contrasts that distance under
a reference-derived distribution against the one under a query-derived
distribution, so deviations from the expected scene stand out while shared
structure cancels. Scoring is grid-local: statistics are fit per cell, raw
scores are min-max scaled over the image to [0, 255], and values below a
minimum score are suppressed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mrad.imaging import GridSpec, ImageRGB, partition

# Covariance traces at or below this are treated as constant-color regions.
_CONSTANT_TRACE = 1e-12


@dataclass(frozen=True, eq=False)
class ColorStats:
    """Mean color and regularized covariance of a pixel population."""

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.shape != (3,) or cov.shape != (3, 3):
            raise ValueError("mean must be a 3-vector and covariance 3x3")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        if np.abs(cov - cov.T).max() > 1e-12:
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """Per-pixel scalar anomaly scores on the [0, 255] scale."""

    scores: np.ndarray

    def __post_init__(self):
        sc = np.asarray(self.scores, dtype=np.float64)
        if sc.ndim != 2:
            raise ValueError(f"scores must have shape (H, W), got {sc.shape}")
        if sc.size and (sc.min() < 0 or sc.max() > 255):
            raise ValueError("scores must lie in [0, 255]")
        object.__setattr__(self, "scores", sc)

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def height(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class ScoringConfig:
    """Grid layout, minimum retained score, and covariance regularization."""

    grid: GridSpec = field(default_factory=GridSpec)
    min_score: float = 20.0
    regularization_epsilon: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.min_score <= 255:
            raise ValueError("min_score must lie in [0, 255]")
        if self.regularization_epsilon <= 0:
            raise ValueError("regularization_epsilon must be positive")


def compute_stats(pixels: np.ndarray, epsilon: float = 1e-6) -> ColorStats:
    """Fit mean and regularized sample covariance to an (N, 3) pixel array.

    The covariance uses divisor N-1. Regularization keeps it invertible:
    constant-color regions (trace ~ 0) get epsilon * I added; otherwise, when
    the smallest eigenvalue is at or below epsilon * trace / 3, a ridge of
    that magnitude is added.
    """
    pts = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    n = pts.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 pixels to fit statistics, got {n}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = (centered.T @ centered) / (n - 1)
    cov = 0.5 * (cov + cov.T)
    trace = float(np.trace(cov))
    if trace <= _CONSTANT_TRACE:
        cov = cov + epsilon * np.eye(3)
    else:
        ridge = epsilon * trace / 3.0
        if np.linalg.eigvalsh(cov).min() <= ridge:
            cov = cov + ridge * np.eye(3)
    return ColorStats(mean=mean, covariance=cov, sample_count=n)


def rxd_score(pixel: np.ndarray, stats: ColorStats) -> float:
    """Squared Mahalanobis distance of a color from the fitted distribution."""
    diff = np.asarray(pixel, dtype=np.float64) - stats.mean
    return float(diff @ np.linalg.solve(stats.covariance, diff))


def rxd_scores(pixels: np.ndarray, stats: ColorStats) -> np.ndarray:
    """Vectorized rxd_score over an (..., 3) pixel array."""
    pts = np.asarray(pixels, dtype=np.float64)
    diff = pts.reshape(-1, 3) - stats.mean
    solved = np.linalg.solve(stats.covariance, diff.T).T
    out = np.einsum("ij,ij->i", diff, solved)
    return out.reshape(pts.shape[:-1])


def mrad_score(pixel: np.ndarray, ref_stats: ColorStats, query_stats: ColorStats) -> float:
    """Reference-conditioned anomaly score of one pixel.

    Excess of the pixel's distance from the reference distribution over its
    distance from the query distribution, clamped at zero: a pixel that fits
    the reference at least as well as the query carries no anomaly evidence.
    """
    return max(0.0, rxd_score(pixel, ref_stats) - rxd_score(pixel, query_stats))


def mrad_scores(pixels: np.ndarray, ref_stats: ColorStats, query_stats: ColorStats) -> np.ndarray:
    """Vectorized mrad_score over an (..., 3) pixel array."""
    return np.maximum(0.0, rxd_scores(pixels, ref_stats) - rxd_scores(pixels, query_stats))


def score_map(query: ImageRGB, reference: ImageRGB, config: ScoringConfig) -> ScoreMap:
    """Grid-local MRAD score map of a query image against its reference.

    For each grid cell, reference and query statistics are fit independently
    and every query pixel in the cell is scored. Raw scores are min-max
    scaled over the whole image to [0, 255] (raw scores are nonnegative, so
    the scale is set by the maximum; an all-zero map stays all-zero), then
    scaled values below config.min_score are zeroed.
    """
    if (query.width, query.height) != (reference.width, reference.height):
        raise ValueError(
            f"query {query.width}x{query.height} and reference "
            f"{reference.width}x{reference.height} dimensions differ"
        )
    raw = np.zeros((query.height, query.width), dtype=np.float64)
    eps = config.regularization_epsilon
    for cell in partition(query.width, query.height, config.grid):
        ys, xs = cell.slices()
        ref_stats = compute_stats(reference.pixels[ys, xs], eps)
        query_stats = compute_stats(query.pixels[ys, xs], eps)
        raw[ys, xs] = mrad_scores(query.pixels[ys, xs], ref_stats, query_stats)
    return ScoreMap(scale_scores(raw, config.min_score))


def scale_scores(raw: np.ndarray, min_score: float) -> np.ndarray:
    """Min-max scale nonnegative raw scores to [0, 255] and cut the low end.

    Raw scores are clamped nonnegative, so min-max scaling reduces to
    dividing by the maximum; this keeps a constant positive field at 255
    rather than undefined. Scaled values below min_score drop to zero.
    """
    raw = np.maximum(raw, 0.0)
    peak = raw.max() if raw.size else 0.0
    if peak <= 0.0:
        return np.zeros_like(raw)
    scaled = raw * (255.0 / peak)
    scaled = np.clip(scaled, 0.0, 255.0)
    scaled[scaled < min_score] = 0.0
    return scaled
