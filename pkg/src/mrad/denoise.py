"""Noise removal over a score map: saturation, flatness suppression, blur.

Black regions amplify small color variations into spuriously high scores
that plain thresholding misses. The pass runs three stages in a fixed
order: cells dominated by high scores saturate to 255, cells whose windowed
standard deviation is flat (uniform speckle) are zeroed, and a Gaussian
blur merges the surviving fragments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from mrad.imaging import GridSpec, partition
from mrad.scoring import ScoreMap


@dataclass(frozen=True)
class DenoiseConfig:
    saturation_fraction: float = 0.9
    kernel_fraction: float = 0.10
    stddev_range_fraction: float = 0.03
    blur_sigma: float = 2.0
    blur_radius: int = 5

    def __post_init__(self):
        if not 0 < self.saturation_fraction <= 1:
            raise ValueError("saturation_fraction must lie in (0, 1]")
        if not 0 < self.kernel_fraction < 1:
            raise ValueError("kernel_fraction must lie in (0, 1)")
        if not 0 < self.stddev_range_fraction < 1:
            raise ValueError("stddev_range_fraction must lie in (0, 1)")
        if self.blur_sigma <= 0:
            raise ValueError("blur_sigma must be positive")
        if self.blur_radius < 1:
            raise ValueError("blur_radius must be at least 1")


def saturate_cells(map: ScoreMap, grid: GridSpec, min_score: float, fraction: float) -> ScoreMap:
    """Promote cells dominated by high scores to full saturation.

    A cell where strictly more than fraction * area pixels score above
    min_score is likely one large anomaly; all its pixels are set to 255.
    Other cells pass through unchanged.
    """
    out = map.scores.copy()
    for cell in partition(map.width, map.height, grid):
        ys, xs = cell.slices()
        above = int(np.count_nonzero(map.scores[ys, xs] > min_score))
        if above > fraction * cell.area:
            out[ys, xs] = 255.0
    return ScoreMap(out)


def stddev_kernel_side(cell_width: int, cell_height: int, kernel_fraction: float) -> int:
    """Window side for the local deviation map: ~kernel_fraction of the cell,
    at least 3, forced odd."""
    side = int(math.floor(kernel_fraction * min(cell_width, cell_height) + 0.5))
    side = max(3, side)
    if side % 2 == 0:
        side += 1
    return side


def windowed_stddev(values: np.ndarray, side: int) -> np.ndarray:
    """Population standard deviation over a side x side sliding window.

    Windows are clamped at the borders (edge pixels replicate outward).
    """
    mean = ndimage.uniform_filter(values, size=side, mode="nearest")
    mean_sq = ndimage.uniform_filter(values * values, size=side, mode="nearest")
    return np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))


def local_stddev_suppress(map: ScoreMap, grid: GridSpec, config: DenoiseConfig) -> ScoreMap:
    """Zero cells whose windowed score deviation is flat across the cell.

    Per cell, a sliding-window standard deviation map is computed; when its
    range (max - min) within the cell stays below stddev_range_fraction of
    the 255 scale, the cell is uniform background noise and is zeroed.
    Cells containing real structure keep their scores.
    """
    out = map.scores.copy()
    threshold = config.stddev_range_fraction * 255.0
    for cell in partition(map.width, map.height, grid):
        ys, xs = cell.slices()
        side = stddev_kernel_side(cell.x1 - cell.x0, cell.y1 - cell.y0, config.kernel_fraction)
        std = windowed_stddev(map.scores[ys, xs], side)
        if std.max() - std.min() < threshold:
            out[ys, xs] = 0.0
    return ScoreMap(out)


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    """Discretized 1-D Gaussian over [-radius, radius], normalized to sum 1."""
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(map: ScoreMap, sigma: float, radius: int) -> ScoreMap:
    """Separable Gaussian blur with reflect padding, clamped to [0, 255].

    Reflect padding repeats the edge sample ((d c b a | a b c d)), which
    avoids spurious dark borders that would seed false regions at the image
    edge.
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    kernel = gaussian_kernel(sigma, radius)
    blurred = ndimage.correlate1d(map.scores, kernel, axis=0, mode="reflect")
    blurred = ndimage.correlate1d(blurred, kernel, axis=1, mode="reflect")
    return ScoreMap(np.clip(blurred, 0.0, 255.0))


def denoise(map: ScoreMap, grid: GridSpec, min_score: float, config: DenoiseConfig) -> ScoreMap:
    """Full pass in pipeline order: saturate, suppress, blur."""
    out = saturate_cells(map, grid, min_score, config.saturation_fraction)
    out = local_stddev_suppress(out, grid, config)
    return gaussian_blur(out, config.blur_sigma, config.blur_radius)
