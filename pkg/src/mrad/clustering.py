"""Seed discovery, region growing, and image-level classification.

Mean-shift clustering over the nonzero pixels of the blurred score map
yields mode centroids that seed region growing; the grown regions union
into the binary anomaly map, and the image verdict comes from comparing
the anomalous pixel count against an area threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from mrad.imaging import BinaryMask
from mrad.scoring import ScoreMap

VERDICT_NORMAL = "normal"
VERDICT_ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class Seed:
    """Starting pixel for region growing, carrying its score-map value."""

    x: int
    y: int
    score: float

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError("seed coordinates must be nonnegative")
        if not 0 < self.score <= 255:
            raise ValueError("seed score must lie in (0, 255]")


@dataclass(frozen=True)
class GrowConfig:
    """Mean-shift and region-growing parameters.

    bandwidth is in pixels; None resolves to 2% of the image diagonal at
    use time. footprint_radius 1 means a 3x3 square search neighborhood.
    """

    footprint_radius: int = 1
    tolerance: float = 25.0
    bandwidth: float | None = None
    max_shift_iters: int = 100
    shift_convergence: float = 0.5

    def __post_init__(self):
        if self.footprint_radius < 1:
            raise ValueError("footprint_radius must be at least 1")
        if not 0 <= self.tolerance <= 255:
            raise ValueError("tolerance must lie in [0, 255]")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.max_shift_iters < 1:
            raise ValueError("max_shift_iters must be at least 1")
        if self.shift_convergence <= 0:
            raise ValueError("shift_convergence must be positive")

    def resolve_bandwidth(self, width: int, height: int) -> float:
        if self.bandwidth is not None:
            return self.bandwidth
        return 0.02 * math.hypot(width, height)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Binary anomaly map plus the image-level count, score, and verdict."""

    anomaly_map: BinaryMask
    pixel_count: int
    image_score: float
    verdict: str

    def __post_init__(self):
        if self.pixel_count != self.anomaly_map.count():
            raise ValueError("pixel_count must equal the set bits in anomaly_map")
        if self.verdict not in (VERDICT_NORMAL, VERDICT_ANOMALOUS):
            raise ValueError(f"unknown verdict {self.verdict!r}")


def shift_points(
    points: np.ndarray,
    weights: np.ndarray,
    bandwidth: float,
    max_iters: int,
    convergence: float,
) -> np.ndarray:
    """Flat-kernel weighted mean shift of points over a static point set.

    Every point moves toward the weight-weighted mean of the static points
    within bandwidth of its current position, freezing once its displacement
    drops below convergence. Points are canonically sorted internally, so
    the multiset of converged positions does not depend on input order.
    Returns converged positions aligned with the *input* order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if pts.shape[0] != w.shape[0]:
        raise ValueError("points and weights must have equal length")
    if pts.shape[0] == 0:
        return pts.copy()

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    data = pts[order]
    dw = w[order]
    n = data.shape[0]

    # Static points binned at bandwidth granularity; neighbor candidates for
    # any position come from the surrounding 3x3 block of bins.
    bin_ids = np.floor(data / bandwidth).astype(np.int64)
    bins: dict[tuple[int, int], np.ndarray] = {}
    for key in map(tuple, np.unique(bin_ids, axis=0)):
        bins[key] = np.flatnonzero((bin_ids[:, 0] == key[0]) & (bin_ids[:, 1] == key[1]))

    def candidates(by: int, bx: int) -> np.ndarray:
        parts = [
            bins[(by + dy, bx + dx)]
            for dy in (-1, 0, 1)
            for dx in (-1, 0, 1)
            if (by + dy, bx + dx) in bins
        ]
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)

    pos = data.copy()
    active = np.ones(n, dtype=bool)
    bw_sq = bandwidth * bandwidth
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        pos_bins = np.floor(pos[idx] / bandwidth).astype(np.int64)
        keys, inverse = np.unique(pos_bins, axis=0, return_inverse=True)
        new_pos = pos[idx].copy()
        for k, key in enumerate(keys):
            members = np.flatnonzero(inverse == k)
            cand = candidates(int(key[0]), int(key[1]))
            if cand.size == 0:
                continue
            diff = pos[idx[members]][:, None, :] - data[cand][None, :, :]
            within = (diff * diff).sum(axis=2) <= bw_sq
            wts = within * dw[cand]
            denom = wts.sum(axis=1)
            ok = denom > 0
            if ok.any():
                shifted = (wts @ data[cand]) / denom[:, None]
                new_pos[members[ok]] = shifted[ok]
        disp = np.linalg.norm(new_pos - pos[idx], axis=1)
        pos[idx] = new_pos
        active[idx[disp < convergence]] = False

    out = np.empty_like(pos)
    out[order] = pos
    return out


def mean_shift_seeds(map: ScoreMap, config: GrowConfig) -> list[Seed]:
    """Find region-growing seeds as mean-shift modes of the score map.

    Mean shift runs over the coordinates of pixels with positive score,
    weighted by score (flat kernel). Converged points within bandwidth/2 of
    each other merge into one mode (single linkage); each mode centroid,
    rounded to the nearest pixel, becomes a seed carrying the map score at
    that pixel.
    """
    scores = map.scores
    coords = np.argwhere(scores > 0)
    if coords.shape[0] == 0:
        return []
    bandwidth = config.resolve_bandwidth(map.width, map.height)
    weights = scores[coords[:, 0], coords[:, 1]]
    converged = shift_points(
        coords.astype(np.float64),
        weights,
        bandwidth,
        config.max_shift_iters,
        config.shift_convergence,
    )

    # Canonical order first, so mode membership and centroids are invariant
    # to how the pixels were enumerated.
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    converged = converged[order]
    origins = coords[order]
    weights = weights[order]

    n = converged.shape[0]
    tree = cKDTree(converged)
    pairs = tree.query_pairs(r=bandwidth / 2.0, output_type="ndarray")
    graph = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    n_modes, labels = connected_components(graph, directed=False)

    seeds = []
    for mode in range(n_modes):
        members = np.flatnonzero(labels == mode)
        centroid = converged[members].mean(axis=0)
        py = int(np.clip(np.rint(centroid[0]), 0, map.height - 1))
        px = int(np.clip(np.rint(centroid[1]), 0, map.width - 1))
        score = float(scores[py, px])
        if score <= 0:
            # Centroid of a hollow mode can land on a zero pixel; fall back
            # to the strongest member's own pixel.
            best = members[int(np.argmax(weights[members]))]
            py, px = int(origins[best, 0]), int(origins[best, 1])
            score = float(scores[py, px])
        seeds.append(Seed(x=px, y=py, score=score))
    seeds.sort(key=lambda s: (s.y, s.x))
    return seeds


def region_grow(map: ScoreMap, seeds: list[Seed], config: GrowConfig) -> BinaryMask:
    """Grow each seed into a region and union the regions into one mask.

    A pixel joins a seed's region iff it lies within the square footprint of
    an already-accepted pixel and its score deviates from the *seed's* score
    by at most the tolerance; anchoring on the seed score makes the result
    independent of expansion order. Implemented as geodesic dilation
    restricted to the qualifying pixels, run to its fixed point.
    """
    scores = map.scores
    height, width = scores.shape
    for seed in seeds:
        if seed.x >= width or seed.y >= height:
            raise ValueError(f"seed ({seed.x}, {seed.y}) out of bounds for {width}x{height}")
    out = np.zeros((height, width), dtype=bool)
    if not seeds:
        return BinaryMask(out.astype(np.uint8))

    side = 2 * config.footprint_radius + 1
    footprint = np.ones((side, side), dtype=bool)
    by_score: dict[float, list[Seed]] = {}
    for seed in seeds:
        by_score.setdefault(seed.score, []).append(seed)
    for score in sorted(by_score):
        start = np.zeros((height, width), dtype=bool)
        for seed in by_score[score]:
            start[seed.y, seed.x] = True
        qualifies = np.abs(scores - score) <= config.tolerance
        grown = ndimage.binary_dilation(
            start, structure=footprint, iterations=-1, mask=qualifies
        )
        out |= grown
    return BinaryMask(out.astype(np.uint8))


def classify(mask: BinaryMask, area_threshold: int) -> DetectionResult:
    """Verdict from the anomalous pixel count: anomalous iff strictly above
    the area threshold."""
    if area_threshold < 0:
        raise ValueError("area_threshold must be nonnegative")
    count = mask.count()
    verdict = VERDICT_ANOMALOUS if count > area_threshold else VERDICT_NORMAL
    return DetectionResult(
        anomaly_map=mask,
        pixel_count=count,
        image_score=float(count),
        verdict=verdict,
    )
