"""Procedural query/reference/mask scenes for desk-scale benchmarking.

Each scene emulates the visual structure of an orbital inspection frame:
black space, one bright textured structure under a lighting gradient, pose
jitter and illumination gain between reference and query, sensor noise on
both, and an optional planted anomaly in the query. Everything is a pure
function of the scene seed, so suites are reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from mrad.imaging import (
    LABEL_ANOMALY,
    LABEL_FOREGROUND,
    ImageRGB,
    LabelMask,
)

ANOMALY_SHAPES = ("blob", "bar")

# Debris-like target colors: metallic foil, panel blue, mid gray (sits inside
# the global black-to-bright color span, so whole-image statistics are weak
# against it), and blanket white.
_PALETTE = np.array(
    [
        [0.83, 0.64, 0.22],
        [0.34, 0.40, 0.58],
        [0.46, 0.46, 0.49],
        [0.93, 0.93, 0.96],
    ]
)

_STRUCTURE_BASE = np.array([0.60, 0.62, 0.68])


class SceneGenerationError(RuntimeError):
    """Raised when a valid anomaly placement cannot be found."""


@dataclass(frozen=True)
class AnomalyParams:
    shape: str = "blob"
    area_fraction: float = 0.005
    contrast: float = 0.6

    def __post_init__(self):
        if self.shape not in ANOMALY_SHAPES:
            raise ValueError(f"shape must be one of {ANOMALY_SHAPES}, got {self.shape!r}")
        if self.area_fraction < 0.001:
            raise ValueError("area_fraction must be at least 0.001")
        if not 0 < self.contrast <= 1:
            raise ValueError("contrast must lie in (0, 1]")


@dataclass(frozen=True)
class JitterParams:
    translation_px: float = 2.0
    gain: float = 0.05

    def __post_init__(self):
        if self.translation_px < 0:
            raise ValueError("translation_px must be nonnegative")


@dataclass(frozen=True)
class SceneParams:
    seed: int
    width: int = 480
    height: int = 270
    background_fraction: float = 0.5
    anomaly: AnomalyParams | None = None
    jitter: JitterParams = field(default_factory=JitterParams)
    noise_sigma: float = 0.01

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("scene must be at least 16x16 pixels")
        if not 0 <= self.background_fraction <= 1:
            raise ValueError("background_fraction must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True, eq=False)
class Scene:
    query: ImageRGB
    reference: ImageRGB
    mask: LabelMask
    is_anomalous: bool


def _structure_patch(rng: np.random.Generator, sw: int, sh: int) -> np.ndarray:
    """Textured, gradient-lit structure surface of shape (sh, sw, 3)."""
    base = _STRUCTURE_BASE * rng.uniform(0.85, 1.1)
    panel = max(8, round(min(sw, sh) / 8))
    grid_h = -(-sh // panel)
    grid_w = -(-sw // panel)
    luma = 1.0 + rng.uniform(-0.18, 0.18, size=(grid_h, grid_w, 1))
    tint = 1.0 + rng.uniform(-0.05, 0.05, size=(grid_h, grid_w, 3))
    panels = (luma * tint).repeat(panel, axis=0).repeat(panel, axis=1)[:sh, :sw]

    theta = rng.uniform(0.0, 2.0 * math.pi)
    yy, xx = np.mgrid[0:sh, 0:sw]
    proj = xx * math.cos(theta) + yy * math.sin(theta)
    span = proj.max() - proj.min()
    t = (proj - proj.min()) / span if span > 0 else np.zeros_like(proj)
    ramp = (0.75 + 0.5 * t)[:, :, None]

    grain = 1.0 + rng.normal(0.0, 0.03, size=(sh, sw, 1))
    return np.clip(base * panels * ramp * grain, 0.0, 1.0)


def _rasterize_shape(
    rng: np.random.Generator,
    anomaly: AnomalyParams,
    width: int,
    height: int,
) -> tuple[np.ndarray, float]:
    """One random placement of the anomaly shape; returns (bool mask, max extent)."""
    area = anomaly.area_fraction * width * height
    phi = rng.uniform(0.0, math.pi)
    if anomaly.shape == "blob":
        ratio = rng.uniform(0.55, 0.95)
        a = math.sqrt(area / (math.pi * ratio))
        b = ratio * a
        extent = a
    else:
        aspect = rng.uniform(4.0, 7.0)
        v = math.sqrt(area / aspect)
        length = aspect * v
        extent = 0.5 * math.hypot(length, v)
    pad = extent + 1.0
    if 2 * pad >= min(width, height):
        raise SceneGenerationError("anomaly too large for the scene")
    cy = rng.uniform(pad, height - pad)
    cx = rng.uniform(pad, width - pad)

    y0, y1 = int(cy - pad), int(math.ceil(cy + pad)) + 1
    x0, x1 = int(cx - pad), int(math.ceil(cx + pad)) + 1
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dy = yy - cy
    dx = xx - cx
    u = dx * math.cos(phi) + dy * math.sin(phi)
    v_coord = -dx * math.sin(phi) + dy * math.cos(phi)
    if anomaly.shape == "blob":
        inside = (u / a) ** 2 + (v_coord / b) ** 2 <= 1.0
    else:
        inside = (np.abs(u) <= length / 2) & (np.abs(v_coord) <= v / 2)
    mask = np.zeros((height, width), dtype=bool)
    mask[y0:y1, x0:x1] = inside
    return mask, extent


def generate_scene(params: SceneParams) -> Scene:
    """Deterministic query/reference/mask triplet for one scene seed."""
    rng = np.random.default_rng(params.seed)
    w, h = params.width, params.height
    margin = int(math.ceil(params.jitter.translation_px))

    # Structure rectangle sized for the requested coverage, with room to
    # translate without leaving the frame.
    area = (1.0 - params.background_fraction) * w * h
    max_w = w - 2 * margin
    max_h = h - 2 * margin
    aspect = rng.uniform(0.7, 1.4)
    sw = int(round(math.sqrt(max(area, 1.0) * (w / h) * aspect)))
    sw = min(max(sw, 8), max_w)
    sh = min(max(int(round(area / sw)), 8), max_h)
    x0 = int(rng.integers(margin, w - sw - margin + 1))
    y0 = int(rng.integers(margin, h - sh - margin + 1))
    patch = _structure_patch(rng, sw, sh)

    if params.jitter.translation_px > 0:
        t = int(round(params.jitter.translation_px))
        dx = int(rng.integers(-t, t + 1))
        dy = int(rng.integers(-t, t + 1))
    else:
        dx = dy = 0
    gain = 1.0
    if params.jitter.gain != 0.0:
        gain = 1.0 + params.jitter.gain * rng.uniform(-1.0, 1.0)

    reference = np.zeros((h, w, 3), dtype=np.float64)
    reference[y0 : y0 + sh, x0 : x0 + sw] = patch
    qx0, qy0 = x0 + dx, y0 + dy
    query = np.zeros((h, w, 3), dtype=np.float64)
    query[qy0 : qy0 + sh, qx0 : qx0 + sw] = patch

    labels = np.zeros((h, w), dtype=np.uint8)
    labels[qy0 : qy0 + sh, qx0 : qx0 + sw] = LABEL_FOREGROUND

    if params.anomaly is not None:
        structure = labels == LABEL_FOREGROUND
        target = _PALETTE[int(rng.integers(0, len(_PALETTE)))]
        placed = False
        for _ in range(100):
            shape, _ = _rasterize_shape(rng, params.anomaly, w, h)
            count = int(shape.sum())
            if count == 0:
                continue
            overlap = int((shape & structure).sum())
            if overlap * 2 >= count:
                placed = True
                break
        if not placed:
            raise SceneGenerationError(
                f"no valid anomaly placement in 100 attempts (seed {params.seed})"
            )
        c = params.anomaly.contrast
        query[shape] = (1.0 - c) * query[shape] + c * target
        labels[shape] = LABEL_ANOMALY

    query = query * gain
    if params.noise_sigma > 0:
        reference = reference + rng.normal(0.0, params.noise_sigma, reference.shape)
        query = query + rng.normal(0.0, params.noise_sigma, query.shape)

    return Scene(
        query=ImageRGB(np.clip(query, 0.0, 1.0)),
        reference=ImageRGB(np.clip(reference, 0.0, 1.0)),
        mask=LabelMask(labels),
        is_anomalous=params.anomaly is not None,
    )


def generate_suite(
    count: int,
    anomalous_fraction: float,
    base_seed: int,
    base: SceneParams | None = None,
) -> list[SceneParams]:
    """Per-scene parameters for a reproducible mixed suite.

    Scene seeds are base_seed + index; the anomalous flags land on the first
    ceil(anomalous_fraction * count) indices of a seeded shuffle. Scenes are
    generated on demand from the returned parameters (generate_scene), which
    keeps arbitrarily large suites cheap to describe.
    """
    if count < 2:
        raise ValueError("a suite needs at least 2 scenes")
    n_anom = math.ceil(anomalous_fraction * count)
    if n_anom < 1 or n_anom >= count:
        raise ValueError(
            "anomalous_fraction must leave at least one scene in each class"
        )
    if base is None:
        base = SceneParams(seed=0)
    template = base.anomaly if base.anomaly is not None else AnomalyParams()
    shuffled = np.random.default_rng(base_seed).permutation(count)
    anomalous = set(int(i) for i in shuffled[:n_anom])
    return [
        replace(
            base,
            seed=base_seed + i,
            anomaly=template if i in anomalous else None,
        )
        for i in range(count)
    ]
