"""Core raster types, grid partitioning, and PNG file I/O.

Images are stored as float64 arrays with channels in [0, 1]; the single
conversion from 8-bit bytes happens here so the statistical code downstream
works in real arithmetic throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# Gray levels used by three-class label mask files.
LABEL_BACKGROUND = 0
LABEL_FOREGROUND = 1
LABEL_ANOMALY = 2

_MASK_GRAY_TO_LABEL = {0: LABEL_BACKGROUND, 128: LABEL_FOREGROUND, 255: LABEL_ANOMALY}
_LABEL_TO_MASK_GRAY = {v: k for k, v in _MASK_GRAY_TO_LABEL.items()}


class ImageDecodeError(ValueError):
    """Raised when a file decodes but is not in a supported pixel format."""


class MaskFormatError(ValueError):
    """Raised when a mask file contains gray values outside its value set."""


@dataclass(frozen=True, eq=False)
class ImageRGB:
    """Dense 3-channel raster; pixels shaped (height, width, 3), values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must have shape (H, W, 3), got {px.shape}")
        # Tiny slack for accumulated float error in synthetic pipelines.
        if px.min() < -1e-9 or px.max() > 1 + 1e-9:
            raise ValueError("channel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Three-class segmentation: 0 background, 1 foreground, 2 anomaly."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.uint8)
        if lab.ndim != 2:
            raise ValueError(f"labels must have shape (H, W), got {lab.shape}")
        if lab.max(initial=0) > LABEL_ANOMALY:
            raise ValueError("labels must be 0, 1 or 2")
        object.__setattr__(self, "labels", lab)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel anomaly decision, 0 or 1."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 2:
            raise ValueError(f"bits must have shape (H, W), got {bits.shape}")
        if bits.max(initial=0) > 1:
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class GridSpec:
    """Row/column counts for partitioning an image into rectangular cells."""

    rows: int = 4
    cols: int = 4

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have at least one row and one column")


@dataclass(frozen=True)
class CellBounds:
    """Half-open pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y1), slice(self.x0, self.x1)

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def partition(width: int, height: int, grid: GridSpec) -> list[CellBounds]:
    """Tile a width x height image into grid.rows x grid.cols cells.

    Cells are returned in row-major order. When a dimension does not divide
    evenly, the remainder pixels go to the last cell along that axis, so cell
    sizes differ by at most the remainder and the union tiles exactly.
    """
    if grid.rows > height or grid.cols > width:
        raise ValueError(
            f"grid {grid.rows}x{grid.cols} exceeds image size {width}x{height}"
        )
    cell_h = height // grid.rows
    cell_w = width // grid.cols
    cells = []
    for r in range(grid.rows):
        y0 = r * cell_h
        y1 = height if r == grid.rows - 1 else (r + 1) * cell_h
        for c in range(grid.cols):
            x0 = c * cell_w
            x1 = width if c == grid.cols - 1 else (c + 1) * cell_w
            cells.append(CellBounds(x0=x0, y0=y0, x1=x1, y1=y1))
    return cells


def load_image(path: str | Path) -> ImageRGB:
    """Load an 8-bit RGB or RGBA file; alpha is discarded, channels map to [0, 1]."""
    path = Path(path)
    with Image.open(path) as im:
        if im.mode == "RGBA":
            im = im.convert("RGB")
        if im.mode != "RGB":
            raise ImageDecodeError(
                f"{path}: unsupported pixel format {im.mode!r}, expected 8-bit RGB/RGBA"
            )
        arr = np.asarray(im, dtype=np.uint8)
    return ImageRGB(arr.astype(np.float64) / 255.0)


def save_image(image: ImageRGB, path: str | Path) -> None:
    """Write an ImageRGB as an 8-bit RGB PNG (channels quantized by rounding)."""
    arr = np.rint(image.pixels * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(Path(path))


def load_mask(path: str | Path) -> LabelMask:
    """Load a three-class mask from an 8-bit grayscale file.

    Gray values map 0 -> background, 128 -> foreground, 255 -> anomaly; any
    other value is a format error.
    """
    path = Path(path)
    with Image.open(path) as im:
        if im.mode != "L":
            raise ImageDecodeError(
                f"{path}: unsupported pixel format {im.mode!r}, expected 8-bit grayscale"
            )
        arr = np.asarray(im, dtype=np.uint8)
    labels = np.zeros(arr.shape, dtype=np.uint8)
    matched = np.zeros(arr.shape, dtype=bool)
    for gray, label in _MASK_GRAY_TO_LABEL.items():
        hit = arr == gray
        labels[hit] = label
        matched |= hit
    if not matched.all():
        bad = int(arr[~matched].flat[0])
        raise MaskFormatError(f"{path}: invalid mask gray value {bad}, expected 0/128/255")
    return LabelMask(labels)


def save_label_mask(mask: LabelMask, path: str | Path) -> None:
    """Write a LabelMask as an 8-bit grayscale PNG using the 0/128/255 encoding."""
    arr = np.zeros(mask.labels.shape, dtype=np.uint8)
    for label, gray in _LABEL_TO_MASK_GRAY.items():
        arr[mask.labels == label] = gray
    Image.fromarray(arr, mode="L").save(Path(path))


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    """Write a BinaryMask as an 8-bit grayscale PNG, 0 for normal, 255 for anomalous."""
    arr = np.where(mask.bits > 0, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path))


def load_binary_mask(path: str | Path) -> BinaryMask:
    """Load a binary mask written by save_mask (grayscale, values 0/255 only)."""
    path = Path(path)
    with Image.open(path) as im:
        if im.mode != "L":
            raise ImageDecodeError(
                f"{path}: unsupported pixel format {im.mode!r}, expected 8-bit grayscale"
            )
        arr = np.asarray(im, dtype=np.uint8)
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        raise MaskFormatError(
            f"{path}: invalid binary mask value {int(arr[bad].flat[0])}, expected 0/255"
        )
    return BinaryMask((arr == 255).astype(np.uint8))
