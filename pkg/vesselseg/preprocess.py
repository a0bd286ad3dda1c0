"""
Fundus preprocessing: green channel, median prefilter, CLAHE and the
field-of-view mask.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from vesselseg.raster import StructuringElement, as_gray8, erode, median_filter

logger = logging.getLogger(__name__)

# Fixed by the method: the mask is cleaned with 5x5 windows.
MASK_MEDIAN_SIDE = 5
MASK_ERODE_SIDE = 5
GRAY_LEVELS = 256


@dataclass(frozen=True, eq=False)
class FundusImage:
    """Color fundus photograph as an ``H x W x 3`` uint8 array (R, G, B)."""

    rgb: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.rgb)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"Fundus image must have shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("Empty fundus image")
        if arr.dtype != np.uint8:
            raise ValueError(f"Fundus image must be uint8, got {arr.dtype}")
        object.__setattr__(self, "rgb", arr)

    @classmethod
    def from_gray(cls, gray: np.ndarray) -> "FundusImage":
        g = as_gray8(gray)
        return cls(np.stack([g, g, g], axis=-1))

    @property
    def height(self) -> int:
        return int(self.rgb.shape[0])

    @property
    def width(self) -> int:
        return int(self.rgb.shape[1])

    @property
    def red(self) -> np.ndarray:
        return self.rgb[:, :, 0]

    @property
    def green(self) -> np.ndarray:
        return self.rgb[:, :, 1]

    @property
    def blue(self) -> np.ndarray:
        return self.rgb[:, :, 2]


@dataclass(frozen=True)
class PreprocessConfig:
    mask_threshold: int = 20
    prefilter_side: int = 3
    clahe_tiles: int = 8
    clahe_clip: float = 3.0

    def __post_init__(self) -> None:
        if not 0 <= self.mask_threshold <= 255:
            raise ValueError(f"mask_threshold must be in [0, 255], got {self.mask_threshold}")
        if self.prefilter_side < 1 or self.prefilter_side % 2 == 0:
            raise ValueError(f"prefilter_side must be odd and >= 1, got {self.prefilter_side}")
        if self.clahe_tiles < 2:
            raise ValueError(f"clahe_tiles must be >= 2, got {self.clahe_tiles}")
        if self.clahe_clip < 1:
            raise ValueError(f"clahe_clip must be >= 1, got {self.clahe_clip}")


def extract_green(img: FundusImage) -> np.ndarray:
    return img.green.copy()


def equalize_histogram(img: np.ndarray) -> np.ndarray:
    """Global histogram equalization (demonstration only, not used by the pipeline)."""
    g = as_gray8(img)
    hist = np.bincount(g.ravel(), minlength=GRAY_LEVELS)
    cdf = np.cumsum(hist)
    cdf_min = int(cdf[hist.nonzero()[0][0]])
    total = g.size
    if total == cdf_min:
        return g.copy()
    lut = np.floor((cdf - cdf_min) / (total - cdf_min) * 255 + 0.5)
    return np.clip(lut, 0, 255).astype(np.uint8)[g]


def _tile_mappings(padded: np.ndarray, tiles: int, clip: float) -> np.ndarray:
    """Clipped-histogram equalization lookup table per tile, shape (tiles, tiles, 256)."""
    th = padded.shape[0] // tiles
    tw = padded.shape[1] // tiles
    n = th * tw
    blocks = (
        padded.reshape(tiles, th, tiles, tw)
        .transpose(0, 2, 1, 3)
        .reshape(tiles * tiles, n)
        .astype(np.int64)
    )
    offsets = (np.arange(tiles * tiles, dtype=np.int64) * GRAY_LEVELS)[:, None]
    hist = np.bincount((blocks + offsets).ravel(), minlength=tiles * tiles * GRAY_LEVELS)
    hist = hist.reshape(tiles, tiles, GRAY_LEVELS).astype(np.float64)

    limit = clip * n / GRAY_LEVELS
    excess = np.maximum(hist - limit, 0.0).sum(axis=-1, keepdims=True)
    clipped = np.minimum(hist, limit) + excess / GRAY_LEVELS
    cdf = np.cumsum(clipped, axis=-1)
    return np.clip(np.floor(255.0 * cdf / n + 0.5), 0, 255)


def _interpolation_axis(length: int, tile: int, tiles: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Position of each pixel relative to the tile centers, clamped at the frame.
    pos = (np.arange(length) + 0.5) / tile - 0.5
    pos = np.clip(pos, 0.0, tiles - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, tiles - 1)
    return lo, hi, pos - lo


def clahe(img: np.ndarray, tiles: int = 8, clip: float = 3.0) -> np.ndarray:
    """
    Contrast-limited adaptive histogram equalization.

    The image is symmetric-padded to a multiple of the ``tiles x tiles`` grid.
    Each tile gets a clipped-histogram equalization mapping (the clipped
    excess is spread evenly over all 256 bins), and every pixel is
    bilinearly interpolated between the mappings of the four surrounding
    tiles.
    """
    g = as_gray8(img)
    h, w = g.shape
    if tiles < 1 or tiles > min(h, w):
        raise ValueError(f"Tile grid {tiles} is degenerate for a {h}x{w} image")
    if clip < 1:
        raise ValueError(f"Clip limit must be >= 1, got {clip}")

    th = -(-h // tiles)
    tw = -(-w // tiles)
    padded = np.pad(g, ((0, th * tiles - h), (0, tw * tiles - w)), mode="symmetric")
    luts = _tile_mappings(padded, tiles, clip)

    y0, y1, wy = _interpolation_axis(h, th, tiles)
    x0, x1, wx = _interpolation_axis(w, tw, tiles)
    r0 = y0[:, None]
    r1 = y1[:, None]
    c0 = x0[None, :]
    c1 = x1[None, :]
    wy = wy[:, None]
    wx = wx[None, :]
    top = (1.0 - wx) * luts[r0, c0, g] + wx * luts[r0, c1, g]
    bottom = (1.0 - wx) * luts[r1, c0, g] + wx * luts[r1, c1, g]
    out = (1.0 - wy) * top + wy * bottom
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def fundus_mask(green: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Binary FOV mask: low threshold, 5x5 median, 5x5 erosion."""
    g = as_gray8(green)
    bright = (g > cfg.mask_threshold).astype(np.uint8)
    smoothed = median_filter(bright, MASK_MEDIAN_SIDE) > 0
    return erode(smoothed, StructuringElement(MASK_ERODE_SIDE))


def preprocess(img: FundusImage, cfg: PreprocessConfig) -> Tuple[np.ndarray, np.ndarray]:
    green = extract_green(img)
    enhanced = clahe(median_filter(green, cfg.prefilter_side), cfg.clahe_tiles, cfg.clahe_clip)
    fov = fundus_mask(green, cfg)
    logger.debug(
        "preprocessed %dx%d image, fov covers %d pixels", img.width, img.height, int(fov.sum())
    )
    return enhanced, fov
