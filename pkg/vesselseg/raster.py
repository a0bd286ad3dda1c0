"""
Raster primitives shared by every stage of the pipeline.

Images are plain 2-D numpy arrays indexed ``[row, col]``:
- 8-bit gray images are ``uint8``
- real-valued images (filter responses) are ``float64``
- binary masks are ``bool``
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)

BORDER_MODE = "reflect"


def _check_2d(image: np.ndarray, what: str) -> None:
    if image.ndim != 2:
        raise ValueError(f"Expected a 2D {what}, got shape {image.shape}")
    if image.size == 0:
        raise ValueError(f"Empty {what}")


def as_gray8(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    _check_2d(arr, "gray image")
    if arr.dtype == np.uint8:
        return arr
    if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255:
        return arr.astype(np.uint8)
    raise ValueError(f"8-bit gray image must hold integers in [0, 255], got {arr.dtype}")


def as_real(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    _check_2d(arr, "image")
    return arr


def as_mask(mask: np.ndarray) -> np.ndarray:
    arr = np.asarray(mask)
    _check_2d(arr, "mask")
    return arr != 0 if arr.dtype != bool else arr


@dataclass(frozen=True)
class StructuringElement:
    """Full square structuring element of odd side."""

    side: int

    def __post_init__(self) -> None:
        if self.side < 1 or self.side % 2 == 0:
            raise ValueError(f"Structuring element side must be odd and >= 1, got {self.side}")

    def footprint(self) -> np.ndarray:
        return np.ones((self.side, self.side), dtype=bool)


def convolve2d(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """
    Full 2-D convolution with reflected borders.

    The output has the input's shape. An impulse image reproduces the
    kernel centered on the impulse.
    """
    img = as_real(image)
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.size == 0:
        raise ValueError(f"Kernel must be a non-empty 2D matrix, got shape {k.shape}")
    if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ValueError(f"Kernel dimensions must be odd, got {k.shape}")
    return ndimage.convolve(img, k, mode=BORDER_MODE)


def median_filter(image: np.ndarray, side: int) -> np.ndarray:
    if side < 1 or side % 2 == 0:
        raise ValueError(f"Median window side must be odd and >= 1, got {side}")
    arr = np.asarray(image)
    _check_2d(arr, "image")
    if side == 1:
        return arr.copy()
    return ndimage.median_filter(arr, size=side, mode=BORDER_MODE)


def erode(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    # Pixels outside the frame count as background, so the frame always erodes.
    m = as_mask(mask)
    return ndimage.binary_erosion(m, structure=se.footprint(), border_value=0)


def quantize(
    image: np.ndarray,
    levels: int,
    region: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Affine map of [min, max] onto [0, levels - 1] with round-half-up.

    When ``region`` is given the range is taken over the region's pixels
    only and values outside it are clipped. A degenerate range maps to 0.
    """
    if not 2 <= levels <= 256:
        raise ValueError(f"Level count must be in [2, 256], got {levels}")
    img = as_real(image)
    if not np.all(np.isfinite(img)):
        raise ValueError("Cannot quantize an image with non-finite values")

    sample = img
    if region is not None:
        reg = as_mask(region)
        if reg.shape != img.shape:
            raise ValueError(f"Region shape {reg.shape} does not match image {img.shape}")
        sample = img[reg]
    if sample.size == 0:
        return np.zeros(img.shape, dtype=np.uint8)

    lo = float(sample.min())
    hi = float(sample.max())
    if hi <= lo:
        return np.zeros(img.shape, dtype=np.uint8)
    logger.debug("quantize range [%g, %g] onto %d levels", lo, hi, levels)
    # Halved operands keep the range finite near the float limits.
    scaled = np.floor((img / 2 - lo / 2) / (hi / 2 - lo / 2) * (levels - 1) + 0.5)
    return np.clip(scaled, 0, levels - 1).astype(np.uint8)
