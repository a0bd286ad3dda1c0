"""
Image file I/O with Pillow.

Inputs: 8-bit PNG, PPM/PGM, TIFF, JPEG and BMP. Ground truth and FOV masks
may be any single- or multi-channel image; nonzero means set. GIF is
rejected (DRIVE ships its manual segmentations as GIF; convert them to PNG
first).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from vesselseg.preprocess import FundusImage
from vesselseg.raster import as_gray8, as_mask

IMAGE_SUFFIXES = {".png", ".ppm", ".pgm", ".pnm", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp"}
UNSUPPORTED_SUFFIXES = {".gif"}


def _open(path: Path) -> Image.Image:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Missing image file: {path}")
    if path.suffix.lower() in UNSUPPORTED_SUFFIXES:
        raise ValueError(f"GIF images are not supported, convert {path.name} to PNG")
    img = Image.open(path)
    img.load()
    return img


def fundus_from_image(img: Image.Image) -> FundusImage:
    if img.mode == "I" or img.mode.startswith("I;16"):
        arr = np.asarray(img).astype(np.int64)
        if arr.size and arr.max() > 255:
            # 16-bit samples: keep the top 8 bits.
            arr = arr >> 8
        return FundusImage.from_gray(np.clip(arr, 0, 255).astype(np.uint8))
    return FundusImage(np.asarray(img.convert("RGB"), dtype=np.uint8))


def read_fundus(path: Path) -> FundusImage:
    return fundus_from_image(_open(path))


def read_mask(path: Path) -> np.ndarray:
    img = _open(path)
    if img.mode in ("RGB", "RGBA", "P", "LA", "1"):
        img = img.convert("L")
    return np.asarray(img) != 0


def write_gray(path: Path, image: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(as_gray8(image))).save(path, format="PNG")
    return path


def write_mask(path: Path, mask: np.ndarray) -> Path:
    """Binary mask as an 8-bit PNG holding only 0 and 255."""
    return write_gray(path, np.where(as_mask(mask), 255, 0).astype(np.uint8))


def write_rgb(path: Path, image: FundusImage) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(image.rgb)).save(path, format="PNG")
    return path
