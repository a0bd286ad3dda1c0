"""
Synthetic fundus phantoms with exact ground truth.

A phantom is a bright fundus disc on a black camera surround with dark
vessels drawn into it: a straight bar, a sinusoidal vessel, or a small
branching tree. The green plane carries the gray phantom verbatim.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from vesselseg.images import write_mask, write_rgb
from vesselseg.preprocess import FundusImage

logger = logging.getLogger(__name__)

PHANTOM_KINDS = ("bar", "sinusoid", "tree")
DISC_RADIUS_FRACTION = 0.45
BRANCH_ANGLE = 30.0


@dataclass(frozen=True)
class PhantomSpec:
    width: int = 256
    height: int = 256
    kind: str = "bar"
    vessel_width: float = 6
    contrast: int = 60
    noise_sd: float = 0.0
    angle: float = 90.0
    fundus_level: int = 150

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ValueError(f"Phantom must be at least 8x8, got {self.width}x{self.height}")
        if self.kind not in PHANTOM_KINDS:
            raise ValueError(f"Unknown phantom kind {self.kind!r}, expected one of {PHANTOM_KINDS}")
        if self.vessel_width < 1:
            raise ValueError(f"vessel_width must be >= 1, got {self.vessel_width}")
        if not 1 <= self.contrast <= 255:
            raise ValueError(f"contrast must be in [1, 255], got {self.contrast}")
        if not 1 <= self.fundus_level <= 255:
            raise ValueError(f"fundus_level must be in [1, 255], got {self.fundus_level}")
        if self.contrast > self.fundus_level:
            raise ValueError(
                f"contrast {self.contrast} exceeds fundus_level {self.fundus_level}"
            )
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")


def _grid(spec: PhantomSpec) -> Tuple[np.ndarray, np.ndarray, float, float]:
    yy, xx = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    return xx, yy, (spec.width - 1) / 2.0, (spec.height - 1) / 2.0


def disc_mask(spec: PhantomSpec) -> np.ndarray:
    xx, yy, cx, cy = _grid(spec)
    radius = DISC_RADIUS_FRACTION * min(spec.width, spec.height)
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2


def _line_distance(xx: np.ndarray, yy: np.ndarray, cx: float, cy: float, angle: float) -> np.ndarray:
    # Line through (cx, cy) along (cos a, sin a), x right and y down.
    rad = math.radians(angle)
    return np.abs(-(xx - cx) * math.sin(rad) + (yy - cy) * math.cos(rad))


def _segment_distance(
    xx: np.ndarray,
    yy: np.ndarray,
    start: Tuple[float, float],
    end: Tuple[float, float],
) -> np.ndarray:
    x0, y0 = start
    dx = end[0] - x0
    dy = end[1] - y0
    length_sq = dx * dx + dy * dy
    s = np.clip(((xx - x0) * dx + (yy - y0) * dy) / length_sq, 0.0, 1.0)
    return np.hypot(xx - (x0 + s * dx), yy - (y0 + s * dy))


def _bar(spec: PhantomSpec) -> np.ndarray:
    xx, yy, cx, cy = _grid(spec)
    return _line_distance(xx, yy, cx, cy, spec.angle) <= spec.vessel_width / 2.0


def _sinusoid(spec: PhantomSpec) -> np.ndarray:
    xx, yy, _, cy = _grid(spec)
    amplitude = 0.12 * min(spec.width, spec.height)
    k = 2.0 * math.pi / (0.5 * spec.width)
    curve = cy + amplitude * np.sin(k * xx)
    slope = amplitude * k * np.cos(k * xx)
    # First-order distance to the curve measured along its normal.
    return np.abs(yy - curve) / np.sqrt(1.0 + slope ** 2) <= spec.vessel_width / 2.0


def _tree(spec: PhantomSpec) -> np.ndarray:
    xx, yy, cx, cy = _grid(spec)
    radius = DISC_RADIUS_FRACTION * min(spec.width, spec.height)
    fork = (cx, cy)
    root = (cx, cy + 0.9 * radius)
    trunk = _segment_distance(xx, yy, root, fork) <= spec.vessel_width / 2.0

    branch_len = 0.8 * radius
    branch_half = max(1.0, 0.75 * spec.vessel_width) / 2.0
    vessels = trunk
    for sign in (-1.0, 1.0):
        rad = math.radians(90.0 + sign * BRANCH_ANGLE)
        tip = (cx + branch_len * math.cos(rad), cy - branch_len * math.sin(rad))
        vessels = vessels | (_segment_distance(xx, yy, fork, tip) <= branch_half)
    return vessels


_DRAWERS = {"bar": _bar, "sinusoid": _sinusoid, "tree": _tree}


def vessel_map(spec: PhantomSpec) -> np.ndarray:
    """Vessel pixels inside the fundus disc; this is the ground truth."""
    return _DRAWERS[spec.kind](spec) & disc_mask(spec)


def _round8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def generate_phantom(spec: PhantomSpec, seed: int = 0) -> Tuple[FundusImage, np.ndarray]:
    disc = disc_mask(spec)
    truth = vessel_map(spec)

    gray = np.zeros((spec.height, spec.width), dtype=np.float64)
    gray[disc] = spec.fundus_level
    gray[truth] = spec.fundus_level - spec.contrast
    if spec.noise_sd > 0:
        noise = np.random.default_rng(seed).normal(0.0, spec.noise_sd, size=gray.shape)
        gray[disc] += noise[disc]

    green = _round8(gray)
    rgb = np.stack([_round8(1.5 * green), green, _round8(0.4 * green)], axis=-1)
    return FundusImage(rgb), truth


def write_phantom(spec: PhantomSpec, seed: int, out_dir: Path, phantom_id: str) -> Tuple[Path, Path]:
    """Write ``<id>.png`` and ``<id>_truth.png`` so the pair loads with the flat layout."""
    image, truth = generate_phantom(spec, seed)
    out_dir = Path(out_dir)
    image_path = write_rgb(out_dir / f"{phantom_id}.png", image)
    truth_path = write_mask(out_dir / f"{phantom_id}_truth.png", truth)
    logger.info("[phantom] %s: %s %dx%d, %d vessel pixels", phantom_id, spec.kind, spec.width, spec.height, int(truth.sum()))
    return image_path, truth_path
