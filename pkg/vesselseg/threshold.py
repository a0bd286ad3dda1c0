"""
Local-entropy thresholding on the gray-level co-occurrence matrix.

A candidate threshold T splits the L x L transition matrix into four
quadrants. A holds transitions between levels <= T (one class), C holds
transitions between levels > T (the other class), and B and D hold the
transitions across the boundary. The selected threshold maximizes the sum
of the normalized Shannon entropies of A and C.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from vesselseg.raster import as_gray8, as_mask, quantize

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = 256
TIE_TOLERANCE = 1e-12
TIE_BREAKS = ("lowest", "highest")


@dataclass(frozen=True, eq=False)
class GLCM:
    levels: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class TransitionProbabilities:
    levels: int
    p: np.ndarray


@dataclass(frozen=True, eq=False)
class EntropyScan:
    h: np.ndarray
    threshold: int


@dataclass(frozen=True, eq=False)
class ThresholdResult:
    levels: int
    quantized: np.ndarray
    scan: EntropyScan
    mask: np.ndarray

    @property
    def threshold(self) -> int:
        return self.scan.threshold


@dataclass(frozen=True)
class ThresholdConfig:
    levels: int = DEFAULT_LEVELS
    tie_break: str = "lowest"

    def __post_init__(self) -> None:
        if not 2 <= self.levels <= 256:
            raise ValueError(f"levels must be in [2, 256], got {self.levels}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}, got {self.tie_break!r}")


def build_glcm(img: np.ndarray, levels: int) -> GLCM:
    """Count right-neighbor and lower-neighbor transitions; each neighbor counts on its own."""
    if not 2 <= levels <= 256:
        raise ValueError(f"Level count must be in [2, 256], got {levels}")
    q = as_gray8(img).astype(np.int64)
    if int(q.max()) >= levels:
        raise ValueError(f"Pixel value {int(q.max())} is outside [0, {levels - 1}]")

    right = q[:, :-1] * levels + q[:, 1:]
    down = q[:-1, :] * levels + q[1:, :]
    flat = np.bincount(right.ravel(), minlength=levels * levels)
    flat += np.bincount(down.ravel(), minlength=levels * levels)
    return GLCM(levels=levels, counts=flat.reshape(levels, levels))


def normalize_glcm(g: GLCM) -> TransitionProbabilities:
    total = g.total
    if total == 0:
        raise ValueError("GLCM has no transitions (image must be larger than 1x1)")
    return TransitionProbabilities(levels=g.levels, p=g.counts / float(total))


def _check_level(probs: TransitionProbabilities, t_h: int) -> None:
    if not 0 <= t_h < probs.levels:
        raise ValueError(f"Threshold {t_h} is outside [0, {probs.levels - 1}]")


def quadrant_probs(probs: TransitionProbabilities, t_h: int) -> Tuple[float, float]:
    _check_level(probs, t_h)
    p = probs.p
    return float(p[: t_h + 1, : t_h + 1].sum()), float(p[t_h + 1:, t_h + 1:].sum())


def _block_entropy(block: np.ndarray) -> float:
    mass = block.sum()
    if mass <= 0:
        return 0.0
    cond = block[block > 0] / mass
    return max(0.0, float(-0.5 * np.sum(cond * np.log2(cond))))


def local_entropy(probs: TransitionProbabilities, t_h: int) -> float:
    _check_level(probs, t_h)
    p = probs.p
    return _block_entropy(p[: t_h + 1, : t_h + 1]) + _block_entropy(p[t_h + 1:, t_h + 1:])


def _quadrant_entropy(mass: np.ndarray, plogp: np.ndarray) -> np.ndarray:
    # -1/2 sum (p/m) log2(p/m) == -1/2 (sum(p log2 p) / m - log2 m)
    h = np.zeros_like(mass)
    nz = mass > 0
    h[nz] = -0.5 * (plogp[nz] / mass[nz] - np.log2(mass[nz]))
    return np.maximum(h, 0.0)


def select_threshold(probs: TransitionProbabilities, prefer: str = "lowest") -> EntropyScan:
    """
    Scan every threshold in one pass over 2-D prefix and suffix sums.

    Values within ``TIE_TOLERANCE`` of the maximum are treated as ties,
    resolved to the lowest (or highest) threshold.
    """
    if prefer not in TIE_BREAKS:
        raise ValueError(f"prefer must be one of {TIE_BREAKS}, got {prefer!r}")
    p = probs.p
    levels = probs.levels
    plogp = np.zeros_like(p)
    pos = p > 0
    plogp[pos] = p[pos] * np.log2(p[pos])

    diag = np.arange(levels)
    mass_a = p.cumsum(axis=0).cumsum(axis=1)[diag, diag]
    sum_a = plogp.cumsum(axis=0).cumsum(axis=1)[diag, diag]

    # Quadrant C for threshold T starts at (T + 1, T + 1); the last threshold leaves it empty.
    suffix_p = p[::-1, ::-1].cumsum(axis=0).cumsum(axis=1)[::-1, ::-1]
    suffix_plogp = plogp[::-1, ::-1].cumsum(axis=0).cumsum(axis=1)[::-1, ::-1]
    mass_c = np.zeros(levels)
    sum_c = np.zeros(levels)
    mass_c[:-1] = suffix_p[diag[1:], diag[1:]]
    sum_c[:-1] = suffix_plogp[diag[1:], diag[1:]]

    h = _quadrant_entropy(mass_a, sum_a) + _quadrant_entropy(mass_c, sum_c)
    ties = np.flatnonzero(h >= h.max() - TIE_TOLERANCE)
    t_e = int(ties[0] if prefer == "lowest" else ties[-1])
    return EntropyScan(h=h, threshold=t_e)


def _fov_region(response: np.ndarray, fov: Optional[np.ndarray]) -> np.ndarray:
    shape = np.shape(response)
    region = np.ones(shape, dtype=bool) if fov is None else as_mask(fov)
    if region.shape != shape:
        raise ValueError(f"FOV shape {region.shape} does not match response {shape}")
    return region


def quantize_response(
    response: np.ndarray,
    levels: int = DEFAULT_LEVELS,
    fov: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Quantize with the range taken over the FOV; pixels outside the FOV go to level 0."""
    region = _fov_region(response, fov)
    q = quantize(response, levels, region=region)
    q[~region] = 0
    return q


def entropic_threshold(
    response: np.ndarray,
    levels: int = DEFAULT_LEVELS,
    fov: Optional[np.ndarray] = None,
    prefer: str = "lowest",
) -> ThresholdResult:
    """
    Quantize a response map over the FOV and binarize it at the entropic threshold.

    Pixels outside the FOV are put on level 0 before transitions are counted,
    and never appear in the mask.
    """
    region = _fov_region(response, fov)
    q = quantize_response(response, levels, region)
    if not region.any():
        scan = EntropyScan(h=np.zeros(levels), threshold=0)
        return ThresholdResult(levels, q, scan, np.zeros(region.shape, dtype=bool))

    scan = select_threshold(normalize_glcm(build_glcm(q, levels)), prefer=prefer)
    mask = (q > scan.threshold) & region
    logger.debug("entropic threshold %d of %d levels, %d vessel pixels", scan.threshold, levels, int(mask.sum()))
    return ThresholdResult(levels, q, scan, mask)


def binarize(
    response: np.ndarray,
    levels: int = DEFAULT_LEVELS,
    fov: Optional[np.ndarray] = None,
    prefer: str = "lowest",
) -> np.ndarray:
    return entropic_threshold(response, levels, fov, prefer).mask
