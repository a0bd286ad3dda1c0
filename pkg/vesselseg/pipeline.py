"""
Per-image segmentation pipeline and the batch runner around it.

    fundus -> preprocess -> bank input -> Gabor bank -> entropic threshold -> mask
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
from tqdm import tqdm

from vesselseg.config import RunConfig
from vesselseg.dataset import DatasetRecord
from vesselseg.gabor import apply_bank
from vesselseg.images import read_fundus, read_mask
from vesselseg.preprocess import FundusImage, preprocess
from vesselseg.raster import as_mask
from vesselseg.threshold import ThresholdResult, entropic_threshold

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    enhanced: np.ndarray
    fov: np.ndarray
    response: np.ndarray
    threshold: ThresholdResult
    seconds: float

    @property
    def mask(self) -> np.ndarray:
        return self.threshold.mask

    @property
    def quantized(self) -> np.ndarray:
        return self.threshold.quantized

    @property
    def t_e(self) -> int:
        return self.threshold.threshold


def bank_input(enhanced: np.ndarray, fov: np.ndarray, vessels_dark: bool = True) -> np.ndarray:
    """
    Real-valued image handed to the Gabor bank.

    Dark vessels are complemented so they respond positively. Pixels outside
    the FOV take the FOV mean, so the retina rim does not look like a vessel.
    """
    image = enhanced.astype(np.float64)
    if vessels_dark:
        image = 255.0 - image
    if fov.any():
        image[~fov] = image[fov].mean()
    return image


def segment_image(
    fundus: FundusImage,
    cfg: RunConfig,
    fov: Optional[np.ndarray] = None,
) -> SegmentationResult:
    """Run the full chain on one image. A supplied ``fov`` replaces the computed mask."""
    start = time.perf_counter()
    enhanced, computed_fov = preprocess(fundus, cfg.preprocess)
    if fov is None:
        fov = computed_fov
    else:
        fov = as_mask(fov)
        if fov.shape != enhanced.shape:
            raise ValueError(f"FOV mask shape {fov.shape} does not match image {enhanced.shape}")

    response = apply_bank(
        bank_input(enhanced, fov, cfg.vessels_dark),
        cfg.gabor.params,
        cfg.gabor.orientations,
        cfg.gabor.radius,
    )
    result = entropic_threshold(
        response,
        cfg.threshold.levels,
        fov,
        prefer=cfg.threshold.tie_break,
    )
    return SegmentationResult(
        enhanced=enhanced,
        fov=fov,
        response=response,
        threshold=result,
        seconds=time.perf_counter() - start,
    )


def load_record(record: DatasetRecord) -> Tuple[FundusImage, Optional[np.ndarray]]:
    fundus = read_fundus(record.image_path)
    fov = read_mask(record.fov_path) if record.fov_path is not None else None
    return fundus, fov


def segment_record(record: DatasetRecord, cfg: RunConfig) -> SegmentationResult:
    fundus, fov = load_record(record)
    return segment_image(fundus, cfg, fov)


Outcome = Tuple[DatasetRecord, Union[T, BaseException]]


def run_batch(
    records: Sequence[DatasetRecord],
    worker: Callable[[DatasetRecord], T],
    threads: int,
    desc: str,
) -> List[Outcome]:
    """
    Apply ``worker`` to every record on a thread pool.

    Failures are logged and returned in place of the result; the output
    keeps the order of ``records`` whatever order the workers finish in.
    """
    outcomes: List[Optional[Outcome]] = [None] * len(records)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        futures = {executor.submit(worker, record): i for i, record in enumerate(records)}
        with tqdm(total=len(records), desc=desc) as pbar:
            for future in as_completed(futures):
                i = futures[future]
                record = records[i]
                try:
                    outcomes[i] = (record, future.result())
                except Exception as exc:
                    logger.error("[%s] %s failed: %s", desc, record.id, exc)
                    outcomes[i] = (record, exc)
                pbar.update(1)
    return outcomes


def failures(outcomes: Sequence[Outcome]) -> List[DatasetRecord]:
    return [record for record, result in outcomes if isinstance(result, BaseException)]
