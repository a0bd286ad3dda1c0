"""
Dataset discovery for DRIVE-style, STARE-style and flat directory layouts.

Usage:
    records = load_dataset(Path("data/DRIVE/test"), "drive")
    records = load_dataset(Path("data/STARE"), "stare", exclude=["im0004"])
    records = load_dataset(Path("phantoms"), "flat")
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

from vesselseg.images import IMAGE_SUFFIXES, UNSUPPORTED_SUFFIXES

logger = logging.getLogger(__name__)

LAYOUTS = ("drive", "stare", "flat")
FLAT_TRUTH_SUFFIXES = ("_truth", "_manual1")
FLAT_FOV_SUFFIXES = ("_fov", "_mask")


@dataclass
class DatasetRecord:
    id: str
    image_path: Path
    truth_path: Optional[Path] = None
    fov_path: Optional[Path] = None

    def __str__(self):
        return self.id


def _drive_key(path: Path) -> str:
    # 21_training.tif, 21_manual1.gif, 21_training_mask.gif -> 21
    return path.stem.split("_", 1)[0]


def _stare_key(path: Path) -> str:
    # im0001.ppm, im0001.ah.ppm -> im0001
    return path.name.split(".", 1)[0]


def _image_files(directory: Path) -> List[Path]:
    files = []
    for path in sorted(directory.iterdir()):
        if not path.is_file():
            continue
        suffix = path.suffix.lower()
        if suffix in UNSUPPORTED_SUFFIXES:
            logger.warning("Skipping %s: GIF is not supported, convert it to PNG", path)
        elif suffix in IMAGE_SUFFIXES:
            files.append(path)
    return files


def _index(directory: Path, key: Callable[[Path], str], role: str) -> Dict[str, Path]:
    index: Dict[str, Path] = {}
    if not directory.is_dir():
        return index
    for path in _image_files(directory):
        k = key(path)
        if k in index:
            logger.warning("Duplicate %s for %s: keeping %s, ignoring %s", role, k, index[k].name, path.name)
            continue
        index[k] = path
    return index


def _pair(
    images: Dict[str, Path],
    truths: Dict[str, Path],
    fovs: Dict[str, Path],
) -> List[DatasetRecord]:
    for role, table in (("truth", truths), ("fov", fovs)):
        for orphan in sorted(set(table) - set(images)):
            logger.warning("Orphan %s file %s has no matching image", role, table[orphan])
    return [
        DatasetRecord(id=k, image_path=images[k], truth_path=truths.get(k), fov_path=fovs.get(k))
        for k in images
    ]


def _load_drive(root: Path) -> List[DatasetRecord]:
    images = _index(root / "images", _drive_key, "image")
    if not images:
        logger.warning("No images found under %s", root / "images")
    truths = _index(root / "1st_manual", _drive_key, "truth")
    fovs = _index(root / "mask", _drive_key, "fov")
    return _pair(images, truths, fovs)


def _load_stare(root: Path) -> List[DatasetRecord]:
    images = _index(root / "images", _stare_key, "image")
    if not images:
        logger.warning("No images found under %s", root / "images")
    labels = root / "labels-ah"
    if not labels.is_dir():
        labels = root / "labels-vk"
    truths = _index(labels, _stare_key, "truth")
    fovs = _index(root / "mask", _stare_key, "fov")
    return _pair(images, truths, fovs)


def _strip_suffix(stem: str, suffixes: Iterable[str]) -> Optional[str]:
    for suffix in suffixes:
        if stem.endswith(suffix) and len(stem) > len(suffix):
            return stem[: -len(suffix)]
    return None


def _load_flat(root: Path) -> List[DatasetRecord]:
    images: Dict[str, Path] = {}
    truths: Dict[str, Path] = {}
    fovs: Dict[str, Path] = {}
    for path in _image_files(root):
        stem = path.stem
        truth_id = _strip_suffix(stem, FLAT_TRUTH_SUFFIXES)
        fov_id = _strip_suffix(stem, FLAT_FOV_SUFFIXES)
        if truth_id is not None:
            target, k, role = truths, truth_id, "truth"
        elif fov_id is not None:
            target, k, role = fovs, fov_id, "fov"
        else:
            target, k, role = images, stem, "image"
        if k in target:
            logger.warning("Duplicate %s for %s: keeping %s, ignoring %s", role, k, target[k].name, path.name)
            continue
        target[k] = path
    return _pair(images, truths, fovs)


_LOADERS = {"drive": _load_drive, "stare": _load_stare, "flat": _load_flat}


def load_dataset(
    root: Path,
    layout: str = "flat",
    exclude: Iterable[str] = (),
) -> List[DatasetRecord]:
    """Discover image/truth/FOV triples under ``root``, sorted by id."""
    root = Path(root)
    if layout not in LAYOUTS:
        raise ValueError(f"Unknown layout {layout!r}, expected one of {LAYOUTS}")
    if not root.is_dir():
        raise FileNotFoundError(f"Dataset root not found: {root}")

    skip = set(exclude)
    records = [r for r in _LOADERS[layout](root) if r.id not in skip]
    records.sort(key=lambda r: r.id)
    for record in records:
        if record.truth_path is None:
            logger.debug("No ground truth for %s", record.id)
    logger.info("Loaded %d records from %s (%s layout)", len(records), root, layout)
    return records
