"""
Batch command line for vessel segmentation.

Usage:
    python -m vesselseg phantom --out phantoms --id bar90 --angle 90
    python -m vesselseg segment --input phantoms --layout flat --out out
    python -m vesselseg evaluate --input data/DRIVE/test --layout drive --out out
    python -m vesselseg evaluate --input phantoms --predictions out --out scores
    python -m vesselseg roc --input phantoms --out out --roc-step 5
    python -m vesselseg enhance --input phantoms --out enhanced

Exit codes: 0 success, 1 some image failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from vesselseg.common import setup_logging, sha256_file, utc_now_iso, write_json
from vesselseg.config import ConfigError, RunConfig, config_to_text, load_config, to_mapping
from vesselseg.dataset import LAYOUTS, DatasetRecord, load_dataset
from vesselseg.evaluation import (
    MissingTruthError,
    aggregate,
    contingency,
    roc_curve,
    sens_spec,
)
from vesselseg.images import read_fundus, read_mask, write_gray, write_mask
from vesselseg.phantom import PHANTOM_KINDS, PhantomSpec, write_phantom
from vesselseg.preprocess import clahe, equalize_histogram, extract_green, fundus_mask
from vesselseg.pipeline import failures, run_batch, segment_record
from vesselseg.raster import median_filter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

METRIC_FIELDS = ["id", "tp", "fp", "tn", "fn", "sensitivity", "specificity", "threshold", "error"]


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.conf").write_text(config_to_text(cfg), encoding="utf-8")
    return out


def _scored_region(cfg: RunConfig, fov: np.ndarray) -> Optional[np.ndarray]:
    return fov if cfg.evaluation.fov_restricted else None


def _require_truth(record: DatasetRecord) -> np.ndarray:
    if record.truth_path is None:
        raise MissingTruthError(f"No ground truth for {record.id}")
    return read_mask(record.truth_path)


def _require_records(records: Sequence[DatasetRecord], command: str) -> None:
    if not records:
        raise ConfigError(f"{command}: no input records")


def segment_command(cfg: RunConfig, records: Sequence[DatasetRecord]) -> int:
    out = _prepare_out(cfg)

    def work(record: DatasetRecord) -> Dict[str, Any]:
        result = segment_record(record, cfg)
        mask_path = write_mask(out / f"{record.id}.mask.png", result.mask)
        write_gray(out / f"{record.id}.response.png", result.quantized)
        logger.info("[segment] %s T_E=%d %.2fs", record.id, result.t_e, result.seconds)
        return {
            "id": record.id,
            "threshold": result.t_e,
            "mask_sha256": sha256_file(mask_path),
            "seconds": round(result.seconds, 3),
            "width": int(result.mask.shape[1]),
            "height": int(result.mask.shape[0]),
        }

    outcomes = run_batch(records, work, cfg.threads, "segment")
    done = [result for _, result in outcomes if not isinstance(result, BaseException)]

    with (out / "timing.csv").open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "width", "height", "seconds", "threshold"])
        for row in done:
            writer.writerow([row["id"], row["width"], row["height"], f"{row['seconds']:.3f}", row["threshold"]])

    failed = failures(outcomes)
    write_json(
        out / "manifest.json",
        {
            "generated_at": utc_now_iso(),
            "config": to_mapping(cfg),
            "images": done,
            "failed": [record.id for record in failed],
        },
    )
    logger.info("[segment] %d segmented, %d failed", len(done), len(failed))
    return EXIT_FAILED if failed else EXIT_OK


def evaluate_command(
    cfg: RunConfig,
    records: Sequence[DatasetRecord],
    predictions: Optional[Path] = None,
) -> int:
    _require_records(records, "evaluate")
    out = _prepare_out(cfg)

    def work(record: DatasetRecord) -> Dict[str, Any]:
        truth = _require_truth(record)
        if predictions is not None:
            mask = read_mask(Path(predictions) / f"{record.id}.mask.png")
            if record.fov_path is not None:
                fov = read_mask(record.fov_path)
            else:
                fov = fundus_mask(extract_green(read_fundus(record.image_path)), cfg.preprocess)
            threshold: Any = ""
        else:
            result = segment_record(record, cfg)
            mask, fov, threshold = result.mask, result.fov, result.t_e
        counts = contingency(mask, truth, _scored_region(cfg, fov))
        sensitivity, specificity = sens_spec(counts)
        logger.info("[evaluate] %s sens=%.4f spec=%.4f", record.id, sensitivity, specificity)
        return {
            "id": record.id,
            "tp": counts.tp,
            "fp": counts.fp,
            "tn": counts.tn,
            "fn": counts.fn,
            "sensitivity": sensitivity,
            "specificity": specificity,
            "threshold": threshold,
        }

    outcomes = run_batch(records, work, cfg.threads, "evaluate")
    rows: List[Dict[str, Any]] = []
    scores = []
    for record, result in outcomes:
        if isinstance(result, BaseException):
            rows.append({"id": record.id, "error": str(result)})
            continue
        rows.append(result)
        scores.append((result["sensitivity"], result["specificity"]))

    with (out / "metrics.csv").open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=METRIC_FIELDS, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(_format_metrics(row))
        if scores:
            summary = aggregate(scores)
            writer.writerow(_format_metrics(
                {"id": "mean", "sensitivity": summary.sensitivity_mean, "specificity": summary.specificity_mean}
            ))
            writer.writerow(_format_metrics(
                {"id": "sd", "sensitivity": summary.sensitivity_sd, "specificity": summary.specificity_sd}
            ))
            logger.info(
                "[evaluate] %d images: sensitivity %.4f +/- %.4f, specificity %.4f +/- %.4f",
                summary.count,
                summary.sensitivity_mean,
                summary.sensitivity_sd,
                summary.specificity_mean,
                summary.specificity_sd,
            )
    return EXIT_FAILED if failures(outcomes) else EXIT_OK


def _format_metrics(row: Dict[str, Any]) -> Dict[str, Any]:
    formatted = dict(row)
    for key in ("sensitivity", "specificity"):
        if key in formatted:
            formatted[key] = f"{formatted[key]:.6f}"
    return formatted


def roc_command(cfg: RunConfig, records: Sequence[DatasetRecord]) -> int:
    _require_records(records, "roc")
    out = _prepare_out(cfg)
    roc_dir = out / "roc"
    roc_dir.mkdir(parents=True, exist_ok=True)

    def work(record: DatasetRecord) -> int:
        truth = _require_truth(record)
        result = segment_record(record, cfg)
        region = result.fov if cfg.evaluation.fov_restricted else np.ones(truth.shape, dtype=bool)
        curve = roc_curve(
            result.response,
            truth,
            result.fov,
            step=cfg.evaluation.roc_step,
            levels=cfg.threshold.levels,
            region=region,
        )
        with (roc_dir / f"{record.id}.csv").open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["threshold", "fpr", "tpr"])
            for point in curve.points:
                writer.writerow([point.threshold, f"{point.fpr:.6f}", f"{point.tpr:.6f}"])
        sensitivity, specificity = sens_spec(contingency(result.mask, truth, region))
        logger.info(
            "[roc] %s %d points, operating point T_E=%d fpr=%.4f tpr=%.4f",
            record.id,
            len(curve),
            result.t_e,
            1.0 - specificity,
            sensitivity,
        )
        return len(curve)

    outcomes = run_batch(records, work, cfg.threads, "roc")
    return EXIT_FAILED if failures(outcomes) else EXIT_OK


def enhance_command(cfg: RunConfig, records: Sequence[DatasetRecord]) -> int:
    """Green plane, global equalization and CLAHE side by side, for inspection."""
    out = _prepare_out(cfg)
    pre = cfg.preprocess

    def work(record: DatasetRecord) -> Path:
        green = extract_green(read_fundus(record.image_path))
        local = clahe(median_filter(green, pre.prefilter_side), pre.clahe_tiles, pre.clahe_clip)
        panel = np.hstack([green, equalize_histogram(green), local])
        return write_gray(out / f"{record.id}.enhance.png", panel)

    outcomes = run_batch(records, work, cfg.threads, "enhance")
    return EXIT_FAILED if failures(outcomes) else EXIT_OK


def phantom_command(spec: PhantomSpec, seed: int, out: Path, phantom_id: str):
    return write_phantom(spec, seed, Path(out), phantom_id)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    _add_common(parser)
    parser.add_argument("--config", type=Path, help="key = value configuration file")
    parser.add_argument("--input", type=Path, required=True, help="Dataset root directory")
    parser.add_argument("--layout", choices=LAYOUTS, default="flat", help="Dataset layout (default: flat)")
    parser.add_argument("--threads", type=int, help="Images processed in parallel")
    parser.add_argument("--t", type=int, help="Vessel thickness in pixels")
    parser.add_argument("--beta", type=float, help="Frequency factor in [0.5, 1]")
    parser.add_argument("--levels", type=int, help="Gray levels of the quantized response")
    parser.add_argument("--roc-step", type=int, help="Threshold step of ROC sweeps")
    parser.add_argument("--mask-threshold", type=int, help="FOV mask threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vesselseg",
        description="Retinal vessel segmentation with a Gabor bank and local entropy thresholding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("segment", "Segment every image and write masks"),
        ("evaluate", "Score segmentations against ground truth"),
        ("roc", "Write ROC tables by sweeping the threshold"),
        ("enhance", "Write green / equalized / CLAHE panels"),
    ):
        _add_run_options(sub.add_parser(name, help=help_text))
    sub.choices["evaluate"].add_argument(
        "--predictions", type=Path, help="Score existing <id>.mask.png files from this directory"
    )

    phantom = sub.add_parser("phantom", help="Write a synthetic phantom and its ground truth")
    _add_common(phantom)
    defaults = PhantomSpec()
    phantom.add_argument("--kind", choices=PHANTOM_KINDS, default=defaults.kind)
    phantom.add_argument("--width", type=int, default=defaults.width)
    phantom.add_argument("--height", type=int, default=defaults.height)
    phantom.add_argument("--vessel-width", type=float, default=defaults.vessel_width)
    phantom.add_argument("--contrast", type=int, default=defaults.contrast)
    phantom.add_argument("--noise-sd", type=float, default=defaults.noise_sd)
    phantom.add_argument("--angle", type=float, default=defaults.angle, help="Bar orientation in degrees")
    phantom.add_argument("--seed", type=int, default=0)
    phantom.add_argument("--id", default="phantom", help="Phantom id (file stem)")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "out": args.out,
        "threads": args.threads,
        "t": args.t,
        "beta": args.beta,
        "levels": args.levels,
        "roc_step": args.roc_step,
        "mask_threshold": args.mask_threshold,
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    if args.command == "phantom":
        try:
            spec = PhantomSpec(
                width=args.width,
                height=args.height,
                kind=args.kind,
                vessel_width=args.vessel_width,
                contrast=args.contrast,
                noise_sd=args.noise_sd,
                angle=args.angle,
            )
        except ValueError as exc:
            logger.error("[phantom] %s", exc)
            return EXIT_CONFIG
        phantom_command(spec, args.seed, args.out or Path("."), args.id)
        return EXIT_OK

    try:
        cfg = load_config(args.config, _overrides(args))
        records = load_dataset(args.input, args.layout, cfg.exclude)
        if args.command == "segment":
            return segment_command(cfg, records)
        if args.command == "evaluate":
            return evaluate_command(cfg, records, args.predictions)
        if args.command == "roc":
            return roc_command(cfg, records)
        return enhance_command(cfg, records)
    except (ConfigError, FileNotFoundError) as exc:
        logger.error("[%s] %s", args.command, exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
