"""
Run configuration: flat ``key = value`` files validated with jsonschema.

Precedence: defaults < config file < environment < command-line overrides.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

from jsonschema import ValidationError, validate

from vesselseg.common import SCHEMA_PATH, cpu_count
from vesselseg.evaluation import EvaluationConfig
from vesselseg.gabor import GaborConfig
from vesselseg.preprocess import PreprocessConfig
from vesselseg.threshold import ThresholdConfig

logger = logging.getLogger(__name__)

THREADS_ENV = "VESSELSEG_THREADS"


class ConfigError(ValueError):
    """Invalid configuration file, override or environment value."""


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_list(raw: str) -> list:
    return [item.strip() for item in raw.split(",") if item.strip()]


# key -> (section, parser); section None means a top-level RunConfig field.
KEYS: Dict[str, Tuple[Optional[str], Callable[[str], Any]]] = {
    "mask_threshold": ("preprocess", int),
    "prefilter_side": ("preprocess", int),
    "clahe_tiles": ("preprocess", int),
    "clahe_clip": ("preprocess", float),
    "t": ("gabor", int),
    "beta": ("gabor", float),
    "orientation_step": ("gabor", int),
    "kernel_sigmas": ("gabor", float),
    "vessels_dark": (None, _parse_bool),
    "levels": ("threshold", int),
    "tie_break": ("threshold", str),
    "roc_step": ("evaluation", int),
    "fov_restricted": ("evaluation", _parse_bool),
    "out": (None, str),
    "threads": (None, int),
    "exclude": (None, _parse_list),
}


@dataclass(frozen=True)
class RunConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    gabor: GaborConfig = field(default_factory=GaborConfig)
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    vessels_dark: bool = True
    out: Path = Path("out")
    threads: int = field(default_factory=cpu_count)
    exclude: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


def load_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Parse ``key = value`` lines into typed values. Unknown keys are errors."""
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {content!r}")
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = coerce_value(key, raw, f"{source}:{lineno}")
    return values


def coerce_value(key: str, raw: Any, where: str = "override") -> Any:
    if key not in KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    if isinstance(raw, Path):
        return str(raw)
    if isinstance(raw, (list, tuple)):
        return list(raw)
    if not isinstance(raw, str):
        return raw
    try:
        return KEYS[key][1](raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: invalid value for {key}: {exc}") from exc


def to_mapping(cfg: RunConfig) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for key, (section, _) in KEYS.items():
        holder = cfg if section is None else getattr(cfg, section)
        value = getattr(holder, key)
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        values[key] = value
    return values


def config_from_mapping(values: Mapping[str, Any], base: Optional[RunConfig] = None) -> RunConfig:
    """Overlay ``values`` on ``base`` (defaults when None), validate, and build a RunConfig."""
    merged = to_mapping(base or RunConfig())
    for key, value in values.items():
        merged[key] = coerce_value(key, value)

    try:
        validate(instance=merged, schema=load_schema())
    except ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "config"
        raise ConfigError(f"{where}: {exc.message}") from exc

    sections: Dict[str, Dict[str, Any]] = {"preprocess": {}, "gabor": {}, "threshold": {}, "evaluation": {}}
    top: Dict[str, Any] = {}
    for key, value in merged.items():
        section = KEYS[key][0]
        (top if section is None else sections[section])[key] = value
    try:
        return RunConfig(
            preprocess=PreprocessConfig(**sections["preprocess"]),
            gabor=GaborConfig(**sections["gabor"]),
            threshold=ThresholdConfig(**sections["threshold"]),
            evaluation=EvaluationConfig(**sections["evaluation"]),
            vessels_dark=top["vessels_dark"],
            out=Path(top["out"]),
            threads=top["threads"],
            exclude=tuple(top["exclude"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8"), source=str(path)))
        logger.debug("loaded %d keys from %s", len(values), path)

    threads_env = os.getenv(THREADS_ENV, "").strip()
    if threads_env:
        values["threads"] = coerce_value("threads", threads_env, THREADS_ENV)

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return config_from_mapping(values)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(value)
    return str(value)


def config_to_text(cfg: RunConfig) -> str:
    """Serialize in the same format ``parse_config_text`` reads."""
    lines = [f"{key} = {_format_value(value)}" for key, value in to_mapping(cfg).items()]
    return "\n".join(lines) + "\n"
