# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

from pydantic import ValidationError

from app.errors import InvalidConfig
from app.schemas import PipelineConfig, RunSettings, sha256_hex

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "./triage-out"
DEFAULT_CATALOG_DB = "sqlite:///./hash_catalog.db"

SettingsT = TypeVar("SettingsT", bound=RunSettings)


def output_dir(override: Optional[Path] = None) -> Path:
    """Output directory: flag, then TRIAGE_OUTPUT_DIR, then ./triage-out"""
    if override is not None:
        return Path(override)
    return Path(os.getenv("TRIAGE_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))


def catalog_db_url(override: Optional[str] = None) -> str:
    return override or os.getenv("TRIAGE_CATALOG_DB", DEFAULT_CATALOG_DB)


def log_level() -> str:
    return os.getenv("TRIAGE_LOG_LEVEL", "INFO").upper()


def report_timestamp() -> Optional[str]:
    return os.getenv("TRIAGE_REPORT_TIMESTAMP") or None


def stage_seed(seed: int, stage: str) -> int:
    """Derives the seed of one pipeline stage from the top-level seed."""
    return int(sha256_hex(f"{seed}:{stage}")[:16], 16)


INPUT_KEYS = ("timeline", "catalog", "manifest", "artefacts", "truth")


def _read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    """Raw config values; relative paths are resolved against the file's directory."""
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise InvalidConfig(f"Config {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise InvalidConfig(f"Config {path} must hold a JSON object")
    base = Path(path).parent
    for key in INPUT_KEYS + ("output_dir",):
        if data.get(key) and not Path(data[key]).is_absolute():
            data[key] = str(base / data[key])
    return data


def _merge(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Overlays flag values on config values; None means the flag was not given."""
    merged = dict(data)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            current = merged.get(key)
            merged[key] = _merge(current if isinstance(current, dict) else {}, value)
        else:
            merged[key] = value
    return merged


def _validate(model: Type[SettingsT], data: Dict[str, Any]) -> SettingsT:
    try:
        settings = model.model_validate(data)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid config: {e}")
    for name in INPUT_KEYS:
        value = getattr(settings, name)
        if value is not None and not Path(value).exists():
            raise InvalidConfig(f"Config input '{name}' does not exist: {value}")
    logger.debug(f"Loaded config: {settings.model_dump_json()}")
    return settings


def load_run_settings(path: Optional[Path], overrides: Optional[Dict[str, Any]] = None) -> RunSettings:
    """Config file values for a single subcommand, flags win."""
    return _validate(RunSettings, _merge(_read_config_file(path), overrides or {}))


def load_pipeline_config(path: Optional[Path], overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Loads the JSON config file and applies flag overrides (flags win).

    Relative paths in the file are resolved against the file's directory.
    """
    return _validate(PipelineConfig, _merge(_read_config_file(path), overrides or {}))
