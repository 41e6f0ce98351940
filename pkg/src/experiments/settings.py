"""
Project settings
config.yaml loading and logging setup
"""

import copy
import sys
from pathlib import Path
from typing import Any, Dict, Union

import yaml
from loguru import logger

from src.exceptions import InvalidParameterError

DEFAULT_SETTINGS: Dict[str, Any] = {
    "project": {
        "name": "D2DRegen",
        "version": "0.2.0",
        "description": "Transmission cost planner for D2D caching with regenerating codes",
    },
    "markov": {"tail_eps": 1e-12},
    "cost_model": {"repair_offset": 2, "normalizer": "asymptotic"},
    "simulator": {
        "batch_count": 10,
        "min_events_per_batch": 10,
        "coupling": "deterministic",
        "start": "warm",
        "draw_block": 65536,
        "default_events": 1_000_000,
    },
    "planner": {
        "n": 30,
        "d": 10,
        "k_min": 2,
        "p_min": 1e-6,
        "p_max": 1e2,
        "scan_points": 64,
        "log_xtol": 1e-10,
        "n_jobs": 1,
    },
    "output": {"format": "csv", "significant_digits": 12},
    "logging": {
        "level": "INFO",
        "format": "{time:YYYY-MM-DD HH:mm:ss} - {name} - {level} - {message}",
        "file": None,
    },
}


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(config_path: Union[str, Path] = "config.yaml") -> dict:
    """
    Load project settings, overlaying config.yaml on the built-in defaults

    Args:
        config_path: Path to config.yaml file

    Returns:
        Settings mapping with every section present
    """
    path = Path(config_path)
    if not path.exists():
        logger.warning(f"⚠️ {path} not found, using default settings")
        return copy.deepcopy(DEFAULT_SETTINGS)

    with open(path, "r", encoding="utf-8") as f:
        loaded = yaml.safe_load(f) or {}
    if not isinstance(loaded, dict):
        raise InvalidParameterError(f"{path} must hold a mapping of sections")

    return _merge(DEFAULT_SETTINGS, loaded)


def configure_logging(settings: dict):
    """Route loguru to stderr (and optionally a file) with the configured level"""
    log_config = settings.get("logging", DEFAULT_SETTINGS["logging"])
    level = str(log_config.get("level", "INFO")).upper()
    fmt = log_config.get("format", DEFAULT_SETTINGS["logging"]["format"])

    logger.remove()
    logger.add(sys.stderr, level=level, format=fmt)
    if log_config.get("file"):
        Path(log_config["file"]).parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_config["file"], level=level, format=fmt, encoding="utf-8")
