"""
Configuration: .env defaults and YAML experiment files.

Values set in the YAML file win over LEAKLAB_* environment variables, which
win over the model defaults.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from leaklab.device.profiles import get_profile
from leaklab.errors import ConfigError
from leaklab.schemas import AttackConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_OUTPUT_DIR = "runs"


def load_env(env_path: Optional[PathLike] = None) -> bool:
    """Load a .env file from the working directory unless told otherwise."""
    env_path = Path(env_path) if env_path else Path('.') / '.env'
    return load_dotenv(dotenv_path=env_path)


def env_defaults() -> Dict[str, Any]:
    """AttackConfig fields taken from LEAKLAB_* variables."""
    defaults: Dict[str, Any] = {}
    try:
        if os.getenv("LEAKLAB_SEED"):
            defaults["seed"] = int(os.environ["LEAKLAB_SEED"])
        if os.getenv("LEAKLAB_FREQ_HZ"):
            defaults["freq_hz"] = float(os.environ["LEAKLAB_FREQ_HZ"])
    except ValueError as e:
        raise ConfigError(f"Invalid LEAKLAB_* value: {e}") from e
    if os.getenv("LEAKLAB_REDUCTION_BACKEND"):
        defaults["reduction"] = {"backend": os.environ["LEAKLAB_REDUCTION_BACKEND"]}
    return defaults


def output_dir(explicit: Optional[PathLike] = None) -> Path:
    return Path(explicit or os.getenv("LEAKLAB_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR)


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_attack_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> AttackConfig:
    """Validate a raw mapping; `profile` may be a preset name, a file path or a mapping."""
    data = _merge(env_defaults(), data)
    if overrides:
        data = _merge(data, {k: v for k, v in overrides.items() if v is not None})
    profile = data.get("profile")
    if profile is None:
        raise ConfigError("Experiment config needs a 'profile' (preset name, file or mapping)")
    for key in ("profile", "profiling_profile"):
        if isinstance(data.get(key), str):
            data[key] = get_profile(data[key])
    try:
        return AttackConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {e}") from e


def load_attack_config(path: PathLike, overrides: Optional[Dict[str, Any]] = None) -> AttackConfig:
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    config = build_attack_config(data, overrides)
    logger.info(f"Loaded experiment config from {path}")
    return config


def save_attack_config(config: AttackConfig, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(config.model_dump(mode="json"), f, sort_keys=False)
