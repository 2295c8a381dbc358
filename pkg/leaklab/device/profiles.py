"""
Named leak profiles and the key = value profile file format.

Cycle counts are decimal. A profile file looks like:

    model = intel_window
    base_cycles = 482000000
    window_bits = 4
    per_window_saving = 4000000
    noise_sigma = 500000
    offset = 0
"""

import logging
from pathlib import Path
from typing import Dict, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from leaklab.errors import ConfigError
from leaklab.schemas import LeakModel, LeakProfile

logger = logging.getLogger(__name__)

INTEL_BASE_CYCLES = 4.82e8
INTEL_WINDOW_SAVING = 4.0e6
USER_LEVEL_OFFSET = 1.5e7

PRESETS: Dict[str, LeakProfile] = {
    # Kernel-level timing of a 4-bit window implementation
    "intel-system": LeakProfile(
        model=LeakModel.INTEL_WINDOW,
        base_cycles=INTEL_BASE_CYCLES,
        window_bits=4,
        per_window_saving=INTEL_WINDOW_SAVING,
        noise_sigma=5e5,
    ),
    # Same device timed from user space: shifted and much noisier
    "intel-user": LeakProfile(
        model=LeakModel.INTEL_WINDOW,
        base_cycles=INTEL_BASE_CYCLES,
        window_bits=4,
        per_window_saving=INTEL_WINDOW_SAVING,
        noise_sigma=3e6,
        offset=USER_LEVEL_OFFSET,
    ),
    "st-system": LeakProfile(
        model=LeakModel.ST_LINEAR,
        base_cycles=8.7e7,
        per_bit_saving=2e5,
        noise_sigma=1e5,
    ),
    "constant-time": LeakProfile(
        model=LeakModel.CONSTANT_TIME,
        base_cycles=INTEL_BASE_CYCLES,
        noise_sigma=5e5,
    ),
}

PROFILE_FIELDS = (
    "model",
    "base_cycles",
    "window_bits",
    "per_window_saving",
    "per_bit_saving",
    "noise_sigma",
    "offset",
)


def load_profile(path: Union[str, Path]) -> LeakProfile:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Profile file not found: {path}")
    values = {key: value for key, value in dotenv_values(path).items() if value is not None}
    unknown = set(values) - set(PROFILE_FIELDS)
    if unknown:
        raise ConfigError(f"Unknown profile keys in {path}: {', '.join(sorted(unknown))}")
    try:
        return LeakProfile.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"Invalid profile {path}: {e}") from e


def save_profile(profile: LeakProfile, path: Union[str, Path]) -> None:
    data = profile.model_dump(mode="json")
    lines = []
    for key in PROFILE_FIELDS:
        value = data[key]
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")
    logger.info(f"Saved leak profile to {path}")


def get_profile(name_or_path: str) -> LeakProfile:
    """Resolve a preset name or a profile file path."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    if Path(name_or_path).exists():
        return load_profile(name_or_path)
    raise ConfigError(
        f"Unknown profile '{name_or_path}'. Presets: {', '.join(PRESETS)} (or a file path)"
    )
