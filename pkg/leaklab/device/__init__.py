"""Simulated leaky signing devices and their timing models."""

from leaklab.device.leakage import leading_zero_bits, simulate_timing, zero_msw_count
from leaklab.device.profiles import PRESETS, get_profile, load_profile, save_profile
from leaklab.device.simulated import SimulatedDevice

__all__ = [
    "PRESETS",
    "SimulatedDevice",
    "get_profile",
    "leading_zero_bits",
    "load_profile",
    "save_profile",
    "simulate_timing",
    "zero_msw_count",
]
