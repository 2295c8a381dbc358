"""
Timing leakage models.

The window model follows a fixed-window multiplier that skips all-zero leading
windows: each skipped window saves one block of doublings. The linear model
saves a fixed number of cycles per leading zero bit.
"""

from typing import Optional

import numpy as np

from leaklab.schemas import LeakModel, LeakProfile

SCALAR_BITS = 256


def window_count(window_bits: int, bits: int = SCALAR_BITS) -> int:
    return -(-bits // window_bits)


def leading_zero_bits(k: int, bits: int = SCALAR_BITS) -> int:
    return bits - k.bit_length()


def zero_msw_count(k: int, window_bits: int, bits: int = SCALAR_BITS) -> int:
    """Number of all-zero w-bit windows at the top of the bits-wide representation of k."""
    if window_bits < 1:
        raise ValueError("window_bits must be >= 1")
    windows = window_count(window_bits, bits)
    if k == 0:
        return windows
    # the top window is narrower when w does not divide bits
    top_width = bits - (windows - 1) * window_bits
    lz = leading_zero_bits(k, bits)
    if lz < top_width:
        return 0
    return 1 + (lz - top_width) // window_bits


def leak_class(k: int, profile: LeakProfile, bits: int = SCALAR_BITS) -> int:
    """The quantity the profile leaks: zero leading windows or leading zero bits."""
    if profile.model == LeakModel.INTEL_WINDOW:
        return zero_msw_count(k, profile.window_bits, bits)
    return leading_zero_bits(k, bits)


def class_lzb(class_index: int, profile: LeakProfile) -> int:
    """Guaranteed leading zero bits of nonces in a leak class."""
    if profile.model == LeakModel.INTEL_WINDOW:
        return class_index * profile.window_bits
    return class_index


def noiseless_timing(k: int, profile: LeakProfile, bits: int = SCALAR_BITS) -> float:
    if profile.model == LeakModel.INTEL_WINDOW:
        saving = zero_msw_count(k, profile.window_bits, bits) * profile.per_window_saving
    elif profile.model == LeakModel.ST_LINEAR:
        saving = leading_zero_bits(k, bits) * profile.per_bit_saving
    else:
        saving = 0.0
    return profile.base_cycles - saving + profile.offset


def simulate_timing(
    k: int,
    profile: LeakProfile,
    rng: Optional[np.random.Generator] = None,
    bits: int = SCALAR_BITS,
) -> int:
    """Cycle count of one signing operation with nonce k; always >= 1."""
    cycles = noiseless_timing(k, profile, bits)
    if profile.noise_sigma > 0:
        if rng is None:
            raise ValueError("a generator is required for noisy profiles")
        cycles += rng.normal(0.0, profile.noise_sigma)
    return max(1, int(round(cycles)))
