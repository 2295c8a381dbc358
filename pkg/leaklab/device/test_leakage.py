# test_leakage.py
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leaklab.device.leakage import (
    class_lzb,
    leading_zero_bits,
    noiseless_timing,
    simulate_timing,
    zero_msw_count,
)
from leaklab.device.profiles import PRESETS
from leaklab.schemas import LeakModel, LeakProfile

INTEL = PRESETS["intel-system"].noiseless()
ST = PRESETS["st-system"].noiseless()

k256 = st.integers(min_value=0, max_value=2**256 - 1)


def scan_zero_windows(k, w, bits=256):
    text = format(k, f"0{bits}b")
    count = 0
    for start in range(0, bits, w):
        if set(text[start:start + w]) == {"0"}:
            count += 1
        else:
            break
    return count


def test_zero_msw_examples():
    assert zero_msw_count(1 << 251, 4) == 1
    assert zero_msw_count(1 << 255, 4) == 0
    assert zero_msw_count(0, 4) == 64
    assert zero_msw_count(0, 3) == 86
    with pytest.raises(ValueError):
        zero_msw_count(5, 0)


@given(k256, st.integers(min_value=0, max_value=255), st.sampled_from([1, 2, 4, 8]))
def test_zero_msw_matches_bit_scan(k, shift, w):
    k >>= shift
    assert zero_msw_count(k, w) == scan_zero_windows(k, w)


def test_leading_zero_bits_examples():
    assert leading_zero_bits(2**255) == 0
    assert leading_zero_bits(1) == 255
    assert leading_zero_bits(0) == 256


@given(k256)
def test_leading_zero_bits_matches_scan(k):
    text = format(k, "0256b")
    assert leading_zero_bits(k) == len(text) - len(text.lstrip("0"))


def test_intel_peaks():
    assert simulate_timing(1 << 255, INTEL) == 482_000_000
    assert simulate_timing(1 << 251, INTEL) == 478_000_000
    assert simulate_timing(1 << 247, INTEL) == 474_000_000
    assert simulate_timing(1 << 243, INTEL) == 470_000_000


def test_st_slope():
    assert simulate_timing(1 << 250, ST) - simulate_timing(1 << 249, ST) == 200_000


def test_constant_time_is_flat():
    profile = PRESETS["constant-time"].noiseless()
    timings = {simulate_timing(k, profile) for k in (1, 2**100, 2**255 + 7)}
    assert len(timings) == 1


def test_noise_needs_generator():
    with pytest.raises(ValueError):
        simulate_timing(5, PRESETS["intel-system"])
    rng = np.random.default_rng(0)
    assert simulate_timing(5, PRESETS["intel-system"], rng) > 0


def test_timing_never_below_one_cycle():
    profile = LeakProfile(model=LeakModel.ST_LINEAR, base_cycles=10, per_bit_saving=5)
    assert simulate_timing(1, profile) == 1


@given(k256, k256)
def test_noiseless_timing_is_monotone(a, b):
    for profile in (INTEL, ST):
        if leading_zero_bits(a) >= leading_zero_bits(b):
            assert noiseless_timing(a, profile) <= noiseless_timing(b, profile)


def test_class_lzb():
    assert class_lzb(2, INTEL) == 8
    assert class_lzb(9, ST) == 9


def test_user_level_threshold_yield():
    # 219,000 user-level timings; a conservative fast-side threshold keeps a few
    # dozen samples, most of them with at least 8 zero MSBs
    rng = np.random.default_rng(5)
    profile = PRESETS["intel-user"]
    kept, kept_biased, biased = 0, 0, 0
    for _ in range(219_000):
        k = int.from_bytes(rng.bytes(32), "big")
        cycles = simulate_timing(k, profile, rng)
        lzb = leading_zero_bits(k)
        biased += lzb >= 8
        if cycles <= 4.835e8:
            kept += 1
            kept_biased += lzb >= 8
    assert 700 < biased < 1010
    assert 27 <= kept <= 80
    assert kept_biased / kept > 0.6
