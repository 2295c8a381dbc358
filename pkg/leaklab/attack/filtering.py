"""
Profiling and filtering of timed signatures.

Profiling groups samples with known nonces by the quantity the device leaks
and derives one timing window per class. Filtering keeps the live samples that
fall inside a window and tags them with the bias they are assumed to carry.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks
from scipy.stats import median_abs_deviation

from leaklab.device.leakage import SCALAR_BITS, class_lzb, leading_zero_bits, window_count
from leaklab.errors import InsufficientSamplesError
from leaklab.schemas import (
    BiasClass,
    ClassStats,
    LeakModel,
    LeakProfile,
    ProfileReport,
    TimedSample,
)

logger = logging.getLogger(__name__)

MIN_CLASS_SAMPLES = 30
SEPARATION_SIGMAS = 4.0
# Standard error of a sample median relative to that of a mean, for Gaussian data
MEDIAN_SE_FACTOR = math.sqrt(math.pi / 2)


def zero_windows_from_lzb(lzb: int, window_bits: int, bits: int = SCALAR_BITS) -> int:
    windows = window_count(window_bits, bits)
    top_width = bits - (windows - 1) * window_bits
    if lzb >= bits:
        return windows
    if lzb < top_width:
        return 0
    return 1 + (lzb - top_width) // window_bits


def sample_class(sample: TimedSample, profile: LeakProfile, bits: int = SCALAR_BITS) -> int:
    """Leak class of a profiling sample: zero leading windows or leading zero bits."""
    if sample.nonce is not None:
        lzb = leading_zero_bits(sample.nonce, bits)
    elif sample.lzb is not None:
        lzb = sample.lzb
    else:
        raise ValueError(f"sample {sample.index} carries no nonce information for profiling")
    if profile.model == LeakModel.INTEL_WINDOW:
        return zero_windows_from_lzb(lzb, profile.window_bits, bits)
    return lzb


def group_by_class(
    samples: Sequence[TimedSample], profile: LeakProfile, bits: int = SCALAR_BITS
) -> Dict[int, np.ndarray]:
    groups: Dict[int, List[int]] = {}
    for sample in samples:
        groups.setdefault(sample_class(sample, profile, bits), []).append(sample.cycles)
    return {key: np.asarray(values, dtype=float) for key, values in sorted(groups.items())}


def profile(
    samples: Sequence[TimedSample],
    leak_profile: LeakProfile,
    required: Sequence[int] = (0, 1),
    fast_side_only: bool = False,
    min_class_samples: int = MIN_CLASS_SAMPLES,
    bits: int = SCALAR_BITS,
) -> ProfileReport:
    """
    Build per-class statistics and recommended windows from samples with known nonces.

    Classes listed in `required` must each hold at least `min_class_samples`
    samples. Other classes below that count are reported but get no window.
    A window spans from the midpoint with the next faster class to the
    midpoint with the next slower one; without a faster neighbour the lower
    edge sits half a gap below the class center. With fast_side_only the upper
    edge is the class center itself.
    """
    groups = group_by_class(samples, leak_profile, bits)
    for key in required:
        count = len(groups.get(key, ()))
        if count < min_class_samples:
            raise InsufficientSamplesError(
                f"class {key} has {count} samples, profiling needs at least {min_class_samples}"
            )

    stats = []
    for key, cycles in groups.items():
        q1, median, q3 = np.percentile(cycles, [25, 50, 75])
        stats.append(ClassStats(
            class_index=key,
            lzb=class_lzb(key, leak_profile),
            count=len(cycles),
            median=float(median),
            q1=float(q1),
            q3=float(q3),
            minimum=float(cycles.min()),
            maximum=float(cycles.max()),
        ))

    reliable = [s for s in stats if s.count >= min_class_samples]
    centers = {s.class_index: s.median for s in reliable}
    sigma = float(np.median([
        median_abs_deviation(groups[s.class_index], scale="normal") for s in reliable
    ])) if reliable else 0.0

    exploitable = False
    if reliable:
        base = reliable[0]
        for other in reliable[1:]:
            gap = base.median - other.median
            if sigma == 0:
                separated = gap > 0
            else:
                se = MEDIAN_SE_FACTOR * sigma * math.sqrt(1 / base.count + 1 / other.count)
                separated = gap > SEPARATION_SIGMAS * se
            exploitable = exploitable or separated

    medians = [s.median for s in reliable]
    monotone = all(a >= b for a, b in zip(medians, medians[1:]))

    recommended: List[BiasClass] = []
    if exploitable:
        for i in range(1, len(reliable)):
            center = reliable[i].median
            slower = reliable[i - 1].median
            if slower <= center:
                continue
            gap = slower - center
            upper = center if fast_side_only else (center + slower) / 2
            if i + 1 < len(reliable) and reliable[i + 1].median < center:
                lower = (center + reliable[i + 1].median) / 2
            else:
                lower = center - gap / 2
            if fast_side_only and upper <= lower:
                continue
            recommended.append(BiasClass(
                assumed_lzb=reliable[i].lzb,
                lower_cycles=lower,
                upper_cycles=upper,
            ))
    else:
        logger.warning("Profiling found no exploitable timing separation between classes")

    report = ProfileReport(
        model=leak_profile.model,
        window_bits=leak_profile.window_bits,
        classes=stats,
        peak_centers=centers,
        recommended=recommended,
        exploitable=exploitable,
        monotone=monotone,
        noise_estimate=sigma,
    )
    logger.info(
        f"Profiled {len(samples)} samples into {len(stats)} classes "
        f"({len(recommended)} windows, exploitable={exploitable})"
    )
    return report


def classify(samples: Sequence[TimedSample], bias_class: BiasClass) -> List[TimedSample]:
    """Samples inside the window, in input order, tagged with the assumed bias."""
    kept = [
        sample.model_copy(update={"assumed_lzb": bias_class.assumed_lzb})
        for sample in samples
        if bias_class.contains(sample.cycles)
    ]
    logger.info(
        f"Kept {len(kept)}/{len(samples)} samples in "
        f"[{bias_class.lower_cycles:.6g}, {bias_class.upper_cycles:.6g}]"
    )
    return kept


def sort_fastest(
    samples: Sequence[TimedSample], m: int, assumed_lzb: Optional[int] = None
) -> List[TimedSample]:
    """The m fastest samples; equal timings are ordered by collection index."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if m > len(samples):
        raise InsufficientSamplesError(f"asked for the {m} fastest of {len(samples)} samples")
    fastest = sorted(samples, key=lambda sample: (sample.cycles, sample.index))[:m]
    if assumed_lzb is not None:
        fastest = [s.model_copy(update={"assumed_lzb": assumed_lzb}) for s in fastest]
    return fastest


def filter_yield(filtered: int, total: int, lzb: int) -> float:
    """Fraction of the expected lzb-biased samples that survived filtering."""
    expected = total * 2.0 ** -lzb
    if expected <= 0:
        raise ValueError("total must be positive")
    return filtered / expected


# ==================== HISTOGRAMS ====================

def histogram(values: Sequence[float], bin_width: float) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed-width bins starting at min(values); returns (centers, counts)."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise InsufficientSamplesError("cannot build a histogram of no samples")
    low, high = float(data.min()), float(data.max())
    nbins = int(math.floor((high - low) / bin_width)) + 1
    edges = low + bin_width * np.arange(nbins + 1)
    counts, _ = np.histogram(data, bins=edges)
    return edges[:-1] + bin_width / 2, counts


def find_histogram_peaks(
    centers: np.ndarray,
    counts: np.ndarray,
    min_separation: float = 0.0,
    min_prominence: float = 5.0,
) -> List[float]:
    """Peak centers ordered by decreasing prominence."""
    bin_width = float(centers[1] - centers[0]) if len(centers) > 1 else 1.0
    distance = max(1, int(min_separation / bin_width)) if min_separation > 0 else None
    # pad so a peak in the first or last bin is still a local maximum
    padded = np.concatenate(([0], counts, [0]))
    peaks, properties = find_peaks(padded, prominence=min_prominence, distance=distance)
    order = np.argsort(-properties["prominences"], kind="stable")
    return [float(centers[peaks[i] - 1]) for i in order]


def largest_peak(values: Sequence[float], bin_width: float) -> float:
    """Center of the most populated bin."""
    centers, counts = histogram(values, bin_width)
    return float(centers[int(np.argmax(counts))])


def rescale_bias_class(bias_class: BiasClass, ratio: float = 1.0, shift: float = 0.0) -> BiasClass:
    """Move a window to another setting: scale by the ratio of largest peaks, then shift."""
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    return BiasClass(
        assumed_lzb=bias_class.assumed_lzb,
        lower_cycles=bias_class.lower_cycles * ratio + shift,
        upper_cycles=bias_class.upper_cycles * ratio + shift,
    )


def transfer_bias_class(
    bias_class: BiasClass, reference_peak: float, target_peak: float
) -> BiasClass:
    """Scale a window profiled around reference_peak to a setting peaking at target_peak."""
    return rescale_bias_class(bias_class, ratio=target_peak / reference_peak)
