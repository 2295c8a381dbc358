"""
Data models shared by every leaklab stage.

Signatures and timing samples flow from the devices into filtering, HNP
instances and bases flow into the reducer, and the experiment models tie the
stages together for the CLI.
"""

import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ==================== ENUMS ====================

class Scheme(str, Enum):
    """Signature scheme run by a device"""
    ECDSA = "ecdsa"
    ECSCHNORR = "ecschnorr"


class LeakModel(str, Enum):
    """Shape of the timing leakage"""
    INTEL_WINDOW = "intel_window"  # steps per all-zero leading window
    ST_LINEAR = "st_linear"  # linear in the leading zero bits
    CONSTANT_TIME = "constant_time"


class Variant(str, Enum):
    """HNP lattice construction"""
    FULL = "full"
    ELIMINATED = "eliminated"


class Algorithm(str, Enum):
    LLL = "lll"
    BKZ = "bkz"


class Backend(str, Enum):
    """Lattice reduction engine"""
    AUTO = "auto"
    NATIVE = "native"
    FPYLLL = "fpylll"


class Strategy(str, Enum):
    """How live samples are narrowed down to the attack pool"""
    THRESHOLD = "threshold"
    FASTEST = "fastest"


class Source(str, Enum):
    """Where samples are collected from"""
    LOCAL = "local"
    REMOTE = "remote"
    # nonces drawn below 2^(bits - lzb) directly; skips collection and filtering
    PLANTED = "planted"


# ==================== SIGNATURES & SAMPLES ====================

class Signature(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: int = Field(ge=1)
    s: int = Field(ge=1)
    msg_hash: int = Field(ge=0, lt=2**256)

    def in_range(self, n: int) -> bool:
        """r and s must be nonzero residues modulo the group order."""
        return self.r < n and self.s < n


class TimedSample(BaseModel):
    """A signature annotated with the device latency in cycles."""
    signature: Signature
    cycles: int = Field(gt=0)
    # Position in the collection run, used for deterministic tie-breaking
    index: int = 0
    # Leading zero bits of the nonce; only known while profiling
    lzb: Optional[int] = None
    # Bias assumed by the filter that selected this sample
    assumed_lzb: Optional[int] = None
    # Nonce exposed by debug devices; never serialized
    nonce: Optional[int] = Field(default=None, exclude=True, repr=False)


class KeyPair(BaseModel):
    curve: str
    d: int = Field(ge=1)
    qx: int
    qy: int


# ==================== LEAKAGE ====================

class LeakProfile(BaseModel):
    """Parametric timing model of a signing device."""
    model: LeakModel
    base_cycles: float = Field(gt=0)
    window_bits: int = Field(default=4, ge=1, le=8)
    per_window_saving: float = Field(default=0.0, ge=0)
    per_bit_saving: float = Field(default=0.0, ge=0)
    noise_sigma: float = Field(default=0.0, ge=0)
    offset: float = 0.0

    def noiseless(self) -> "LeakProfile":
        return self.model_copy(update={"noise_sigma": 0.0})


# ==================== FILTERING ====================

class BiasClass(BaseModel):
    """A timing window believed to select nonces with assumed_lzb zero MSBs."""
    assumed_lzb: int = Field(ge=0)
    lower_cycles: float
    upper_cycles: float

    @model_validator(mode="after")
    def check_window(self) -> "BiasClass":
        if not self.lower_cycles < self.upper_cycles:
            raise ValueError(
                f"lower_cycles ({self.lower_cycles}) must be below upper_cycles ({self.upper_cycles})"
            )
        return self

    def contains(self, cycles: float) -> bool:
        return self.lower_cycles <= cycles <= self.upper_cycles


class ClassStats(BaseModel):
    """Timing statistics of one profiled nonce class."""
    class_index: int
    lzb: int
    count: int
    median: float
    q1: float
    q3: float
    minimum: float
    maximum: float


class ProfileReport(BaseModel):
    model: LeakModel
    window_bits: int
    classes: List[ClassStats] = Field(default_factory=list)
    peak_centers: Dict[int, float] = Field(default_factory=dict)
    recommended: List[BiasClass] = Field(default_factory=list)
    exploitable: bool = False
    monotone: bool = True
    noise_estimate: float = 0.0

    def recommended_for(self, lzb: int) -> Optional[BiasClass]:
        """Return the recommended window for a bias, if profiling produced one."""
        for bias_class in self.recommended:
            if bias_class.assumed_lzb == lzb:
                return bias_class
        return None

    def get_summary_view(self) -> str:
        if not self.classes:
            return "No profiled classes."
        lines = [f"Profile ({self.model.value}, w={self.window_bits})"]
        for stats in self.classes:
            lines.append(
                f"  class {stats.class_index} (lzb {stats.lzb}): n={stats.count}, "
                f"median={stats.median:.4g}, IQR=[{stats.q1:.4g}, {stats.q3:.4g}]"
            )
        if not self.exploitable:
            lines.append("  no exploitable separation")
        for bias_class in self.recommended:
            lines.append(
                f"  window lzb>={bias_class.assumed_lzb}: "
                f"[{bias_class.lower_cycles:.6g}, {bias_class.upper_cycles:.6g}]"
            )
        return "\n".join(lines)


# ==================== LATTICES ====================

class HnpInstance(BaseModel):
    """
    Linear relations k_i + A_i * x + B_i = 0 mod n with small unknowns.

    For the full variant x is the private key and there is one relation per
    sample. For the eliminated variant x is the pivot nonce k_0 and there is one
    relation per non-pivot sample. With recentering every nonce unknown is
    shifted by `shift` = K // 2.
    """
    modulus: int = Field(gt=1)
    a: List[int]
    b: List[int]
    bound: int = Field(gt=0)
    shift: int = 0
    recentered: bool = False
    variant: Variant
    scheme: Scheme
    lzb: int = Field(ge=0)
    sample_ids: List[int] = Field(default_factory=list)
    # Pivot signature, needed to turn k_0 back into the key
    pivot_r: Optional[int] = None
    pivot_s: Optional[int] = None
    pivot_h: Optional[int] = None

    @model_validator(mode="after")
    def check_coefficients(self) -> "HnpInstance":
        if len(self.a) != len(self.b):
            raise ValueError("A and B must have the same length")
        for value in self.a + self.b:
            if not 0 <= value < self.modulus:
                raise ValueError("coefficients must lie in [0, n)")
        if self.bound != self.modulus >> self.lzb:
            raise ValueError("bound must equal floor(n / 2^lzb)")
        if self.variant == Variant.ELIMINATED and self.pivot_r is None:
            raise ValueError("eliminated instances need the pivot signature")
        return self

    @property
    def relations(self) -> int:
        return len(self.a)

    @property
    def samples(self) -> int:
        return self.relations + (1 if self.variant == Variant.ELIMINATED else 0)


class LatticeBasis(BaseModel):
    """
    Integer basis plus what is needed to read the planted vector back.

    The planted vector has its relation coordinates first, then the unknown x
    multiplied by `key_weight` in `key_column`, then `embedding` in the last
    coordinate. `scale` is the factor every row was multiplied by.
    """
    rows: List[List[int]]
    scale: int = 1
    key_column: int
    key_weight: int
    embedding: int
    variant: Variant

    @field_validator("rows")
    @classmethod
    def check_square(cls, rows: List[List[int]]) -> List[List[int]]:
        if not rows or any(len(row) != len(rows) for row in rows):
            raise ValueError("basis must be a non-empty square matrix")
        return rows

    @property
    def dimension(self) -> int:
        return len(self.rows)


class ReductionParams(BaseModel):
    algorithm: Algorithm = Algorithm.BKZ
    lll_delta: float = Field(default=0.99, gt=0.25, lt=1.0)
    bkz_block: int = Field(default=30, ge=2)
    max_rounds: int = Field(default=8, ge=1)
    # Seconds; None means unbounded
    time_budget: Optional[float] = Field(default=None, gt=0)
    backend: Backend = Backend.AUTO


class ReducedBasis(BaseModel):
    rows: List[List[int]]
    partial: bool = False
    backend: Backend
    tours: int = 0
    seconds: float = 0.0


class KeyCandidate(BaseModel):
    d: int
    row_index: int
    verified: bool = False


# ==================== EXPERIMENTS ====================

class AttackConfig(BaseModel):
    """Everything needed to replay one key recovery experiment."""
    scheme: Scheme = Scheme.ECDSA
    profile: LeakProfile
    strategy: Strategy = Strategy.THRESHOLD
    assumed_lzb: int = Field(default=8, ge=1)
    # Explicit thresholds; when None they come from a profiling phase
    bias_class: Optional[BiasClass] = None
    # Pool size for the fastest strategy; defaults to lattice_dim
    fastest_count: Optional[int] = Field(default=None, ge=2)
    samples_total: int = Field(default=40000, ge=0)
    profile_samples: int = Field(default=20000, ge=0)
    lattice_dim: int = Field(default=35, ge=2)
    variant: Variant = Variant.ELIMINATED
    recenter: bool = True
    reduction: ReductionParams = Field(default_factory=ReductionParams)
    retries: int = Field(default=10, ge=1)
    subset_policy: str = "random"
    seed: int = 0
    key_seed: Optional[int] = None
    source: Source = Source.LOCAL
    target: Optional[str] = None
    freq_hz: float = Field(default=3.6e9, gt=0)
    net_noise_sigma: float = Field(default=0.0, ge=0)
    # Added back to remote timings; must match the server setting
    baseline_cycles: float = Field(default=0.0, ge=0)
    request_timeout: float = Field(default=2.0, gt=0)
    signing_rate_per_minute: Optional[float] = Field(default=None, gt=0)
    # Device setting profiled with a known key; defaults to the target profile
    profiling_profile: Optional[LeakProfile] = None
    # Scale windows to the target setting by the ratio of largest timing peaks
    transfer_thresholds: bool = False
    # Largest peak of the setting an explicit bias_class was measured in
    reference_peak_cycles: Optional[float] = Field(default=None, gt=0)
    peak_bin_width: float = Field(default=1e6, gt=0)

    @field_validator("subset_policy")
    @classmethod
    def check_policy(cls, value: str) -> str:
        if value not in ("random", "fastest_first"):
            raise ValueError("subset_policy must be 'random' or 'fastest_first'")
        return value

    @model_validator(mode="after")
    def check_source(self) -> "AttackConfig":
        if self.source == Source.REMOTE and not self.target:
            raise ValueError("remote collection needs a target host:port")
        if self.fastest_count is not None and self.fastest_count < self.lattice_dim:
            raise ValueError("fastest_count must be at least lattice_dim")
        if self.transfer_thresholds and self.bias_class is not None and self.reference_peak_cycles is None:
            raise ValueError("transferring an explicit bias_class needs reference_peak_cycles")
        return self


class RetryRecord(BaseModel):
    attempt: int
    sample_ids: List[int]
    candidates: int = 0
    success: bool = False
    seconds: float = 0.0
    error: Optional[str] = None


class ExperimentResult(BaseModel):
    success: bool
    recovered_key: Optional[int] = None
    signatures_consumed: int = 0
    filtered_count: int = 0
    lattice_dim: int = 0
    assumed_lzb: int = 0
    strategy: Strategy = Strategy.THRESHOLD
    stage_seconds: Dict[str, float] = Field(default_factory=dict)
    retries: List[RetryRecord] = Field(default_factory=list)
    failure_reason: Optional[str] = None
    seed: int = 0

    def comparable(self) -> Dict[str, object]:
        """Dump without wall-clock fields, for reproducibility checks."""
        data = self.model_dump(exclude={"stage_seconds"})
        for record in data["retries"]:
            record.pop("seconds", None)
        return data


class SuccessRow(BaseModel):
    dim: int
    trials: int
    successes: int

    @property
    def probability(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


class HistogramBin(BaseModel):
    center: float
    count: int


class BudgetReport(BaseModel):
    lzb: int
    lattice_dim: int
    filter_yield: float
    total_signatures: int
    rate_per_minute: Optional[float] = None

    @property
    def class_probability(self) -> float:
        return 2.0 ** -self.lzb

    @property
    def minutes(self) -> Optional[float]:
        if not self.rate_per_minute:
            return None
        return self.total_signatures / self.rate_per_minute

    def get_summary_view(self) -> str:
        text = (
            f"{self.total_signatures:,} signatures for t={self.lattice_dim} "
            f"at {self.lzb}-bit bias (yield {self.filter_yield:.4g})"
        )
        if self.minutes is not None and math.isfinite(self.minutes):
            text += f", about {self.minutes:.1f} minutes at {self.rate_per_minute:g}/min"
        return text
