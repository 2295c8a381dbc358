"""
Simulated signing devices.

A device holds a private key, a leak profile and its own generator. Every call
draws a fresh uniform nonce, signs a random digest and reports the latency the
profile assigns to that nonce.
"""

import logging
from typing import List, Optional

import numpy as np

from leaklab.device.leakage import leading_zero_bits, simulate_timing
from leaklab.ec.curves import CurveParams, CurvePoint, p256
from leaklab.ec.signing import public_key, random_scalar, sign
from leaklab.errors import DegenerateNonceError
from leaklab.schemas import LeakProfile, Scheme, TimedSample

logger = logging.getLogger(__name__)


class SimulatedDevice:
    """
    Single-threaded signing device with a timing side channel.

    With debug set, samples expose the nonce and its leading zero bits, which
    is what a profiling run with a known key would recover.
    """

    def __init__(
        self,
        scheme: Scheme,
        profile: LeakProfile,
        d: int,
        curve: Optional[CurveParams] = None,
        seed: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        debug: bool = False,
    ):
        self.curve = curve or p256()
        if not 1 <= d < self.curve.n:
            raise ValueError("private key must lie in [1, n)")
        self.scheme = scheme
        self.profile = profile
        self.d = d
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.debug = debug
        self.public_key: CurvePoint = public_key(self.curve, d)
        self._counter = 0

    def random_digest(self) -> int:
        return int.from_bytes(self.rng.bytes(32), "big")

    def sign(self, msg_hash: Optional[int] = None, nonce: Optional[int] = None) -> TimedSample:
        """Sign one digest; a fixed nonce may be injected for tests."""
        if msg_hash is None:
            msg_hash = self.random_digest()
        while True:
            k = nonce if nonce is not None else random_scalar(self.rng, self.curve.n)
            try:
                signature = sign(self.curve, self.scheme, self.d, msg_hash, k)
                break
            except DegenerateNonceError:
                if nonce is not None:
                    raise
                logger.debug("Degenerate nonce drawn, retrying")
        cycles = simulate_timing(k, self.profile, self.rng, bits=self.curve.bit_length)
        sample = TimedSample(
            signature=signature,
            cycles=cycles,
            index=self._counter,
            lzb=leading_zero_bits(k, self.curve.bit_length) if self.debug else None,
            nonce=k if self.debug else None,
        )
        self._counter += 1
        return sample

    def collect(self, count: int) -> List[TimedSample]:
        if count < 0:
            raise ValueError("count must be >= 0")
        samples = [self.sign() for _ in range(count)]
        if count:
            logger.info(f"Collected {count} samples from simulated {self.scheme.value} device")
        return samples

    def collect_biased(self, count: int, lzb: int) -> List[TimedSample]:
        """
        Samples whose nonces have at least lzb leading zero bits.

        Equivalent in distribution to a perfect filter over a long uniform run,
        without paying for the discarded signatures.
        """
        bits = self.curve.bit_length
        bound = min(self.curve.n, 1 << (bits - lzb))
        if bound < 2:
            raise ValueError(f"no nonce has {lzb} leading zero bits")
        samples: List[TimedSample] = []
        while len(samples) < count:
            try:
                samples.append(self.sign(nonce=random_scalar(self.rng, bound)))
            except DegenerateNonceError:
                continue
        return samples
