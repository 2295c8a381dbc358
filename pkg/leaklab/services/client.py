"""
Timing client for the UDP signing service.

Requests are sent one at a time. The round-trip time of each answered request
is converted to cycles at the configured frequency, so thresholds profiled in
cycles apply unchanged to remote samples.
"""

import logging
import socket
import time
from typing import List, Optional, Tuple

import numpy as np

from leaklab.ec.curves import CurveParams, CurvePoint, p256
from leaklab.ec.signing import verify
from leaklab.errors import CollectionTimeoutError, WireFormatError
from leaklab.schemas import Scheme, Signature, TimedSample
from leaklab.services.server.api_definitions import (
    RESPONSE_SIZE,
    SignRequest,
    SignResponse,
)

logger = logging.getLogger(__name__)


def parse_target(target: str) -> Tuple[str, int]:
    host, _, port = target.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"target must look like host:port, got '{target}'")
    return host, int(port)


class TimingClient:
    """
    Closed-loop collector: one outstanding request at a time.

    A request that times out is resent under a fresh request id and only the
    answered attempt is timed. Responses carrying any other id are discarded.
    Signatures that do not verify are requested again; only an unbroken run
    of timeouts or of bad signatures ends the collection.
    """

    def __init__(
        self,
        host: str,
        port: int,
        freq_hz: float = 3.6e9,
        timeout: float = 2.0,
        max_consecutive_timeouts: int = 5,
        max_consecutive_rejects: int = 50,
        baseline_cycles: float = 0.0,
        noise_sigma: float = 0.0,
        seed: Optional[int] = None,
        public_key: Optional[CurvePoint] = None,
        scheme: Scheme = Scheme.ECDSA,
        curve: Optional[CurveParams] = None,
    ):
        if max_consecutive_timeouts < 1:
            raise ValueError("max_consecutive_timeouts must be >= 1")
        if max_consecutive_rejects < 1:
            raise ValueError("max_consecutive_rejects must be >= 1")
        self.address = (host, port)
        self.freq_hz = freq_hz
        self.timeout = timeout
        self.max_consecutive_timeouts = max_consecutive_timeouts
        self.max_consecutive_rejects = max_consecutive_rejects
        self.baseline_cycles = baseline_cycles
        self.noise_sigma = noise_sigma
        self.rng = np.random.default_rng(seed)
        self.public_key = public_key
        self.scheme = scheme
        self.curve = curve or p256()
        self._next_id = int(self.rng.integers(0, 2**32))
        self.retried = 0
        self.rejected = 0

    def _fresh_id(self) -> int:
        request_id = self._next_id
        self._next_id = (self._next_id + 1) % 2**64
        return request_id

    def _await_response(self, sock: socket.socket, request_id: int, deadline: float) -> Optional[SignResponse]:
        while True:
            remaining = deadline - time.perf_counter()
            if remaining <= 0:
                return None
            sock.settimeout(remaining)
            try:
                data, _ = sock.recvfrom(RESPONSE_SIZE + 1)
            except socket.timeout:
                return None
            try:
                response = SignResponse.unpack(data)
            except WireFormatError as e:
                logger.warning(f"Ignoring malformed response: {e}")
                continue
            if response.request_id != request_id:
                logger.debug(f"Discarding stale response {response.request_id}")
                continue
            return response

    def to_cycles(self, rtt_seconds: float) -> int:
        cycles = rtt_seconds * self.freq_hz + self.baseline_cycles
        if self.noise_sigma > 0:
            cycles += self.rng.normal(0.0, self.noise_sigma)
        return max(1, int(round(cycles)))

    def request(self, sock: socket.socket, msg_hash: int, index: int) -> TimedSample:
        """Obtain one timed signature, resending on timeouts and on replies that do not verify."""
        timeouts = 0
        rejects = 0
        while True:
            request_id = self._fresh_id()
            payload = SignRequest(request_id=request_id, msg_hash=msg_hash).pack()
            sent = time.perf_counter()
            sock.sendto(payload, self.address)
            response = self._await_response(sock, request_id, sent + self.timeout)
            rtt = time.perf_counter() - sent
            if response is None:
                timeouts += 1
                self.retried += 1
                logger.warning(f"Request {request_id} timed out ({timeouts} in a row)")
                if timeouts >= self.max_consecutive_timeouts:
                    raise CollectionTimeoutError(
                        f"{timeouts} consecutive timeouts from {self.address[0]}:{self.address[1]}"
                    )
                continue

            n = self.curve.n
            valid = 0 < response.r < n and 0 < response.s < n
            signature = Signature(r=max(response.r, 1), s=max(response.s, 1), msg_hash=msg_hash)
            if self.public_key is not None and valid:
                valid = verify(self.curve, self.scheme, self.public_key, signature)
            if not valid:
                self.rejected += 1
                rejects += 1
                logger.warning(f"Response {request_id} does not verify, requesting again")
                if rejects >= self.max_consecutive_rejects:
                    raise WireFormatError(f"{rejects} consecutive signatures did not verify")
                continue
            return TimedSample(signature=signature, cycles=self.to_cycles(rtt), index=index)

    def collect(self, count: int) -> List[TimedSample]:
        if count < 0:
            raise ValueError("count must be >= 0")
        if count == 0:
            return []
        samples = []
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            for index in range(count):
                msg_hash = int.from_bytes(self.rng.bytes(32), "big")
                samples.append(self.request(sock, msg_hash, index))
                if (index + 1) % 1000 == 0:
                    logger.info(f"Collected {index + 1}/{count} remote samples")
        logger.info(
            f"Collected {count} samples from {self.address[0]}:{self.address[1]} "
            f"({self.retried} retries, {self.rejected} rejected)"
        )
        return samples


def collect_remote(target: str, count: int, **kwargs) -> List[TimedSample]:
    host, port = parse_target(target)
    return TimingClient(host, port, **kwargs).collect(count)
