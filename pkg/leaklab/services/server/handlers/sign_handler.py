"""
Handler for signing requests.

Turns a request datagram into a response datagram and the latency the server
must wait before sending it.
"""

import logging
from typing import Optional, Tuple

from leaklab.device.simulated import SimulatedDevice
from leaklab.errors import WireFormatError
from leaklab.schemas import TimedSample

from ..api_definitions import ServerSettings, SignRequest, SignResponse

logger = logging.getLogger(__name__)


class SignHandler:
    """Signs one request at a time on a simulated device."""

    def __init__(self, device: SimulatedDevice, settings: ServerSettings):
        self.device = device
        self.settings = settings
        self.served = 0
        self.dropped = 0
        self.last_sample: Optional[TimedSample] = None

    def latency_seconds(self, cycles: int) -> float:
        return max(0.0, (cycles - self.settings.baseline_cycles) / self.settings.freq_hz)

    def handle_datagram(self, data: bytes) -> Optional[Tuple[SignResponse, float]]:
        """Return (response, latency in seconds), or None for a dropped datagram."""
        try:
            request = SignRequest.unpack(data)
        except WireFormatError as e:
            self.dropped += 1
            logger.warning(f"Dropping datagram: {e}")
            return None

        sample = self.device.sign(msg_hash=request.msg_hash)
        self.served += 1
        self.last_sample = sample
        response = SignResponse(
            request_id=request.request_id,
            r=sample.signature.r,
            s=sample.signature.s,
        )
        latency = self.latency_seconds(sample.cycles)
        logger.debug(f"Request {request.request_id}: {sample.cycles} cycles, sleeping {latency:.6f}s")
        return response, latency
