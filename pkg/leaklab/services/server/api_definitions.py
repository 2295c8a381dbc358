"""
Wire format of the UDP signing service.

All integers are big-endian. A request is 44 bytes:

    magic "TPMF" (4) | request_id (8) | msg_hash (32)

and a response is 76 bytes:

    magic "TPMF" (4) | request_id (8) | r (32) | s (32)

Anything else is dropped by both ends.
"""

import struct
from typing import Optional

from pydantic import BaseModel, Field

from leaklab.errors import WireFormatError
from leaklab.schemas import LeakProfile, Scheme

MAGIC = b"TPMF"
REQUEST_FORMAT = "!4sQ32s"
RESPONSE_FORMAT = "!4sQ32s32s"
REQUEST_SIZE = struct.calcsize(REQUEST_FORMAT)
RESPONSE_SIZE = struct.calcsize(RESPONSE_FORMAT)

MAX_REQUEST_ID = 2**64 - 1
FIELD_LIMIT = 2**256


# ==================== DATAGRAMS ====================

class SignRequest(BaseModel):
    """Request for one signature over a 32-byte digest"""
    request_id: int = Field(ge=0, le=MAX_REQUEST_ID)
    msg_hash: int = Field(ge=0, lt=FIELD_LIMIT)

    def pack(self) -> bytes:
        return struct.pack(REQUEST_FORMAT, MAGIC, self.request_id, self.msg_hash.to_bytes(32, "big"))

    @classmethod
    def unpack(cls, data: bytes) -> "SignRequest":
        if len(data) != REQUEST_SIZE:
            raise WireFormatError(f"request must be {REQUEST_SIZE} bytes, got {len(data)}")
        magic, request_id, digest = struct.unpack(REQUEST_FORMAT, data)
        if magic != MAGIC:
            raise WireFormatError(f"bad magic {magic!r}")
        return cls(request_id=request_id, msg_hash=int.from_bytes(digest, "big"))


class SignResponse(BaseModel):
    """Signature answering the request with the same id"""
    request_id: int = Field(ge=0, le=MAX_REQUEST_ID)
    r: int = Field(ge=0, lt=FIELD_LIMIT)
    s: int = Field(ge=0, lt=FIELD_LIMIT)

    def pack(self) -> bytes:
        return struct.pack(
            RESPONSE_FORMAT,
            MAGIC,
            self.request_id,
            self.r.to_bytes(32, "big"),
            self.s.to_bytes(32, "big"),
        )

    @classmethod
    def unpack(cls, data: bytes) -> "SignResponse":
        if len(data) != RESPONSE_SIZE:
            raise WireFormatError(f"response must be {RESPONSE_SIZE} bytes, got {len(data)}")
        magic, request_id, r, s = struct.unpack(RESPONSE_FORMAT, data)
        if magic != MAGIC:
            raise WireFormatError(f"bad magic {magic!r}")
        return cls(request_id=request_id, r=int.from_bytes(r, "big"), s=int.from_bytes(s, "big"))


# ==================== SERVER SETTINGS ====================

class ServerSettings(BaseModel):
    """Configuration of one signing server"""
    host: str = "127.0.0.1"
    port: int = Field(default=9000, ge=0, le=65535)
    scheme: Scheme = Scheme.ECDSA
    curve: str = "P-256"
    profile: LeakProfile
    freq_hz: float = Field(default=3.6e9, gt=0)
    # Subtracted from every simulated latency; the client adds it back
    baseline_cycles: float = Field(default=0.0, ge=0)
    seed: Optional[int] = None
    log_requests: bool = False
    log_file: str = "request_log.jsonl"
    public_key_file: Optional[str] = None
