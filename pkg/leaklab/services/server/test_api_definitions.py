# test_api_definitions.py
import struct

import pytest

from leaklab.errors import WireFormatError
from leaklab.services.server.api_definitions import (
    MAGIC,
    REQUEST_SIZE,
    RESPONSE_SIZE,
    SignRequest,
    SignResponse,
)


def test_datagram_sizes():
    assert REQUEST_SIZE == 44
    assert RESPONSE_SIZE == 76


def test_request_layout_is_big_endian():
    data = SignRequest(request_id=0x0102030405060708, msg_hash=0xAB).pack()
    assert data[:4] == b"TPMF" == MAGIC
    assert data[4:12] == bytes(range(1, 9))
    assert data[12:] == b"\x00" * 31 + b"\xab"
    assert SignRequest.unpack(data) == SignRequest(request_id=0x0102030405060708, msg_hash=0xAB)


def test_response_layout():
    response = SignResponse(request_id=7, r=1, s=2**256 - 1)
    data = response.pack()
    assert len(data) == 76
    assert struct.unpack("!Q", data[4:12]) == (7,)
    assert data[12:44] == b"\x00" * 31 + b"\x01"
    assert data[44:] == b"\xff" * 32
    assert SignResponse.unpack(data) == response


def test_malformed_datagrams_rejected():
    good = SignRequest(request_id=1, msg_hash=2).pack()
    with pytest.raises(WireFormatError):
        SignRequest.unpack(good[:43])
    with pytest.raises(WireFormatError):
        SignRequest.unpack(good + b"\x00")
    with pytest.raises(WireFormatError):
        SignRequest.unpack(b"XXXX" + good[4:])
    with pytest.raises(WireFormatError):
        SignResponse.unpack(good)
