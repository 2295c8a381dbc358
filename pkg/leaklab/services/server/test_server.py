# test_server.py
import os
import socket
import threading
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from leaklab.attack.pipeline import run_attack
from leaklab.config import load_attack_config
from leaklab.device.profiles import PRESETS
from leaklab.device.leakage import zero_msw_count
from leaklab.ec.curves import TOY_CURVE, p256
from leaklab.ec.signing import ecdsa_sign, keygen, keypair_point, random_scalar, recover_nonce_ecdsa, verify
from leaklab.errors import CollectionTimeoutError, WireFormatError
from leaklab.schemas import LeakModel, LeakProfile, Scheme
from leaklab.services.client import TimingClient, parse_target
from leaklab.services.server.api_definitions import ServerSettings, SignRequest, SignResponse
from leaklab.services.server.main import create_server
from leaklab.storage import load_public_key

FREQ = 3.6e9
CONFIG_DIR = Path(__file__).resolve().parents[3] / "configs"


@pytest.fixture
def running_server(request, tmp_path):
    """Start a server in a background thread; yields (server, keypair)."""
    settings, keypair = request.param(tmp_path)
    server = create_server(settings, keypair)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, keypair
    server.shutdown()
    server.server_close()


def p256_constant_server(tmp_path):
    # 10 ms per signature, no leakage, no noise
    profile = LeakProfile(model=LeakModel.CONSTANT_TIME, base_cycles=3.6e7)
    settings = ServerSettings(
        port=0,
        profile=profile,
        seed=1,
        log_requests=True,
        log_file=str(tmp_path / "requests.jsonl"),
        public_key_file=str(tmp_path / "server.pub.json"),
    )
    return settings, keygen(p256(), seed=11)


def toy_window_server(tmp_path):
    # Toy-curve nonces have 3 windows; classes are 5 ms apart
    profile = LeakProfile(
        model=LeakModel.INTEL_WINDOW,
        base_cycles=5.4e7,
        window_bits=4,
        per_window_saving=1.8e7,
    )
    settings = ServerSettings(port=0, curve=TOY_CURVE.name, profile=profile, seed=2)
    return settings, keygen(TOY_CURVE, seed=12)


@pytest.mark.parametrize("running_server", [p256_constant_server], indirect=True)
def test_responses_verify_and_respect_latency(running_server, tmp_path):
    server, keypair = running_server
    host, port = server.server_address[:2]
    curve_name, published = load_public_key(tmp_path / "server.pub.json")
    assert curve_name == "P-256"
    assert published == keypair_point(keypair)

    client = TimingClient(host, port, freq_hz=FREQ, public_key=published, seed=3)
    samples = client.collect(15)
    assert len(samples) == 15
    assert client.rejected == 0
    for sample in samples:
        assert verify(p256(), Scheme.ECDSA, published, sample.signature)
        # round trip covers the injected 10 ms
        assert sample.cycles >= 3.6e7
    assert len((tmp_path / "requests.jsonl").read_text().splitlines()) == 15


@pytest.mark.parametrize("running_server", [p256_constant_server], indirect=True)
def test_malformed_datagram_gets_no_answer(running_server):
    server, _ = running_server
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.settimeout(0.3)
        good = SignRequest(request_id=5, msg_hash=9).pack()
        sock.sendto(good[:43], server.server_address)
        with pytest.raises(socket.timeout):
            sock.recvfrom(128)
        # the server is still alive afterwards
        sock.settimeout(2.0)
        sock.sendto(good, server.server_address)
        data, _ = sock.recvfrom(128)
        assert len(data) == 76
    assert server.sign_handler.dropped == 1


@pytest.mark.parametrize("running_server", [toy_window_server], indirect=True)
def test_loopback_preserves_class_order(running_server):
    server, keypair = running_server
    host, port = server.server_address[:2]
    client = TimingClient(host, port, freq_hz=FREQ, curve=TOY_CURVE, seed=4)
    by_class = {}
    for sample in client.collect(120):
        k = recover_nonce_ecdsa(TOY_CURVE, keypair.d, sample.signature)
        by_class.setdefault(zero_msw_count(k, 4, TOY_CURVE.bit_length), []).append(sample.cycles)
    # scheduler jitter can delay single replies, so compare medians of populated classes
    classes = [c for c in sorted(by_class) if len(by_class[c]) >= 5]
    assert len(classes) >= 2
    medians = [float(np.median(by_class[c])) for c in classes]
    assert medians == sorted(medians, reverse=True)
    for slower, faster in zip(classes, classes[1:]):
        late = sum(cycles >= np.median(by_class[slower]) for cycles in by_class[faster])
        assert late <= len(by_class[faster]) // 5


def test_collection_gives_up_on_silent_server():
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as silent:
        silent.bind(("127.0.0.1", 0))
        host, port = silent.getsockname()
        client = TimingClient(host, port, timeout=0.05, max_consecutive_timeouts=3)
        with pytest.raises(CollectionTimeoutError):
            client.collect(1)
        assert client.retried == 3
    assert TimingClient(host, port).collect(0) == []


def test_parse_target():
    assert parse_target("127.0.0.1:9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_target("localhost")


remote_only = pytest.mark.skipif(os.environ.get("LEAKLAB_RUN_REMOTE") != "1", reason="set LEAKLAB_RUN_REMOTE=1")


@remote_only
def test_full_scale_remote_collection(tmp_path):
    # 40,000 signatures at real latencies take well over an hour
    settings = ServerSettings(port=0, profile=PRESETS["intel-system"], seed=5)
    keypair = keygen(p256(), seed=13)
    server = create_server(settings, keypair)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        host, port = server.server_address[:2]
        samples = TimingClient(host, port, seed=6).collect(40_000)
        assert len(samples) == 40_000
    finally:
        server.shutdown()
        server.server_close()


def flaky_signer(sock, keypair, bad_every, stop):
    """Answer every request; each bad_every-th answer carries a signature that does not verify."""
    rng = np.random.default_rng(8)
    answered = 0
    while not stop.is_set():
        try:
            data, address = sock.recvfrom(64)
        except socket.timeout:
            continue
        request = SignRequest.unpack(data)
        answered += 1
        if bad_every and answered % bad_every == 0:
            r, s = 1, 1
        else:
            signature = ecdsa_sign(p256(), keypair.d, request.msg_hash, random_scalar(rng, p256().n))
            r, s = signature.r, signature.s
        sock.sendto(SignResponse(request_id=request.request_id, r=r, s=s).pack(), address)


@pytest.fixture
def flaky_server(request):
    keypair = keygen(p256(), seed=14)
    stop = threading.Event()
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.bind(("127.0.0.1", 0))
        sock.settimeout(0.05)
        thread = threading.Thread(target=flaky_signer, args=(sock, keypair, request.param, stop), daemon=True)
        thread.start()
        yield sock.getsockname(), keypair
        stop.set()
        thread.join()


@pytest.mark.parametrize("flaky_server", [2], indirect=True)
def test_sparse_bad_signatures_do_not_stop_collection(flaky_server):
    (host, port), keypair = flaky_server
    client = TimingClient(host, port, public_key=keypair_point(keypair), max_consecutive_rejects=2, seed=9)
    samples = client.collect(12)
    assert len(samples) == 12
    # far more rejects in total than the consecutive limit
    assert client.rejected >= 10
    assert all(verify(p256(), Scheme.ECDSA, keypair_point(keypair), s.signature) for s in samples)


@pytest.mark.parametrize("flaky_server", [1], indirect=True)
def test_unbroken_bad_signatures_stop_collection(flaky_server):
    (host, port), keypair = flaky_server
    client = TimingClient(host, port, public_key=keypair_point(keypair), max_consecutive_rejects=4, seed=9)
    with pytest.raises(WireFormatError):
        client.collect(3)
    assert client.rejected == 4


@contextmanager
def background_server(settings, keypair):
    server = create_server(settings, keypair)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server.server_address[:2]
    finally:
        server.shutdown()
        server.server_close()


@remote_only
def test_noiseless_latencies_cluster_at_the_device_time():
    # 1000 signatures of about 134 ms each
    settings = ServerSettings(port=0, profile=PRESETS["intel-system"].noiseless(), seed=7)
    with background_server(settings, keygen(p256(), seed=15)) as (host, port):
        samples = TimingClient(host, port, freq_hz=FREQ, seed=8).collect(1000)
    seconds = np.array([s.cycles for s in samples]) / FREQ
    assert 0.130 <= float(np.median(seconds)) <= 0.140
    # never faster than the quickest class the device can produce
    assert seconds.min() >= (4.82e8 - 5 * 4e6) / FREQ


@remote_only
@pytest.mark.slow
def test_remote_8bit_attack_within_twice_the_budget():
    pytest.importorskip("fpylll")
    config = load_attack_config(CONFIG_DIR / "remote-8bit.yaml")
    keypair = keygen(p256(), seed=16)
    settings = ServerSettings(port=0, profile=config.profile, baseline_cycles=config.baseline_cycles, seed=17)
    with background_server(settings, keypair) as (host, port):
        config = config.model_copy(update={"target": f"{host}:{port}"})
        result = run_attack(config, public_key=keypair_point(keypair))
    assert result.success
    assert result.recovered_key == keypair.d
    assert result.signatures_consumed <= 2 * 44_032
