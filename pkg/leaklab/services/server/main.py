#!/usr/bin/env python3
"""
UDP signing server.

A single request loop signs on a simulated device and answers each request
after the latency the device's leak profile assigns to the nonce it used.
"""

import datetime
import json
import logging
import os
import socketserver
import time
from pathlib import Path
from typing import Optional

from leaklab.device.simulated import SimulatedDevice
from leaklab.ec.curves import get_curve
from leaklab.errors import ConfigError
from leaklab.schemas import KeyPair
from leaklab.storage import save_public_key

from .api_definitions import ServerSettings
from .handlers import SignHandler

logger = logging.getLogger(__name__)


class DatagramHandler(socketserver.BaseRequestHandler):
    """Answers one datagram; exceptions never escape to the serve loop."""

    server: "SigningServer"

    def handle(self) -> None:
        received = time.perf_counter()
        data, sock = self.request
        try:
            result = self.server.sign_handler.handle_datagram(data)
        except Exception as e:
            logger.error(f"Error handling request from {self.client_address}: {e}", exc_info=True)
            return
        if result is None:
            return
        response, latency = result

        # Deadline measured from receipt so signing time is part of the latency
        remaining = received + latency - time.perf_counter()
        if remaining > 0:
            time.sleep(remaining)
        sock.sendto(response.pack(), self.client_address)
        self.server.log_request(self.client_address, response.request_id, latency)


class SigningServer(socketserver.UDPServer):
    """Serial UDP server; one signature is computed at a time."""

    allow_reuse_address = True

    def __init__(self, settings: ServerSettings, keypair: KeyPair):
        self.settings = settings
        curve = get_curve(settings.curve)
        if get_curve(keypair.curve) != curve:
            raise ConfigError(f"Key is for {keypair.curve}, server runs {curve.name}")
        device = SimulatedDevice(
            settings.scheme,
            settings.profile,
            keypair.d,
            curve=curve,
            seed=settings.seed,
            debug=False,
        )
        self.sign_handler = SignHandler(device, settings)
        self.request_log: Optional[Path] = None
        if settings.log_requests:
            self.request_log = Path(settings.log_file)
            log_dir = os.path.dirname(self.request_log)
            if log_dir and not os.path.exists(log_dir):
                os.makedirs(log_dir, exist_ok=True)
            open(self.request_log, "w").close()
            logger.info(f"Request logging enabled. Logging to {self.request_log}")
        super().__init__((settings.host, settings.port), DatagramHandler)

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def log_request(self, client_address: tuple, request_id: int, latency: float) -> None:
        if self.request_log is None:
            return
        sample = self.sign_handler.last_sample
        log_entry = {
            "timestamp": datetime.datetime.now().isoformat(),
            "client": f"{client_address[0]}:{client_address[1]}",
            "request_id": request_id,
            "cycles": sample.cycles if sample else None,
            "latency_s": latency,
        }
        with open(self.request_log, "a") as f:
            f.write(json.dumps(log_entry) + "\n")


def create_server(settings: ServerSettings, keypair: KeyPair) -> SigningServer:
    """Bind the server and publish its public key; raises OSError on bind failure."""
    try:
        server = SigningServer(settings, keypair)
    except OSError as e:
        logger.error(f"Could not bind {settings.host}:{settings.port}: {e}")
        raise
    if settings.public_key_file:
        save_public_key(keypair.curve, server.sign_handler.device.public_key, settings.public_key_file)
        logger.info(f"Published public key to {settings.public_key_file}")
    return server


def start_server(settings: ServerSettings, keypair: KeyPair) -> None:
    """Serve until interrupted."""
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
    server = create_server(settings, keypair)
    logger.info(
        f"Serving {settings.scheme.value} signatures on udp://{server.address} "
        f"({settings.profile.model.value}, {settings.freq_hz:g} Hz)"
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        logger.info("Server stopped")
    finally:
        handler = server.sign_handler
        logger.info(f"Served {handler.served} requests, dropped {handler.dropped}")
        server.server_close()
