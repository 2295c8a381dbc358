"""
ECDSA and ECSchnorr key generation, signing and verification.

Nonces are always passed in explicitly; devices draw them from a seeded
generator with random_scalar. Messages are 32-byte SHA-256 digests held as
integers (msg_hash) for both schemes.
"""

import hashlib
import logging
from typing import Optional

import numpy as np

from leaklab.ec.arith import base_mul, double_scalar_mul
from leaklab.ec.curves import CurveParams, CurvePoint
from leaklab.errors import DegenerateNonceError, NonInvertibleError
from leaklab.schemas import KeyPair, Scheme, Signature

logger = logging.getLogger(__name__)

DIGEST_BYTES = 32


def hash_message(message: bytes) -> int:
    return int.from_bytes(hashlib.sha256(message).digest(), "big")


def random_scalar(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in [1, n) by rejection sampling on masked random bytes."""
    bits = n.bit_length()
    nbytes = (bits + 7) // 8
    mask = (1 << bits) - 1
    while True:
        k = int.from_bytes(rng.bytes(nbytes), "big") & mask
        if 1 <= k < n:
            return k


def _inverse(value: int, n: int, what: str) -> int:
    try:
        return pow(value, -1, n)
    except ValueError as e:
        raise NonInvertibleError(f"{what} is not invertible mod n") from e


def public_key(curve: CurveParams, d: int) -> CurvePoint:
    return base_mul(curve, d)


def keygen(
    curve: CurveParams, seed: Optional[int] = None, rng: Optional[np.random.Generator] = None
) -> KeyPair:
    """Draw d in [1, n) and compute Q = d*G; deterministic for a fixed seed."""
    if rng is None:
        rng = np.random.default_rng(seed)
    d = random_scalar(rng, curve.n)
    Q = public_key(curve, d)
    assert Q.x is not None and Q.y is not None
    return KeyPair(curve=curve.name, d=d, qx=Q.x, qy=Q.y)


def keypair_point(keypair: KeyPair) -> CurvePoint:
    return CurvePoint(x=keypair.qx, y=keypair.qy)


# ==================== ECDSA ====================

def ecdsa_sign(curve: CurveParams, d: int, msg_hash: int, k: int) -> Signature:
    """
    r = (k*G).x mod n, s = k^-1 (e + d*r) mod n with e = msg_hash mod n.

    Raises DegenerateNonceError when r or s is zero; callers draw a fresh nonce.
    """
    n = curve.n
    if not 1 <= k < n:
        raise DegenerateNonceError("nonce must lie in [1, n)")
    R = base_mul(curve, k)
    assert R.x is not None
    r = R.x % n
    if r == 0:
        raise DegenerateNonceError("r = 0")
    s = pow(k, -1, n) * (msg_hash % n + d * r) % n
    if s == 0:
        raise DegenerateNonceError("s = 0")
    return Signature(r=r, s=s, msg_hash=msg_hash)


def ecdsa_verify(curve: CurveParams, Q: CurvePoint, msg_hash: int, sig: Signature) -> bool:
    n = curve.n
    if not (1 <= sig.r < n and 1 <= sig.s < n):
        return False
    if sig.msg_hash != msg_hash or Q.is_identity or not curve.contains(Q):
        return False
    w = pow(sig.s, -1, n)
    R = double_scalar_mul(curve, msg_hash % n * w % n, sig.r * w % n, Q)
    if R.is_identity:
        return False
    assert R.x is not None
    return R.x % n == sig.r


def recover_nonce_ecdsa(curve: CurveParams, d: int, sig: Signature) -> int:
    """k = s^-1 (e + d*r) mod n."""
    n = curve.n
    return _inverse(sig.s, n, "s") * (sig.msg_hash % n + d * sig.r) % n


def key_from_nonce_ecdsa(curve: CurveParams, sig: Signature, k: int) -> int:
    """d = r^-1 (s*k - e) mod n."""
    n = curve.n
    return _inverse(sig.r, n, "r") * (sig.s * k - sig.msg_hash) % n


# ==================== ECSCHNORR ====================

def schnorr_challenge(curve: CurveParams, x_r: int, msg_hash: int) -> int:
    """r = SHA-256(xR as fixed-width big-endian || digest) mod n."""
    data = x_r.to_bytes(curve.byte_length, "big") + msg_hash.to_bytes(DIGEST_BYTES, "big")
    return hash_message(data) % curve.n


def ecschnorr_sign(curve: CurveParams, d: int, msg_hash: int, k: int) -> Signature:
    """r = H(xR || m) mod n with R = k*G, s = k + d*r mod n."""
    n = curve.n
    if not 1 <= k < n:
        raise DegenerateNonceError("nonce must lie in [1, n)")
    R = base_mul(curve, k)
    assert R.x is not None
    r = schnorr_challenge(curve, R.x, msg_hash)
    if r == 0:
        raise DegenerateNonceError("r = 0")
    s = (k + d * r) % n
    if s == 0:
        raise DegenerateNonceError("s = 0")
    return Signature(r=r, s=s, msg_hash=msg_hash)


def ecschnorr_verify(curve: CurveParams, Q: CurvePoint, msg_hash: int, sig: Signature) -> bool:
    n = curve.n
    if not (1 <= sig.r < n and 1 <= sig.s < n):
        return False
    if sig.msg_hash != msg_hash or Q.is_identity or not curve.contains(Q):
        return False
    # R = s*G - r*Q
    R = double_scalar_mul(curve, sig.s, n - sig.r, Q)
    if R.is_identity:
        return False
    assert R.x is not None
    return schnorr_challenge(curve, R.x, msg_hash) == sig.r


def recover_nonce_ecschnorr(curve: CurveParams, d: int, sig: Signature) -> int:
    """k = s - d*r mod n."""
    return (sig.s - d * sig.r) % curve.n


def key_from_nonce_ecschnorr(curve: CurveParams, sig: Signature, k: int) -> int:
    """d = r^-1 (s - k) mod n."""
    n = curve.n
    return _inverse(sig.r, n, "r") * (sig.s - k) % n


# ==================== DISPATCH ====================

def sign(curve: CurveParams, scheme: Scheme, d: int, msg_hash: int, k: int) -> Signature:
    if scheme == Scheme.ECSCHNORR:
        return ecschnorr_sign(curve, d, msg_hash, k)
    return ecdsa_sign(curve, d, msg_hash, k)


def verify(curve: CurveParams, scheme: Scheme, Q: CurvePoint, sig: Signature) -> bool:
    if scheme == Scheme.ECSCHNORR:
        return ecschnorr_verify(curve, Q, sig.msg_hash, sig)
    return ecdsa_verify(curve, Q, sig.msg_hash, sig)


def recover_nonce(curve: CurveParams, scheme: Scheme, d: int, sig: Signature) -> int:
    if scheme == Scheme.ECSCHNORR:
        return recover_nonce_ecschnorr(curve, d, sig)
    return recover_nonce_ecdsa(curve, d, sig)
