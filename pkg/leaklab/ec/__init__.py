"""Elliptic-curve arithmetic and signature schemes."""

from leaklab.ec.arith import base_mul, leaky_window_mul, point_add, point_neg, scalar_mul
from leaklab.ec.curves import TOY_CURVE, CurveParams, CurvePoint, get_curve, p256
from leaklab.ec.signing import (
    ecdsa_sign,
    ecdsa_verify,
    ecschnorr_sign,
    ecschnorr_verify,
    hash_message,
    keygen,
    random_scalar,
    recover_nonce_ecdsa,
    recover_nonce_ecschnorr,
)

__all__ = [
    "CurveParams",
    "CurvePoint",
    "TOY_CURVE",
    "base_mul",
    "ecdsa_sign",
    "ecdsa_verify",
    "ecschnorr_sign",
    "ecschnorr_verify",
    "get_curve",
    "hash_message",
    "keygen",
    "leaky_window_mul",
    "p256",
    "point_add",
    "point_neg",
    "random_scalar",
    "recover_nonce_ecdsa",
    "recover_nonce_ecschnorr",
    "scalar_mul",
]
