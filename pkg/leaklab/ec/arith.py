"""
Point arithmetic and scalar multiplication.

Internally points are Jacobian triples (X, Y, Z) with x = X/Z^2, y = Y/Z^3 and
Z = 0 for the identity. Public functions take and return affine CurvePoints.
"""

from functools import lru_cache
from typing import List, Tuple

from leaklab.ec.curves import CurveParams, CurvePoint

Jacobian = Tuple[int, int, int]

INFINITY: Jacobian = (1, 1, 0)

DEFAULT_WINDOW = 4


def to_jacobian(point: CurvePoint) -> Jacobian:
    if point.is_identity:
        return INFINITY
    assert point.x is not None and point.y is not None
    return (point.x, point.y, 1)


def from_jacobian(curve: CurveParams, point: Jacobian) -> CurvePoint:
    X, Y, Z = point
    if Z % curve.p == 0:
        return CurvePoint.identity()
    p = curve.p
    z_inv = pow(Z, -1, p)
    z_inv2 = z_inv * z_inv % p
    return CurvePoint(x=X * z_inv2 % p, y=Y * z_inv2 * z_inv % p)


def jacobian_double(curve: CurveParams, point: Jacobian) -> Jacobian:
    X, Y, Z = point
    if Z == 0 or Y == 0:
        return INFINITY
    p = curve.p
    YY = Y * Y % p
    S = 4 * X * YY % p
    ZZ = Z * Z % p
    M = (3 * X * X + curve.a * ZZ * ZZ) % p
    X3 = (M * M - 2 * S) % p
    Y3 = (M * (S - X3) - 8 * YY * YY) % p
    Z3 = 2 * Y * Z % p
    return (X3, Y3, Z3)


def jacobian_add(curve: CurveParams, P: Jacobian, Q: Jacobian) -> Jacobian:
    if P[2] == 0:
        return Q
    if Q[2] == 0:
        return P
    p = curve.p
    X1, Y1, Z1 = P
    X2, Y2, Z2 = Q
    Z1Z1 = Z1 * Z1 % p
    Z2Z2 = Z2 * Z2 % p
    U1 = X1 * Z2Z2 % p
    U2 = X2 * Z1Z1 % p
    S1 = Y1 * Z2 * Z2Z2 % p
    S2 = Y2 * Z1 * Z1Z1 % p
    if U1 == U2:
        if S1 != S2:
            return INFINITY
        return jacobian_double(curve, P)
    H = (U2 - U1) % p
    R = (S2 - S1) % p
    HH = H * H % p
    HHH = H * HH % p
    V = U1 * HH % p
    X3 = (R * R - HHH - 2 * V) % p
    Y3 = (R * (V - X3) - S1 * HHH) % p
    Z3 = Z1 * Z2 * H % p
    return (X3, Y3, Z3)


def point_add(curve: CurveParams, P: CurvePoint, Q: CurvePoint) -> CurvePoint:
    return from_jacobian(curve, jacobian_add(curve, to_jacobian(P), to_jacobian(Q)))


def point_double(curve: CurveParams, P: CurvePoint) -> CurvePoint:
    return from_jacobian(curve, jacobian_double(curve, to_jacobian(P)))


def point_neg(curve: CurveParams, P: CurvePoint) -> CurvePoint:
    if P.is_identity:
        return P
    assert P.y is not None
    return CurvePoint(x=P.x, y=(-P.y) % curve.p)


def _window_digits(k: int, bits: int, window_bits: int) -> List[int]:
    """Digits of k in base 2^w, most significant window first."""
    count = -(-bits // window_bits)
    mask = (1 << window_bits) - 1
    return [(k >> (i * window_bits)) & mask for i in reversed(range(count))]


def _window_table(curve: CurveParams, point: Jacobian, window_bits: int) -> List[Jacobian]:
    table = [INFINITY, point]
    for _ in range(2, 1 << window_bits):
        table.append(jacobian_add(curve, table[-1], point))
    return table


def scalar_mul(
    curve: CurveParams, k: int, P: CurvePoint, window_bits: int = DEFAULT_WINDOW
) -> CurvePoint:
    """
    Reference fixed-window multiplier.

    Every window of the order's bit length is processed, leading zero windows
    included, so the doubling count does not depend on k.
    """
    k %= curve.n
    if P.is_identity:
        return P
    table = _window_table(curve, to_jacobian(P), window_bits)
    acc = INFINITY
    for digit in _window_digits(k, curve.bit_length, window_bits):
        for _ in range(window_bits):
            acc = jacobian_double(curve, acc)
        acc = jacobian_add(curve, acc, table[digit])
    return from_jacobian(curve, acc)


def leaky_window_mul(
    curve: CurveParams, k: int, P: CurvePoint, window_bits: int = DEFAULT_WINDOW
) -> Tuple[CurvePoint, int]:
    """
    Fixed-window multiplier that starts at the first non-zero window.

    Returns (k*P, doublings). Skipped all-zero leading windows cost nothing, so
    doublings = w * (m - 1 - zero leading windows) with m windows in total.
    """
    k %= curve.n
    digits = _window_digits(k, curve.bit_length, window_bits)
    first = next((i for i, digit in enumerate(digits) if digit), None)
    if first is None or P.is_identity:
        return CurvePoint.identity(), 0
    table = _window_table(curve, to_jacobian(P), window_bits)
    acc = table[digits[first]]
    doublings = 0
    for digit in digits[first + 1:]:
        for _ in range(window_bits):
            acc = jacobian_double(curve, acc)
            doublings += 1
        acc = jacobian_add(curve, acc, table[digit])
    return from_jacobian(curve, acc), doublings


@lru_cache(maxsize=8)
def _base_table(curve: CurveParams, window_bits: int) -> List[List[Jacobian]]:
    """table[i][j] = j * 2^(w*i) * G in normalized Jacobian form."""
    count = -(-curve.bit_length // window_bits)
    rows = []
    base = to_jacobian(curve.G)
    for _ in range(count):
        row = [to_jacobian(from_jacobian(curve, entry)) for entry in _window_table(curve, base, window_bits)]
        rows.append(row)
        for _ in range(window_bits):
            base = jacobian_double(curve, base)
    return rows


def base_mul(curve: CurveParams, k: int, window_bits: int = DEFAULT_WINDOW) -> CurvePoint:
    """k*G using a cached per-window table; additions only."""
    k %= curve.n
    table = _base_table(curve, window_bits)
    mask = (1 << window_bits) - 1
    acc = INFINITY
    for i, row in enumerate(table):
        digit = (k >> (i * window_bits)) & mask
        acc = jacobian_add(curve, acc, row[digit])
    return from_jacobian(curve, acc)


def double_scalar_mul(curve: CurveParams, u1: int, u2: int, Q: CurvePoint) -> CurvePoint:
    """u1*G + u2*Q, as used by verification."""
    return point_add(curve, base_mul(curve, u1), scalar_mul(curve, u2, Q))
