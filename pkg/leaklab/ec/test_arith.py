# test_arith.py
from hypothesis import given, settings
from hypothesis import strategies as st

from leaklab.device.leakage import zero_msw_count
from leaklab.ec.arith import (
    base_mul,
    leaky_window_mul,
    point_add,
    point_double,
    point_neg,
    scalar_mul,
)
from leaklab.ec.curves import TOY_CURVE, CurvePoint, p256

CURVE = p256()
G = CURVE.G
O = CurvePoint.identity()

scalars = st.integers(min_value=0, max_value=CURVE.n - 1)


def repeated_addition(curve, k, point):
    acc = CurvePoint.identity()
    for _ in range(k):
        acc = point_add(curve, acc, point)
    return acc


def test_small_multiples():
    assert scalar_mul(CURVE, 0, G).is_identity
    assert scalar_mul(CURVE, 1, G) == G
    assert scalar_mul(CURVE, 5, G) == repeated_addition(CURVE, 5, G)
    assert scalar_mul(CURVE, 2, G) == point_double(CURVE, G)


def test_order_annihilates_generator():
    assert scalar_mul(CURVE, CURVE.n, G).is_identity
    assert base_mul(CURVE, CURVE.n).is_identity
    assert scalar_mul(TOY_CURVE, TOY_CURVE.n, TOY_CURVE.G).is_identity


def test_negation():
    minus_g = scalar_mul(CURVE, CURVE.n - 1, G)
    assert minus_g == point_neg(CURVE, G)
    assert minus_g.x == G.x and minus_g.y == CURVE.p - G.y
    assert point_add(CURVE, G, minus_g).is_identity


def test_identity_is_neutral():
    assert point_add(CURVE, G, O) == G
    assert point_add(CURVE, O, G) == G
    assert point_add(CURVE, O, O).is_identity


def test_toy_curve_exhaustive():
    curve = TOY_CURVE
    acc = CurvePoint.identity()
    for k in range(curve.n + 1):
        assert scalar_mul(curve, k, curve.G) == acc
        assert base_mul(curve, k) == acc
        assert leaky_window_mul(curve, k, curve.G)[0] == acc
        acc = point_add(curve, acc, curve.G)


@settings(max_examples=25, deadline=None)
@given(scalars, scalars, scalars)
def test_group_laws(a, b, c):
    P, Q, R = (base_mul(CURVE, k) for k in (a, b, c))
    assert point_add(CURVE, P, Q) == point_add(CURVE, Q, P)
    assert point_add(CURVE, point_add(CURVE, P, Q), R) == point_add(CURVE, P, point_add(CURVE, Q, R))
    assert point_add(CURVE, P, point_neg(CURVE, P)).is_identity
    assert CURVE.contains(point_add(CURVE, P, Q))


@settings(max_examples=25, deadline=None)
@given(scalars, scalars)
def test_scalar_mul_is_linear(k1, k2):
    lhs = scalar_mul(CURVE, (k1 + k2) % CURVE.n, G)
    rhs = point_add(CURVE, scalar_mul(CURVE, k1, G), scalar_mul(CURVE, k2, G))
    assert lhs == rhs
    assert base_mul(CURVE, k1) == scalar_mul(CURVE, k1, G)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=CURVE.n - 1), st.integers(min_value=0, max_value=60))
def test_leaky_multiplier_doubling_count(k, shift):
    k >>= shift
    if k == 0:
        k = 1
    point, doublings = leaky_window_mul(CURVE, k, G)
    assert point == base_mul(CURVE, k)
    windows = 256 // 4
    assert doublings == 4 * (windows - 1 - zero_msw_count(k, 4))


def test_leaky_multiplier_zero_scalar():
    point, doublings = leaky_window_mul(CURVE, 0, G)
    assert point.is_identity
    assert doublings == 0
