"""
Hidden number problem instances and their lattice bases.

Each biased signature gives a relation k_i + A_i * x + B_i = 0 (mod n) with a
small nonce k_i. In the full variant x is the private key. The eliminated
variant solves one signature (the pivot) for the key and substitutes it into
the others, which leaves the pivot nonce k_0 as x and saves one dimension.
"""

import logging
from typing import List, Sequence

from leaklab.errors import DuplicateSampleError, HnpInstanceError, NonInvertibleError
from leaklab.schemas import HnpInstance, LatticeBasis, Scheme, TimedSample, Variant

logger = logging.getLogger(__name__)


def _inverse(value: int, n: int, what: str) -> int:
    try:
        return pow(value, -1, n)
    except ValueError as e:
        raise NonInvertibleError(f"{what} = {value} is not invertible mod n") from e


def _prepare(samples: Sequence[TimedSample], variant: Variant, pivot_fastest: bool) -> List[TimedSample]:
    if len(samples) < 2:
        raise HnpInstanceError(f"need at least 2 samples, got {len(samples)}")
    seen = set()
    for sample in samples:
        key = (sample.signature.r, sample.signature.msg_hash)
        if key in seen:
            raise DuplicateSampleError(f"sample {sample.index} repeats r and msg_hash")
        seen.add(key)
    ordered = list(samples)
    if variant == Variant.ELIMINATED and pivot_fastest:
        pivot = min(range(len(ordered)), key=lambda i: ordered[i].cycles)
        ordered.insert(0, ordered.pop(pivot))
    return ordered


def build_instance(
    samples: Sequence[TimedSample],
    lzb: int,
    modulus: int,
    scheme: Scheme = Scheme.ECDSA,
    variant: Variant = Variant.ELIMINATED,
    recenter: bool = True,
    pivot_fastest: bool = True,
) -> HnpInstance:
    """
    Relations for `samples` assuming every nonce is below K = n >> lzb.

    For the eliminated variant the fastest sample becomes the pivot unless
    pivot_fastest is False, in which case the first sample is used. With
    recenter every nonce unknown is replaced by k - K/2.
    """
    n = modulus
    ordered = _prepare(samples, variant, pivot_fastest)
    bound = n >> lzb
    if bound < 1:
        raise HnpInstanceError(f"bias of {lzb} bits leaves no room below n")
    shift = bound // 2 if recenter else 0

    rs = [sample.signature.r % n for sample in ordered]
    ss = [sample.signature.s % n for sample in ordered]
    hs = [sample.signature.msg_hash % n for sample in ordered]

    a: List[int] = []
    b: List[int] = []
    if variant == Variant.FULL:
        for r, s, h in zip(rs, ss, hs):
            if scheme == Scheme.ECDSA:
                s_inv = _inverse(s, n, "s")
                a_i, b_i = -s_inv * r, -s_inv * h
            else:
                a_i, b_i = r, -s
            a.append(a_i % n)
            b.append((b_i + shift) % n)
    else:
        r0, s0, h0 = rs[0], ss[0], hs[0]
        r0_inv = _inverse(r0, n, "r_0")
        for r, s, h in zip(rs[1:], ss[1:], hs[1:]):
            if scheme == Scheme.ECDSA:
                s_inv = _inverse(s, n, "s")
                a_i = -s0 * r0_inv * s_inv * r
                b_i = -s_inv * h + s_inv * r * r0_inv * h0
            else:
                a_i = -r0_inv * r
                b_i = -s + r * r0_inv * s0
            a.append(a_i % n)
            # both k_i and k_0 are shifted
            b.append((b_i + shift + a_i * shift) % n)

    instance = HnpInstance(
        modulus=n,
        a=a,
        b=b,
        bound=bound,
        shift=shift,
        recentered=recenter,
        variant=variant,
        scheme=scheme,
        lzb=lzb,
        sample_ids=[sample.index for sample in ordered],
        pivot_r=rs[0] if variant == Variant.ELIMINATED else None,
        pivot_s=ss[0] if variant == Variant.ELIMINATED else None,
        pivot_h=hs[0] if variant == Variant.ELIMINATED else None,
    )
    logger.debug(
        f"Built {variant.value} {scheme.value} instance: {instance.relations} relations, K=n>>{lzb}"
    )
    return instance


def build_instance_ecdsa(
    samples: Sequence[TimedSample],
    lzb: int,
    modulus: int,
    variant: Variant = Variant.ELIMINATED,
    recenter: bool = True,
    pivot_fastest: bool = True,
) -> HnpInstance:
    return build_instance(samples, lzb, modulus, Scheme.ECDSA, variant, recenter, pivot_fastest)


def build_instance_ecschnorr(
    samples: Sequence[TimedSample],
    lzb: int,
    modulus: int,
    variant: Variant = Variant.ELIMINATED,
    recenter: bool = True,
    pivot_fastest: bool = True,
) -> HnpInstance:
    return build_instance(samples, lzb, modulus, Scheme.ECSCHNORR, variant, recenter, pivot_fastest)


def build_basis(instance: HnpInstance) -> LatticeBasis:
    """
    Integer basis whose lattice contains the planted vector.

    full (dim t+2), every row multiplied by n:
        n^2 e_i                      for each relation
        (n A_1 .. n A_t,  K,  0)
        (n B_1 .. n B_t,  0,  n K)
    planted vector (-n k_1 .. -n k_t, d K, n K)

    eliminated (dim t+1):
        n e_i                        for each relation
        (A_1 .. A_m,  1,  0)
        (B_1 .. B_m,  0,  K)
    planted vector (-k_1 .. -k_m, k_0, K)
    """
    n = instance.modulus
    K = instance.bound
    m = instance.relations
    dim = m + 2
    if instance.variant == Variant.FULL:
        scale, weight, embedding = n, K, n * K
    else:
        scale, weight, embedding = 1, 1, K

    rows = []
    for i in range(m):
        row = [0] * dim
        row[i] = n * scale
        rows.append(row)
    rows.append([scale * a_i for a_i in instance.a] + [weight, 0])
    rows.append([scale * b_i for b_i in instance.b] + [0, embedding])
    return LatticeBasis(
        rows=rows,
        scale=scale,
        key_column=m,
        key_weight=weight,
        embedding=embedding,
        variant=instance.variant,
    )


# ==================== PLANTED SOLUTIONS ====================

def unknown_value(instance: HnpInstance, nonces: Sequence[int], key: int) -> int:
    """The x of the relations: the key (full) or the shifted pivot nonce (eliminated)."""
    if instance.variant == Variant.FULL:
        return key % instance.modulus
    return nonces[0] - instance.shift


def relation_nonces(instance: HnpInstance, nonces: Sequence[int]) -> List[int]:
    """Shifted nonces that appear as k_i in the relations, in relation order."""
    if len(nonces) != instance.samples:
        raise HnpInstanceError(f"expected {instance.samples} nonces, got {len(nonces)}")
    relevant = nonces if instance.variant == Variant.FULL else nonces[1:]
    return [k - instance.shift for k in relevant]


def check_relations(instance: HnpInstance, nonces: Sequence[int], key: int) -> bool:
    """Substitute known nonces (in sample order, pivot first) and key into every relation."""
    n = instance.modulus
    x = unknown_value(instance, nonces, key)
    return all(
        (k + a_i * x + b_i) % n == 0
        for k, a_i, b_i in zip(relation_nonces(instance, nonces), instance.a, instance.b)
    )


def target_witness(instance: HnpInstance, nonces: Sequence[int], key: int) -> List[int]:
    """Integer coefficients of the basis rows that produce the planted vector."""
    n = instance.modulus
    x = unknown_value(instance, nonces, key)
    coefficients = []
    for k, a_i, b_i in zip(relation_nonces(instance, nonces), instance.a, instance.b):
        quotient, remainder = divmod(-k - a_i * x - b_i, n)
        if remainder:
            raise HnpInstanceError("nonces and key do not satisfy the relations")
        coefficients.append(quotient)
    return coefficients + [x, 1]


def target_vector(basis: LatticeBasis, instance: HnpInstance, nonces: Sequence[int], key: int) -> List[int]:
    x = unknown_value(instance, nonces, key)
    shifted = [-basis.scale * k for k in relation_nonces(instance, nonces)]
    return shifted + [x * basis.key_weight, basis.embedding]


def combine_rows(rows: Sequence[Sequence[int]], coefficients: Sequence[int]) -> List[int]:
    width = len(rows[0])
    result = [0] * width
    for c, row in zip(coefficients, rows):
        if c:
            for j in range(width):
                result[j] += c * row[j]
    return result
