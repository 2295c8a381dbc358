"""
Key extraction from a reduced HNP basis.
"""

import logging
from typing import Dict, List, Optional, Sequence

from leaklab.ec.arith import base_mul
from leaklab.ec.curves import CurveParams, CurvePoint
from leaklab.errors import NoCandidateRowError, NonInvertibleError
from leaklab.schemas import HnpInstance, KeyCandidate, LatticeBasis, Scheme, Variant

logger = logging.getLogger(__name__)


def key_from_pivot(instance: HnpInstance, k0: int) -> int:
    """Solve the pivot signature for the key given its nonce."""
    n = instance.modulus
    try:
        r0_inv = pow(instance.pivot_r, -1, n)
    except ValueError as e:
        raise NonInvertibleError(f"pivot r = {instance.pivot_r} is not invertible mod n") from e
    if instance.scheme == Scheme.ECDSA:
        return r0_inv * (instance.pivot_s * k0 - instance.pivot_h) % n
    return r0_inv * (instance.pivot_s - k0) % n


def _key_from_row(row: Sequence[int], basis: LatticeBasis, instance: HnpInstance) -> Optional[int]:
    coordinate = row[basis.key_column]
    if instance.variant == Variant.FULL:
        if coordinate % basis.key_weight:
            return None
        return (coordinate // basis.key_weight) % instance.modulus
    k0 = (coordinate + instance.shift) % instance.modulus
    return key_from_pivot(instance, k0)


def extract_keys(
    reduced_rows: Sequence[Sequence[int]],
    basis: LatticeBasis,
    instance: HnpInstance,
    public_key: Optional[CurvePoint] = None,
    curve: Optional[CurveParams] = None,
) -> List[KeyCandidate]:
    """
    Candidate keys from every row (or its negation) that ends in the embedding.

    A candidate is verified only when d*G equals public_key; without a public
    key nothing is verified. Verified candidates come first.
    """
    candidates: Dict[int, KeyCandidate] = {}
    matched = 0
    for index, row in enumerate(reduced_rows):
        if row[-1] == basis.embedding:
            oriented = list(row)
        elif row[-1] == -basis.embedding:
            oriented = [-x for x in row]
        else:
            continue
        matched += 1
        d = _key_from_row(oriented, basis, instance)
        if not d or d in candidates:
            continue
        verified = (
            public_key is not None
            and curve is not None
            and base_mul(curve, d) == public_key
        )
        candidates[d] = KeyCandidate(d=d, row_index=index, verified=verified)

    if matched == 0:
        raise NoCandidateRowError(f"no reduced row ends in +-{basis.embedding}")

    ordered = sorted(candidates.values(), key=lambda c: (not c.verified, c.row_index))
    logger.debug(
        f"{matched} rows matched the embedding, {len(ordered)} distinct candidates, "
        f"{sum(c.verified for c in ordered)} verified"
    )
    return ordered
