# test_extract.py
import pytest

from leaklab.attack.extract import extract_keys, key_from_pivot
from leaklab.attack.hnp import build_basis, build_instance
from leaklab.attack.reduction import lll_reduce
from leaklab.attack.test_hnp import N, biased_signatures
from leaklab.device.profiles import PRESETS
from leaklab.device.simulated import SimulatedDevice
from leaklab.ec.arith import base_mul
from leaklab.ec.curves import p256
from leaklab.errors import NoCandidateRowError
from leaklab.schemas import Algorithm, Backend, ReductionParams, Scheme, Variant

NATIVE_LLL = ReductionParams(backend=Backend.NATIVE, algorithm=Algorithm.LLL)
KEY = 0xC9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721


@pytest.mark.parametrize("scheme", [Scheme.ECDSA, Scheme.ECSCHNORR])
@pytest.mark.parametrize("variant", [Variant.FULL, Variant.ELIMINATED])
def test_planted_key_over_small_modulus(scheme, variant):
    samples, _ = biased_signatures(scheme, 12, 4, d=4242, seed=7)
    instance = build_instance(samples, 4, N, scheme, variant)
    basis = build_basis(instance)
    reduced = lll_reduce(basis.rows, NATIVE_LLL).rows
    candidates = extract_keys(reduced, basis, instance)
    assert 4242 in [c.d for c in candidates]
    # no public key, nothing can be verified
    assert not any(c.verified for c in candidates)


def test_negated_rows_give_the_same_key():
    samples, _ = biased_signatures(Scheme.ECDSA, 12, 4, seed=8)
    instance = build_instance(samples, 4, N, Scheme.ECDSA, Variant.ELIMINATED)
    basis = build_basis(instance)
    reduced = lll_reduce(basis.rows, NATIVE_LLL).rows
    negated = [[-v for v in row] for row in reduced]
    assert {c.d for c in extract_keys(reduced, basis, instance)} == {
        c.d for c in extract_keys(negated, basis, instance)
    }


def test_no_candidate_row():
    samples, _ = biased_signatures(Scheme.ECDSA, 4, 4)
    instance = build_instance(samples, 4, N, Scheme.ECDSA, Variant.ELIMINATED)
    basis = build_basis(instance)
    identity = [[int(i == j) for j in range(basis.dimension)] for i in range(basis.dimension)]
    with pytest.raises(NoCandidateRowError):
        extract_keys(identity, basis, instance)


def test_key_from_pivot_inverts_signing():
    samples, nonces = biased_signatures(Scheme.ECSCHNORR, 3, 4, d=99, seed=2)
    instance = build_instance(samples, 4, N, Scheme.ECSCHNORR, Variant.ELIMINATED, pivot_fastest=False)
    assert key_from_pivot(instance, nonces[0]) == 99


@pytest.mark.parametrize("scheme", [Scheme.ECDSA, Scheme.ECSCHNORR])
def test_verified_recovery_on_p256(scheme):
    curve = p256()
    device = SimulatedDevice(scheme, PRESETS["intel-system"], KEY, curve=curve, seed=3)
    samples = device.collect_biased(10, 32)
    instance = build_instance(samples, 32, curve.n, scheme, Variant.ELIMINATED)
    basis = build_basis(instance)
    reduced = lll_reduce(basis.rows, NATIVE_LLL).rows

    candidates = extract_keys(reduced, basis, instance, device.public_key, curve)
    assert candidates[0].verified
    assert candidates[0].d == KEY

    wrong_key = base_mul(curve, KEY + 1)
    assert not any(c.verified for c in extract_keys(reduced, basis, instance, wrong_key, curve))
