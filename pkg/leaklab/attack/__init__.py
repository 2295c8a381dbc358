"""Filtering, HNP lattices, reduction and the key recovery pipeline."""

from leaklab.attack.extract import extract_keys
from leaklab.attack.filtering import classify, profile, sort_fastest
from leaklab.attack.hnp import build_basis, build_instance_ecdsa, build_instance_ecschnorr
from leaklab.attack.pipeline import budget_report, emit_histogram, run_attack, success_curve
from leaklab.attack.reduction import bkz_reduce, lll_reduce, reduce_basis

__all__ = [
    "bkz_reduce",
    "budget_report",
    "build_basis",
    "build_instance_ecdsa",
    "build_instance_ecschnorr",
    "classify",
    "emit_histogram",
    "extract_keys",
    "lll_reduce",
    "profile",
    "reduce_basis",
    "run_attack",
    "sort_fastest",
    "success_curve",
]
