# test_reduction.py
import math

import numpy as np
import pytest

from leaklab.attack.reduction import (
    bkz_native,
    bkz_reduce,
    determinant,
    enumerate_shortest,
    express_in_basis,
    gram_schmidt_norms,
    insert_combination,
    integral_gso,
    lll_bound,
    lll_exact,
    lll_reduce,
    resolve_backend,
    satisfies_lll_bound,
    squared_norm,
)
from leaklab.errors import ConfigError, RankDeficiencyError
from leaklab.schemas import Algorithm, Backend, ReductionParams

NATIVE = ReductionParams(backend=Backend.NATIVE)


def random_basis(dim, bits, seed):
    rng = np.random.default_rng(seed)
    while True:
        rows = [[int(v) for v in rng.integers(0, 2**bits, size=dim)] for _ in range(dim)]
        if determinant(rows) != 0:
            return rows


def gauss_reduce(u, v):
    """Lagrange-Gauss reduction; returns a shortest vector of the 2D lattice."""
    if squared_norm(u) > squared_norm(v):
        u, v = v, u
    while True:
        q = round(sum(a * b for a, b in zip(u, v)) / squared_norm(u))
        v = [b - q * a for a, b in zip(u, v)]
        if squared_norm(v) >= squared_norm(u):
            return u
        u, v = v, u


def is_unimodular_transform(original, reduced):
    coefficients = [express_in_basis(original, row) for row in reduced]
    integral = all(c.denominator == 1 for row in coefficients for c in row)
    return integral and abs(determinant(reduced)) == abs(determinant(original))


class TestLLL:
    def test_identity_is_unchanged(self):
        identity = [[int(i == j) for j in range(5)] for i in range(5)]
        reduced, _ = lll_exact(identity)
        assert reduced == identity

    @pytest.mark.parametrize("M", [10, 12345, 2**40 + 3])
    def test_two_dimensional_matches_gauss(self, M):
        rows = [[1, 0], [M, 1]]
        reduced = lll_reduce(rows, NATIVE).rows
        assert squared_norm(reduced[0]) == squared_norm(gauss_reduce(*rows)) == 1

    def test_skewed_two_dimensional(self):
        rows = [[201, 37], [1648, 297]]
        reduced = lll_reduce(rows, NATIVE).rows
        assert squared_norm(reduced[0]) * 0.99 <= squared_norm(gauss_reduce(*rows))

    @pytest.mark.parametrize("seed", range(20))
    def test_first_vector_obeys_bound(self, seed):
        rows = random_basis(10, 32, seed)
        reduced, gso = lll_exact(rows)
        assert satisfies_lll_bound(rows, reduced[0])
        assert math.log2(squared_norm(reduced[0])) / 2 <= lll_bound(rows)
        assert gso.gram_determinant() == determinant(rows) ** 2

    @pytest.mark.parametrize("dim", [2, 4, 6, 8])
    def test_transform_is_unimodular(self, dim):
        rows = random_basis(dim, 20, dim)
        reduced, _ = lll_exact(rows)
        assert is_unimodular_transform(rows, reduced)

    def test_lovasz_condition_holds(self):
        rows = random_basis(8, 24, 99)
        reduced, _ = lll_exact(rows, delta=0.99)
        norms = gram_schmidt_norms(reduced)
        gso = integral_gso(reduced)
        for k in range(1, len(reduced)):
            mu = gso.mu(k, k - 1)
            assert abs(mu) <= 0.5
            assert norms[k] >= (0.99 - mu * mu) * norms[k - 1]

    def test_rank_deficiency(self):
        with pytest.raises(RankDeficiencyError):
            lll_exact([[1, 2, 3], [2, 4, 6], [0, 1, 1]])

    def test_dependent_rows_deep_in_basis(self):
        with pytest.raises(RankDeficiencyError):
            lll_exact([[1, 0, 0], [0, 1, 0], [3, 5, 0]])


class TestEnumeration:
    def test_orthogonal_block(self):
        mu = [[0.0] * 3 for _ in range(3)]
        assert enumerate_shortest(mu, [4.0, 1.0, 9.0], 100.0) == [0, 1, 0]

    def test_nothing_below_radius(self):
        mu = [[0.0] * 2 for _ in range(2)]
        assert enumerate_shortest(mu, [4.0, 9.0], 4.0) is None

    def test_finds_combination(self):
        # b0 = (2, 0), b1 = (1, 2): projected b1* = (0, 2), mu = 1/2; shortest is b0
        mu = [[0.0, 0.0], [0.5, 0.0]]
        assert enumerate_shortest(mu, [4.0, 4.0], 100.0) == [1, 0]

    def test_insert_combination_keeps_lattice(self):
        rows = random_basis(4, 16, 5)
        inserted = insert_combination(rows, 1, [2, -3, 5])
        expected = [2 * a - 3 * b + 5 * c for a, b, c in zip(rows[1], rows[2], rows[3])]
        assert inserted[1] == expected
        assert inserted[0] == rows[0]
        assert is_unimodular_transform(rows, inserted)

    def test_insert_needs_coprime_coefficients(self):
        with pytest.raises(ValueError):
            insert_combination(random_basis(3, 16, 6), 0, [2, 4, 0])


class TestBKZ:
    def test_block_two_matches_lll(self):
        for seed in range(5):
            rows = random_basis(10, 32, seed)
            lll_first = squared_norm(lll_exact(rows)[0][0])
            bkz_first = squared_norm(bkz_reduce(rows, NATIVE.model_copy(update={"bkz_block": 2})).rows[0])
            assert bkz_first <= lll_first * 1.01 ** 2

    def test_never_longer_and_same_lattice(self):
        rows = random_basis(8, 24, 21)
        lll_rows, _ = lll_exact(rows)
        reduced, tours, partial = bkz_native(rows, block_size=6)
        assert squared_norm(reduced[0]) <= squared_norm(lll_rows[0])
        assert is_unimodular_transform(rows, reduced)
        assert tours >= 1 and not partial

    def test_full_block_finds_shortest_vector(self):
        rows = random_basis(6, 12, 3)
        reduced, _, _ = bkz_native(rows, block_size=6)
        # enumeration over the whole lattice leaves nothing shorter than b_1
        norms = [float(n) for n in gram_schmidt_norms(reduced)]
        gso = integral_gso(reduced)
        mu = [[float(gso.mu(i, j)) if j < i else 0.0 for j in range(6)] for i in range(6)]
        assert enumerate_shortest(mu, norms, 0.99 * norms[0]) is None

    def test_time_budget_marks_partial(self):
        params = NATIVE.model_copy(update={"bkz_block": 10, "time_budget": 1e-9})
        result = bkz_reduce(random_basis(16, 32, 8), params)
        assert result.partial
        assert result.backend == Backend.NATIVE


class TestBackends:
    def test_native_backend_is_always_available(self):
        assert resolve_backend(Backend.NATIVE) == Backend.NATIVE
        assert resolve_backend(Backend.AUTO) in (Backend.NATIVE, Backend.FPYLLL)

    def test_missing_fpylll_is_a_config_error(self, monkeypatch):
        monkeypatch.setattr("leaklab.attack.reduction.fpylll_available", lambda: False)
        with pytest.raises(ConfigError):
            resolve_backend(Backend.FPYLLL)
        assert resolve_backend(Backend.AUTO) == Backend.NATIVE

    def test_lll_reduce_forces_algorithm(self):
        result = lll_reduce(random_basis(4, 16, 1), NATIVE.model_copy(update={"algorithm": Algorithm.BKZ}))
        assert result.tours == 0

    def test_fpylll_agrees_with_native(self):
        pytest.importorskip("fpylll")
        rows = random_basis(10, 32, 4)
        fast = lll_reduce(rows, ReductionParams(backend=Backend.FPYLLL)).rows
        assert satisfies_lll_bound(rows, fast[0])
        assert is_unimodular_transform(rows, fast)
        bkz = bkz_reduce(rows, ReductionParams(backend=Backend.FPYLLL, bkz_block=10)).rows
        assert squared_norm(bkz[0]) <= squared_norm(fast[0])
