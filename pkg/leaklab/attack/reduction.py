"""
Lattice basis reduction.

The native backend is exact: LLL runs on the integral Gram-Schmidt data
(d_i = product of the first i squared GSO norms and lambda_ij = d_j * mu_ij),
so no rounding ever decides a swap. BKZ runs Schnorr-Euchner enumeration on
floating-point GSO values derived from that exact data and inserts improved
vectors with a unimodular transform. The fpylll backend is used when the
optional dependency is installed.
"""

import logging
import math
import time
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from leaklab.errors import ConfigError, RankDeficiencyError
from leaklab.schemas import Algorithm, Backend, ReducedBasis, ReductionParams

logger = logging.getLogger(__name__)

Matrix = List[List[int]]

# Enumeration must beat the current projected norm by this factor to count
BKZ_IMPROVEMENT = 0.99
DEADLINE_CHECK_NODES = 2048


def fpylll_available() -> bool:
    try:
        import fpylll  # noqa: F401
    except ImportError:
        return False
    return True


def _dot(u: Sequence[int], v: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(u, v))


def _delta_fraction(delta: float) -> Fraction:
    return Fraction(delta).limit_denominator(10_000)


# ==================== EXACT LLL ====================

class IntegralGso:
    """Integral Gram-Schmidt data of a basis; D[0] = 1 and D[i+1] = d_i."""

    def __init__(self, D: List[int], lam: List[List[int]]):
        self.D = D
        self.lam = lam

    def squared_norm(self, i: int) -> Fraction:
        return Fraction(self.D[i + 1], self.D[i])

    def mu(self, i: int, j: int) -> Fraction:
        return Fraction(self.lam[i][j], self.D[j + 1])

    def gram_determinant(self) -> int:
        return self.D[-1]


def _gso_row(b: Matrix, D: List[int], lam: List[List[int]], k: int) -> None:
    for j in range(k + 1):
        u = _dot(b[k], b[j])
        for i in range(j):
            u = (D[i + 1] * u - lam[k][i] * lam[j][i]) // D[i]
        if j < k:
            lam[k][j] = u
        else:
            if u == 0:
                raise RankDeficiencyError(f"row {k} is linearly dependent on the rows before it")
            D[k + 1] = u


def integral_gso(rows: Sequence[Sequence[int]]) -> IntegralGso:
    b = [list(row) for row in rows]
    n = len(b)
    D = [1] + [0] * n
    lam = [[0] * n for _ in range(n)]
    for k in range(n):
        _gso_row(b, D, lam, k)
    return IntegralGso(D, lam)


def _size_reduce(b: Matrix, D: List[int], lam: List[List[int]], k: int, l: int) -> None:
    two_lam = 2 * lam[k][l]
    if abs(two_lam) <= D[l + 1]:
        return
    q = (two_lam + D[l + 1]) // (2 * D[l + 1])
    b[k] = [x - q * y for x, y in zip(b[k], b[l])]
    lam[k][l] -= q * D[l + 1]
    row_l = lam[l]
    row_k = lam[k]
    for i in range(l):
        row_k[i] -= q * row_l[i]


def _swap(b: Matrix, D: List[int], lam: List[List[int]], k: int, kmax: int) -> None:
    b[k], b[k - 1] = b[k - 1], b[k]
    for j in range(k - 1):
        lam[k][j], lam[k - 1][j] = lam[k - 1][j], lam[k][j]
    lk = lam[k][k - 1]
    B = (D[k - 1] * D[k + 1] + lk * lk) // D[k]
    for i in range(k + 1, kmax + 1):
        t = lam[i][k]
        lam[i][k] = (D[k + 1] * lam[i][k - 1] - lk * t) // D[k]
        lam[i][k - 1] = (B * t + lk * lam[i][k]) // D[k + 1]
    D[k] = B


def lll_exact(rows: Sequence[Sequence[int]], delta: float = 0.99) -> Tuple[Matrix, IntegralGso]:
    """
    Integral LLL on linearly independent integer rows.

    Returns the reduced rows and their integral GSO data.
    """
    b = [list(row) for row in rows]
    n = len(b)
    if n == 0:
        return b, IntegralGso([1], [])
    frac = _delta_fraction(delta)
    p, q = frac.numerator, frac.denominator
    D = [1] + [0] * n
    lam = [[0] * n for _ in range(n)]
    _gso_row(b, D, lam, 0)
    k, kmax = 1, 0
    while k < n:
        if k > kmax:
            kmax = k
            _gso_row(b, D, lam, k)
        _size_reduce(b, D, lam, k, k - 1)
        lk = lam[k][k - 1]
        if q * D[k + 1] * D[k - 1] < p * D[k] * D[k] - q * lk * lk:
            _swap(b, D, lam, k, kmax)
            k = max(1, k - 1)
            continue
        for l in range(k - 2, -1, -1):
            _size_reduce(b, D, lam, k, l)
        k += 1
    return b, IntegralGso(D, lam)


# ==================== ENUMERATION ====================

class _DeadlineReached(Exception):
    pass


def _float_block(gso: IntegralGso, start: int, end: int) -> Tuple[List[List[float]], List[float]]:
    D, lam = gso.D, gso.lam
    size = end - start
    rr = [D[start + i + 1] / D[start + i] for i in range(size)]
    mu = [[0.0] * size for _ in range(size)]
    for i in range(size):
        for j in range(i):
            mu[i][j] = lam[start + i][start + j] / D[start + j + 1]
    return mu, rr


def enumerate_shortest(
    mu: List[List[float]],
    rr: List[float],
    radius2: float,
    deadline: Optional[float] = None,
) -> Optional[List[int]]:
    """
    Schnorr-Euchner search for the shortest non-zero projected vector.

    Returns integer coefficients of a vector with squared norm below radius2,
    the shortest such one, or None. Only vectors whose last non-zero
    coefficient is positive are visited.
    """
    n = len(rr)
    x = [0] * n
    best: List[Optional[List[int]]] = [None]
    bound = [radius2]
    nodes = [0]

    def search(k: int, partial: float, top_zero: bool) -> None:
        nodes[0] += 1
        if deadline is not None and nodes[0] % DEADLINE_CHECK_NODES == 0 and time.monotonic() > deadline:
            raise _DeadlineReached()
        center = -sum(x[j] * mu[j][k] for j in range(k + 1, n))
        if top_zero:
            # symmetric half: the highest non-zero coefficient is positive
            xk = 1 if k == 0 else 0
            while True:
                cost = partial + xk * xk * rr[k]
                if cost >= bound[0]:
                    break
                x[k] = xk
                if k == 0:
                    bound[0] = cost
                    best[0] = list(x)
                else:
                    search(k - 1, cost, xk == 0)
                xk += 1
            x[k] = 0
            return

        up = round(center)
        down = up - 1
        up_open = down_open = True
        while up_open or down_open:
            if up_open and (not down_open or abs(up - center) <= abs(center - down)):
                xk = up
                up += 1
                is_up = True
            else:
                xk = down
                down -= 1
                is_up = False
            cost = partial + (xk - center) ** 2 * rr[k]
            if cost >= bound[0]:
                if is_up:
                    up_open = False
                else:
                    down_open = False
                continue
            x[k] = xk
            if k == 0:
                bound[0] = cost
                best[0] = list(x)
            else:
                search(k - 1, cost, False)
        x[k] = 0

    search(n - 1, 0.0, True)
    return best[0]


def _extended_gcd(a: int, b: int) -> Tuple[int, int, int]:
    """(g, u, v) with u*a + v*b = g >= 0."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r:
        quotient = old_r // r
        old_r, r = r, old_r - quotient * r
        old_u, u = u, old_u - quotient * u
        old_v, v = v, old_v - quotient * v
    if old_r < 0:
        old_r, old_u, old_v = -old_r, -old_u, -old_v
    return old_r, old_u, old_v


def insert_combination(rows: Matrix, start: int, coefficients: Sequence[int]) -> Matrix:
    """
    Put sum(c_i * rows[start + i]) at position start by a unimodular transform.

    Pairs of rows are combined with extended-gcd coefficients, so the block
    keeps spanning the same lattice. The coefficients must be coprime.
    """
    b = [list(row) for row in rows]
    acc = b[start]
    acc_coef = coefficients[0]
    for offset in range(1, len(coefficients)):
        c = coefficients[offset]
        if c == 0:
            continue
        other = b[start + offset]
        g, u, v = _extended_gcd(acc_coef, c)
        new_acc = [(acc_coef // g) * x + (c // g) * y for x, y in zip(acc, other)]
        b[start + offset] = [-v * x + u * y for x, y in zip(acc, other)]
        acc, acc_coef = new_acc, g
    if acc_coef == -1:
        acc = [-x for x in acc]
    elif acc_coef != 1:
        raise ValueError("coefficients must be coprime")
    b[start] = acc
    return b


# ==================== BKZ ====================

def bkz_native(
    rows: Sequence[Sequence[int]],
    block_size: int,
    delta: float = 0.99,
    max_rounds: int = 8,
    time_budget: Optional[float] = None,
) -> Tuple[Matrix, int, bool]:
    """Returns (rows, tours run, partial)."""
    start_time = time.monotonic()
    deadline = start_time + time_budget if time_budget else None
    b, gso = lll_exact(rows, delta)
    dim = len(b)
    block_size = min(block_size, dim)
    tours = 0
    partial = False
    if block_size <= 2:
        return b, tours, partial
    try:
        for _ in range(max_rounds):
            changed = False
            for k in range(dim - 1):
                if deadline is not None and time.monotonic() > deadline:
                    raise _DeadlineReached()
                end = min(k + block_size, dim)
                mu, rr = _float_block(gso, k, end)
                coefficients = enumerate_shortest(mu, rr, BKZ_IMPROVEMENT * rr[0], deadline)
                if coefficients is None:
                    continue
                g = 0
                for c in coefficients:
                    g = math.gcd(g, c)
                coefficients = [c // g for c in coefficients]
                b = insert_combination(b, k, coefficients)
                b, gso = lll_exact(b, delta)
                changed = True
            tours += 1
            logger.debug(f"BKZ-{block_size} tour {tours}: first norm^2 {gso.D[1]}")
            if not changed:
                break
    except _DeadlineReached:
        partial = True
        logger.warning(f"BKZ time budget of {time_budget}s exhausted after {tours} tours")
    return b, tours, partial


# ==================== FPYLLL ====================

def _fpylll_reduce(rows: Sequence[Sequence[int]], params: ReductionParams) -> Tuple[Matrix, int, bool]:
    from fpylll import BKZ, LLL, IntegerMatrix

    start = time.monotonic()
    matrix = IntegerMatrix.from_matrix([[int(v) for v in row] for row in rows])
    LLL.reduction(matrix, delta=params.lll_delta)
    tours = 0
    if params.algorithm == Algorithm.BKZ and min(params.bkz_block, matrix.nrows) > 2:
        param = BKZ.Param(
            block_size=min(params.bkz_block, matrix.nrows),
            strategies=BKZ.DEFAULT_STRATEGY,
            max_loops=params.max_rounds,
            max_time=params.time_budget or 0,
            auto_abort=True,
        )
        BKZ.reduction(matrix, param)
        tours = params.max_rounds
    out = [[0] * matrix.ncols for _ in range(matrix.nrows)]
    matrix.to_matrix(out)
    partial = bool(params.time_budget) and time.monotonic() - start >= params.time_budget
    return out, tours, partial


# ==================== ENTRY POINTS ====================

def resolve_backend(backend: Backend) -> Backend:
    if backend == Backend.AUTO:
        return Backend.FPYLLL if fpylll_available() else Backend.NATIVE
    if backend == Backend.FPYLLL and not fpylll_available():
        raise ConfigError("fpylll backend requested but fpylll is not installed (pip install leaklab[lattice])")
    return backend


def reduce_basis(rows: Sequence[Sequence[int]], params: Optional[ReductionParams] = None) -> ReducedBasis:
    """Reduce with the algorithm and backend named in params."""
    params = params or ReductionParams()
    backend = resolve_backend(params.backend)
    started = time.monotonic()
    if backend == Backend.FPYLLL:
        reduced, tours, partial = _fpylll_reduce(rows, params)
    elif params.algorithm == Algorithm.BKZ:
        reduced, tours, partial = bkz_native(
            rows, params.bkz_block, params.lll_delta, params.max_rounds, params.time_budget
        )
    else:
        reduced, _ = lll_exact(rows, params.lll_delta)
        tours, partial = 0, False
    elapsed = time.monotonic() - started
    logger.debug(f"{params.algorithm.value} ({backend.value}) on dim {len(rows)} took {elapsed:.2f}s")
    return ReducedBasis(rows=reduced, partial=partial, backend=backend, tours=tours, seconds=elapsed)


def lll_reduce(rows: Sequence[Sequence[int]], params: Optional[ReductionParams] = None) -> ReducedBasis:
    params = (params or ReductionParams()).model_copy(update={"algorithm": Algorithm.LLL})
    return reduce_basis(rows, params)


def bkz_reduce(rows: Sequence[Sequence[int]], params: Optional[ReductionParams] = None) -> ReducedBasis:
    params = (params or ReductionParams()).model_copy(update={"algorithm": Algorithm.BKZ})
    return reduce_basis(rows, params)


# ==================== LATTICE HELPERS ====================

def squared_norm(v: Sequence[int]) -> int:
    return _dot(v, v)


def gram_schmidt_norms(rows: Sequence[Sequence[int]]) -> List[Fraction]:
    """Exact squared GSO norms."""
    gso = integral_gso(rows)
    return [gso.squared_norm(i) for i in range(len(rows))]


def lll_bound(rows: Sequence[Sequence[int]]) -> float:
    """log2 of 2^((dim-1)/4) * |det|^(1/dim), the LLL guarantee for the first vector."""
    dim = len(rows)
    gram_det = integral_gso(rows).gram_determinant()
    return (dim - 1) / 4 + math.log2(gram_det) / (2 * dim)


def satisfies_lll_bound(rows: Sequence[Sequence[int]], reduced_first: Sequence[int]) -> bool:
    return math.log2(squared_norm(reduced_first)) / 2 <= lll_bound(rows) + 1e-9


def _solve(matrix: List[List[Fraction]], rhs: List[Fraction]) -> List[Fraction]:
    n = len(matrix)
    aug = [row[:] + [value] for row, value in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise RankDeficiencyError("singular basis")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col] / aug[col][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [aug[i][n] / aug[i][i] for i in range(n)]


def express_in_basis(rows: Sequence[Sequence[int]], vector: Sequence[int]) -> List[Fraction]:
    """Exact coefficients x with sum(x_i * rows[i]) = vector."""
    n = len(rows)
    # solve B^T x = v
    transposed = [[Fraction(rows[i][j]) for i in range(n)] for j in range(n)]
    return _solve(transposed, [Fraction(value) for value in vector])


def determinant(rows: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free elimination."""
    m = [list(row) for row in rows]
    n = len(m)
    sign = 1
    previous = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if m[r][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // previous
        previous = m[k][k]
    return sign * m[n - 1][n - 1] if n else 1
