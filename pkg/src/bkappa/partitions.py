"""Partition counts, Dedekind sums and the entropy changes of natural-number embeddings."""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from functools import lru_cache

from bkappa.core import digit
from bkappa.embedding import IndexedParts

DEFAULT_N_MAX = 2000
MULTIPLICATIVE_N_MAX = 10**6


class PartitionTable:
    """Exact p(0..n_max) from Euler's pentagonal-number recurrence.

    The table is immutable once built; :func:`partition_exact` keeps one
    shared instance and grows it on demand up to its configured limit.
    """

    def __init__(self, n_max: int = DEFAULT_N_MAX):
        if n_max < 0:
            raise ValueError("n_max must be >= 0")
        self.n_max = int(n_max)
        self._values = self._build(self.n_max)

    @staticmethod
    def _build(n_max: int) -> tuple[int, ...]:
        p = [0] * (n_max + 1)
        p[0] = 1
        for n in range(1, n_max + 1):
            total = 0
            k = 1
            while True:
                g1 = k * (3 * k - 1) // 2
                if g1 > n:
                    break
                sign = 1 if k % 2 else -1
                total += sign * p[n - g1]
                g2 = g1 + k
                if g2 <= n:
                    total += sign * p[n - g2]
                k += 1
            p[n] = total
        return tuple(p)

    def __getitem__(self, n: int) -> int:
        if n < 0:
            return 0
        if n > self.n_max:
            raise ValueError(f"N={n} exceeds table limit {self.n_max}")
        return self._values[n]

    def __len__(self) -> int:
        return len(self._values)

    @property
    def values(self) -> tuple[int, ...]:
        return self._values


_table: PartitionTable | None = None
_table_lock = threading.Lock()


def partition_table(n_max: int = DEFAULT_N_MAX) -> PartitionTable:
    global _table
    with _table_lock:
        if _table is None or _table.n_max < n_max:
            _table = PartitionTable(max(n_max, DEFAULT_N_MAX))
        return _table


def partition_exact(N: int, n_max: int = DEFAULT_N_MAX) -> int:
    """Number of unrestricted partitions of ``N``, exactly."""
    N = int(N)
    if N < 0:
        raise ValueError("N must be >= 0")
    if N > n_max:
        raise ValueError(f"N={N} exceeds N_max={n_max}")
    return partition_table(n_max)[N]


@lru_cache(maxsize=None)
def dedekind_sum(h: int, k: int) -> Fraction:
    """``s(h, k) = sum_{mu=1}^{k-1} ((mu/k)) ((h mu/k))`` as an exact rational.

    Both factors use ``t - floor(t) - 1/2``; for ``mu`` in ``1..k-1`` the
    first one never hits an integer.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    total = Fraction(0)
    for mu in range(1, k):
        a = Fraction(mu, k)
        b = Fraction(h * mu, k)
        total += (a - math.floor(a) - Fraction(1, 2)) * (b - math.floor(b) - Fraction(1, 2))
    return total


def _kloosterman_like(N: int, k: int) -> float:
    # A_k(N) = sum_{0<=h<k, gcd(h,k)=1} exp(pi i (s(h,k) - 2hN/k)); real by symmetry
    re = im = mag = 0.0
    for h in range(k):
        if math.gcd(h, k) != 1:
            continue
        s = dedekind_sum(h, k)
        # reduce the phase mod 2 exactly before going to floats
        phase = (s - Fraction(2 * h * N, k)) % 2
        angle = math.pi * float(phase)
        re += math.cos(angle)
        im += math.sin(angle)
        mag += 1.0
    if abs(im) > 1e-6 * max(mag, 1.0):
        raise ArithmeticError(f"exponential sum A_{k}({N}) has imaginary residue {im}")
    return re


def _sinh_term_derivative(N: float, k: int) -> float:
    # d/dx [ sinh(c sqrt(u)) / sqrt(u) ] at x = N, u = x - 1/24, c = (pi/k) sqrt(2/3)
    u = N - 1.0 / 24.0
    c = (math.pi / k) * math.sqrt(2.0 / 3.0)
    su = math.sqrt(u)
    return c * math.cosh(c * su) / (2.0 * u) - math.sinh(c * su) / (2.0 * u * su)


def partition_hrr(N: int, K: int) -> float:
    """Rademacher's convergent series for p(N), truncated after ``K`` outer terms."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if K < 1:
        raise ValueError("K must be >= 1")
    total = 0.0
    for k in range(1, K + 1):
        total += _kloosterman_like(N, k) * math.sqrt(k) * _sinh_term_derivative(N, k)
    return total / (math.pi * math.sqrt(2.0))


def hrr_terms(N: int) -> int:
    """Number of outer terms, ``ceil(2 sqrt(N))``, enough to round to p(N) for N <= 200."""
    return max(1, math.ceil(2.0 * math.sqrt(N)))


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


@lru_cache(maxsize=4096)
def _count_factorizations(n: int, smallest: int) -> int:
    # factorizations of n into nondecreasing factors, all >= smallest
    count = 1  # n itself
    d = smallest
    while d * d <= n:
        if n % d == 0:
            count += _count_factorizations(n // d, d)
        d += 1
    return count


def multiplicative_partitions(N: int) -> int:
    """Unordered factorizations of ``N`` into factors >= 2, counting ``N`` itself."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > MULTIPLICATIVE_N_MAX:
        raise ValueError(f"N={N} exceeds {MULTIPLICATIVE_N_MAX}")
    if N == 1:
        return 1
    return _count_factorizations(N, 2)


def entropy_change_additive(M: int, N: int) -> float:
    """``ln(p(N) / p(M))``: information lost sending part ``M`` to sum ``N``."""
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    table = partition_table(max(M, N))
    return math.log(table[N]) - math.log(table[M])


def entropy_change_multiplicative(M: int, N: int) -> float:
    """``ln(m(N) / m(M))`` for a factor ``M`` of ``N``."""
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    if N % M:
        raise ValueError(f"{M} does not divide {N}")
    return math.log(multiplicative_partitions(N)) - math.log(multiplicative_partitions(M))


def radix_partition(N: int, p: int, grouping) -> IndexedParts:
    """Split ``N`` into parts made of groups of its radix-``p`` digits.

    ``grouping`` is a sequence of digit-index collections partitioning
    ``0..floor(log_p N)``; group ``i`` becomes the part at label ``i + 1``.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be positive")
    top = 0
    while p ** (top + 1) <= N:
        top += 1
    groups = [sorted(int(k) for k in g) for g in grouping]
    flat = [k for g in groups for k in g]
    if sorted(flat) != list(range(top + 1)) or any(not g for g in groups):
        raise ValueError(f"grouping must partition digit indices 0..{top}")
    return IndexedParts(
        {i + 1: sum(p**k * digit(p, k, N) for k in g) for i, g in enumerate(groups)}
    )
