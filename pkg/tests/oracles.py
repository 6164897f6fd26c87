"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import cmath
import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np


def durand_kerner(coeffs, tol=1e-14, max_iter=5000):
    """All roots of the polynomial with ascending ``coeffs`` (Weierstrass iteration)."""
    a = np.asarray(coeffs, dtype=complex)
    a = a / a[-1]
    N = a.size - 1
    radius = 1 + np.max(np.abs(a[:-1]))
    z = radius * np.exp(2j * np.pi * (np.arange(N) + 0.25) / N) * (0.4 + 0.9j) / abs(0.4 + 0.9j)
    for _ in range(max_iter):
        biggest = 0.0
        for i in range(N):
            num = np.polyval(a[::-1], z[i])
            den = np.prod([z[i] - z[j] for j in range(N) if j != i])
            step = num / den
            z[i] -= step
            biggest = max(biggest, abs(step))
        if biggest < tol * (1 + np.max(np.abs(z))):
            break
    # a few Newton steps per root to sharpen simple roots
    da = np.polyder(a[::-1])
    for i in range(N):
        for _ in range(3):
            d = np.polyval(da, z[i])
            if d == 0:
                break
            z[i] -= np.polyval(a[::-1], z[i]) / d
    return z


def matched_distance(xs, ys):
    """Largest distance under the best one-to-one matching (brute force for small sets)."""
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        return math.inf
    if len(xs) <= 7:
        return min(max(abs(x - y) for x, y in zip(xs, perm)) for perm in itertools.permutations(ys))
    # greedy on sorted distance is exact enough for well separated sets
    pool = list(ys)
    worst = 0.0
    for x in xs:
        j = min(range(len(pool)), key=lambda i: abs(pool[i] - x))
        worst = max(worst, abs(pool.pop(j) - x))
    return worst


def exact_digit(p, k, x):
    x = Fraction(x)
    s = Fraction(p) ** k
    return math.floor(x / s) - p * math.floor(x / (s * p))


def fractal_reference(value, p, lam, n, depth):
    """Series for a real value in exact rationals (digits of the stored double)."""
    if value == 0:
        return Fraction(0)
    v = Fraction(abs(value))
    K = 0
    while Fraction(p) ** (K + 1) <= v:
        K += 1
    while Fraction(p) ** K > v:
        K -= 1
    total = Fraction(0)
    for k in range(K, K - depth, -1):
        total += Fraction(p) ** k * exact_digit(p, k, v) * ((abs(k) + n) % lam)
    sign = 1 if value > 0 else -1
    return sign * Fraction(2, lam * (lam - 1)) * total


def brute_partitions(N):
    """Partitions of N counted by listing them."""
    def gen(n, largest):
        if n == 0:
            yield ()
            return
        for first in range(min(n, largest), 0, -1):
            for rest in gen(n - first, first):
                yield (first,) + rest
    return sum(1 for _ in gen(N, N))


def brute_factorizations(N):
    """Multisets of factors >= 2 whose product is N (N itself included)."""
    found = set()

    def rec(n, factors):
        if n == 1:
            if factors:
                found.add(tuple(sorted(factors)))
            return
        for d in range(2, n + 1):
            if n % d == 0:
                rec(n // d, factors + [d])

    rec(N, [])
    return len(found) if N > 1 else 1


def mp_weight(offset, kappa):
    if kappa == 0:
        return mpmath.mpf(1 if offset == 0 else 0)
    k = mpmath.mpf(kappa)
    return (1 + 2 * k) * (mpmath.tanh((offset + mpmath.mpf(1) / 2) / k)
                          - mpmath.tanh((offset - mpmath.mpf(1) / 2) / k)) / 2


def mp_flow_velocity(coeffs, z, kappa, theta=0.0, perturb=False):
    """Flow velocity from the defining sums at 40 digits; derivatives by mpmath.diff."""
    with mpmath.workdps(40):
        a = [mpmath.mpc(c) for c in coeffs]
        N = len(a) - 1
        z = mpmath.mpc(z)
        P0 = a[N] * z**N + a[0]
        P1 = sum(a[k] * z**k for k in range(1, N))
        dP0 = N * a[N] * z ** (N - 1)
        dP1 = sum(k * a[k] * z ** (k - 1) for k in range(1, N))
        kick = mpmath.expjpi(2 * mpmath.mpf(theta)) if perturb else 0
        dA = mpmath.diff(lambda k: mp_weight(0, k), kappa)
        dC = mpmath.diff(lambda k: mp_weight(1, k), kappa)
        A, C = mp_weight(0, kappa), mp_weight(1, kappa)
        return complex(-(dA * (P0 + kick) + dC * (P1 - kick)) / (A * dP0 + C * dP1))


def quadratic_knet(a, kappa):
    """Both zeros of A(a2 z^2 + a0) + C a1 z, from the quadratic formula."""
    if kappa == 0:
        A, C = 1.0, 0.0
    else:
        A = (1 + 2 * kappa) * (math.tanh(0.5 / kappa) - math.tanh(-0.5 / kappa)) / 2
        C = (1 + 2 * kappa) * (math.tanh(1.5 / kappa) - math.tanh(0.5 / kappa)) / 2
    a0, a1, a2 = (complex(c) for c in a)
    disc = cmath.sqrt((C * a1) ** 2 - 4 * A * A * a2 * a0)
    return ((-C * a1 + disc) / (2 * A * a2), (-C * a1 - disc) / (2 * A * a2))


def quadratic_critical_kappa(a, kappa_max, samples=20000):
    """kappa in (0, kappa_max] where the two branches come closest."""
    ks = np.linspace(kappa_max / samples, kappa_max, samples)
    gaps = [abs(b0 - b1) for b0, b1 in (quadratic_knet(a, k) for k in ks)]
    return float(ks[int(np.argmin(gaps))])


# degree 19 test case: eighteen simple roots and a triple root at i
NINETEEN_ROOTS = [1.5, 2, 3 - 3j, 5 + 4j, 5, -1, -1 - 2j, -3j, -4j, 0.05j, -2 + 6j, -3, -1 + 4j,
                  2 + 5j, 4 + 6j, -2 - 3j, 1j, 1j, 1j]


def expand_roots(roots):
    """Ascending monic coefficients of prod (z - r), expanded in exact rationals."""
    from fractions import Fraction as F
    coeffs = [(F(1), F(0))]
    for r in roots:
        r = complex(r)
        rr, ri = F(r.real).limit_denominator(10**6), F(r.imag).limit_denominator(10**6)
        new = [(F(0), F(0))] * (len(coeffs) + 1)
        for k, (cr, ci) in enumerate(coeffs):
            # (z - r) * c z^k
            sr, si = new[k + 1]
            new[k + 1] = (sr + cr, si + ci)
            sr, si = new[k]
            new[k] = (sr - (cr * rr - ci * ri), si - (cr * ri + ci * rr))
        coeffs = new
    return [complex(float(a), float(b)) for a, b in coeffs]
