"""B-kappa embeddings over finite labelled families of parts.

A part can be anything closed under addition and multiplication by a real:
ints, floats, complex numbers, or numpy arrays of function samples. Labels
not present in a family stand for the zero element.

    >>> parts = IndexedParts({1: 3, 2: 5})
    >>> evaluate(parts, 1, 0.0), evaluate(parts, 2, 0.0), evaluate(parts, 7, math.inf)
    (3, 5, 8)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from bkappa.core import INF, disk, embedding_weight, kappa_schedule


class LabelCollisionError(ValueError):
    """Two labels were mapped onto the same target label."""


def _zero_like(value):
    if isinstance(value, np.ndarray):
        return np.zeros_like(value)
    return 0 * value


def _total(values: Sequence[Any]):
    # exact / order independent for scalars so relabelling never changes the sum
    if not values:
        return 0
    if all(isinstance(v, (int, np.integer)) for v in values):
        return sum(int(v) for v in values)
    if all(isinstance(v, (int, float, np.integer, np.floating)) for v in values):
        return math.fsum(float(v) for v in values)
    if all(isinstance(v, (int, float, complex, np.number)) for v in values):
        vals = [complex(v) for v in values]
        return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))
    return reduce(lambda a, b: a + b, values)


@dataclass(frozen=True)
class IndexedParts:
    """Immutable map from integer label to part at zero."""

    parts: Mapping[int, Any]

    def __post_init__(self):
        items = sorted((int(k), v) for k, v in dict(self.parts).items())
        object.__setattr__(self, "parts", MappingProxyType(dict(items)))

    @classmethod
    def from_sequence(cls, values: Sequence[Any], start: int = 1) -> "IndexedParts":
        return cls({start + i: v for i, v in enumerate(values)})

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __getitem__(self, label: int):
        if label in self.parts:
            return self.parts[label]
        if not self.parts:
            return 0
        return _zero_like(next(iter(self.parts.values())))

    @property
    def part_at_infinity(self):
        return _total(list(self.parts.values()))


def evaluate(parts: IndexedParts, n: int, kappa: float):
    """Value of the embedding on branch ``n`` at deformation ``kappa``.

    ``kappa = 0`` returns ``parts[n]`` and ``kappa = inf`` the sum of all
    parts, both exactly; otherwise ``(1 + 2 kappa) sum_j parts[j] b_kappa(n - j, 1/2)``.
    """
    kappa = float(kappa)
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 0.0:
        return parts[n]
    if math.isinf(kappa):
        return parts.part_at_infinity
    terms = [value * embedding_weight(n - j, kappa) for j, value in parts.parts.items()]
    if not terms:
        return 0.0
    return reduce(lambda a, b: a + b, terms)


def shift_labels(parts: IndexedParts, offsets: Mapping[int, int]) -> IndexedParts:
    """Relabel parts; labels missing from ``offsets`` stay put.

    The result is in the same equivalence class: same parts at zero, same
    part at infinity.
    """
    moved: dict[int, Any] = {}
    for label, value in parts.parts.items():
        target = int(offsets.get(label, label))
        if target in moved:
            raise LabelCollisionError(f"label {label} collides at {target}")
        moved[target] = value
    return IndexedParts(moved)


def same_class(a: IndexedParts, b: IndexedParts, atol: float = 1e-12) -> bool:
    """True when both families have equal multisets of parts and equal sums."""
    if len(a) != len(b):
        return False

    def canon(values):
        if all(np.ndim(v) == 0 for v in values):
            return sorted(values, key=lambda v: (complex(v).real, complex(v).imag))
        return sorted(values, key=lambda v: tuple(np.ravel(np.asarray(v)).round(9).tolist()))

    xs = canon(list(a.parts.values()))
    ys = canon(list(b.parts.values()))
    if any(not np.allclose(x, y, rtol=0.0, atol=atol) for x, y in zip(xs, ys)):
        return False
    return bool(np.allclose(a.part_at_infinity, b.part_at_infinity, rtol=0.0, atol=atol))


def loop(f0) -> IndexedParts:
    """Single part connected to itself."""
    return IndexedParts({0: f0})


def homotopy(targets_at_zero: Sequence[Any], target_at_infinity, start: int = 1) -> IndexedParts:
    """Embedding sending each of ``targets_at_zero`` to ``target_at_infinity``.

    Labels ``start .. start+N-1`` carry the given parts and label ``start+N``
    carries the remainder ``Q - sum(P)``.
    """
    family = {start + i: p for i, p in enumerate(targets_at_zero)}
    remainder = target_at_infinity - _total(list(targets_at_zero))
    family[start + len(targets_at_zero)] = remainder
    return IndexedParts(family)


def taylor_embedding(derivatives: Sequence[Any], h: float, shifted) -> IndexedParts:
    """Taylor terms ``h^j f^(j)(x) / j!`` at labels ``0..N`` plus the truncation error.

    ``derivatives[j]`` holds ``f^(j)(x)``; ``shifted`` is ``f(x + h)``. Branch 0
    runs from ``f(x)`` to ``f(x + h)``.
    """
    terms = [d * (h**j / math.factorial(j)) for j, d in enumerate(derivatives)]
    return homotopy(terms, shifted, start=0)


@dataclass(frozen=True)
class MultiScaleSchedule:
    """One increasing time-to-kappa map per label, each starting at 0."""

    schedules: tuple[Callable[[float], float], ...]

    @classmethod
    def exponential(cls, rates: Sequence[float]) -> "MultiScaleSchedule":
        return cls(tuple((lambda t, c=c: kappa_schedule(t, c)) for c in rates))

    def __len__(self) -> int:
        return len(self.schedules)

    def __call__(self, t: float) -> list[float]:
        return [s(t) for s in self.schedules]


def evaluate_multiscale(targets_at_zero, target_at_infinity, sched: MultiScaleSchedule, n: int, t: float):
    """Superposition of loops unfolded on separate time scales.

    ``target_at_infinity`` may be a constant or a callable of ``t``. Label
    ``j`` (1-based) uses ``sched.schedules[j-1]``; the remainder uses the last one.
    """
    N = len(targets_at_zero)
    if len(sched) != N + 1:
        raise ValueError(f"need {N + 1} schedules, got {len(sched)}")
    q = target_at_infinity(t) if callable(target_at_infinity) else target_at_infinity
    kappas = sched(t)
    terms = [p * embedding_weight(n - j, kappas[j - 1]) for j, p in enumerate(targets_at_zero, 1)]
    remainder = q - _total(list(targets_at_zero))
    terms.append(remainder * embedding_weight(n - N - 1, kappas[N]))
    return reduce(lambda a, b: a + b, terms)


def prime_factors(N: int) -> list[int]:
    """Prime factors of ``N`` with multiplicity, nondecreasing (trial division)."""
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    out = []
    d = 2
    while d * d <= N:
        while N % d == 0:
            out.append(d)
            N //= d
        d += 1 if d == 2 else 2
    if N > 1:
        out.append(N)
    return out


def multiplicative_embed(N: int, n: int, kappa: float) -> float:
    """``prod_j p_j ** weight(n - j)`` over the prime factors of ``N`` (labels from 1).

    Branch ``n`` starts at the n-th prime factor and every branch ends at ``N``.
    """
    factors = prime_factors(N)
    kappa = float(kappa)
    if math.isinf(kappa):
        return float(N)
    if kappa == 0.0:
        return float(factors[n - 1]) if 1 <= n <= len(factors) else 1.0
    log_value = math.fsum(
        math.log(pj) * embedding_weight(n - j, kappa) for j, pj in enumerate(factors, 1)
    )
    return math.exp(log_value)


# centres and radii of the three-disk Venn example: (x0, y0, R)
VENN_DISKS = ((3.0, 0.0, 1.0), (0.75, 0.0, 1.5), (1.75, 1.0, 1.0))


def disk_parts(disks, x, y, kappa1: float) -> IndexedParts:
    """Smoothed disks as parts at zero, labelled ``0, 1, ...``."""
    return IndexedParts(
        {j: disk(np.subtract(x, x0), np.subtract(y, y0), r, kappa1) for j, (x0, y0, r) in enumerate(disks)}
    )


def venn_sum(disks, x, y, kappa0: float, kappa1: float, n: int):
    """Embedding of smoothed disks; at ``kappa0 = inf`` it is their plain sum.

    With ``kappa1 = 0`` that sum counts the disks containing ``(x, y)``
    (boundary points count 1/2).
    """
    return evaluate(disk_parts(disks, x, y, kappa1), n, kappa0)


__all__ = [
    "INF",
    "IndexedParts",
    "LabelCollisionError",
    "MultiScaleSchedule",
    "VENN_DISKS",
    "disk_parts",
    "evaluate",
    "evaluate_multiscale",
    "homotopy",
    "loop",
    "multiplicative_embed",
    "prime_factors",
    "same_class",
    "shift_labels",
    "taylor_embedding",
    "venn_sum",
]
