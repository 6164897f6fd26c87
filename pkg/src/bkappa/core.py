"""Scalar building blocks: the B-function, its kappa deformation, digit functions.

Every function here is pure. Functions taking ``x``/``y`` accept either
Python scalars or numpy arrays; scalars come back as plain floats.

``kappa`` may be ``0`` or ``math.inf``; both are dispatched to their exact
limits instead of being pushed through ``tanh(./kappa)``.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

INF = math.inf

# beyond this |argument| tanh is +-1 to double precision
_TANH_SATURATION = 20.0


def _sign(t):
    if np.ndim(t) == 0:
        t = float(t)
        return (t > 0) - (t < 0)
    return np.sign(t)


def _tanh(u):
    if np.ndim(u) == 0:
        u = float(u)
        if u > _TANH_SATURATION:
            return 1.0
        if u < -_TANH_SATURATION:
            return -1.0
        return math.tanh(u)
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) > _TANH_SATURATION, np.sign(u), np.tanh(u))


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not kappa >= 0.0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    return kappa


def b_function(x, y):
    """Rectangular indicator ``(sign(x+y) - sign(x-y)) / 2``.

    Equals ``sign(y)`` strictly inside ``(-|y|, |y|)``, ``sign(y)/2`` on the
    boundary and 0 outside, with the convention ``t/|t| = 0`` at ``t = 0``.
    """
    out = 0.5 * (_sign(x + y) - _sign(x - y))
    return float(out) if np.ndim(out) == 0 else out


def b_kappa(x, y, kappa: float):
    """Smoothed indicator ``[tanh((x+y)/kappa) - tanh((x-y)/kappa)] / 2``.

    ``kappa = 0`` returns :func:`b_function` exactly and ``kappa = inf``
    returns 0 (the function decays like ``y/kappa``).
    """
    kappa = _check_kappa(kappa)
    if kappa == 0.0:
        return b_function(x, y)
    if math.isinf(kappa):
        out = 0.0 * np.asarray(x, dtype=float) * np.asarray(y, dtype=float)
        return float(out) if np.ndim(out) == 0 else out
    out = 0.5 * (_tanh((x + y) / kappa) - _tanh((x - y) / kappa))
    return float(out) if np.ndim(out) == 0 else out


def db_kappa_dkappa(j: float, kappa: float) -> float:
    """Derivative of ``b_kappa(j, 1/2, kappa)`` with respect to ``kappa``."""
    kappa = _check_kappa(kappa)
    if kappa == 0.0 or math.isinf(kappa):
        return 0.0
    tp = _tanh((j + 0.5) / kappa)
    tm = _tanh((j - 0.5) / kappa)
    return ((j + 0.5) * tp * tp - (j - 0.5) * tm * tm - 1.0) / (2.0 * kappa * kappa)


def embedding_weight(offset: int, kappa: float) -> float:
    """Branch weight ``(1 + 2 kappa) b_kappa(offset, 1/2, kappa)``.

    Tends to the Kronecker delta at ``kappa = 0`` and to 1 as ``kappa -> inf``.
    """
    kappa = _check_kappa(kappa)
    if math.isinf(kappa):
        return 1.0
    return (1.0 + 2.0 * kappa) * b_kappa(offset, 0.5, kappa)


def embedding_weight_dkappa(offset: int, kappa: float) -> float:
    """``d/dkappa`` of :func:`embedding_weight`."""
    kappa = _check_kappa(kappa)
    if math.isinf(kappa):
        return 0.0
    return 2.0 * b_kappa(offset, 0.5, kappa) + (1.0 + 2.0 * kappa) * db_kappa_dkappa(
        offset, kappa
    )


def _check_radix(p: int) -> int:
    if int(p) != p or p < 2:
        raise ValueError(f"radix must be an integer >= 2, got {p!r}")
    return int(p)


def digit(p: int, k: int, x) -> int:
    """k-th radix-``p`` digit of ``x >= 0``: ``floor(x/p^k) - p floor(x/p^(k+1))``.

    Evaluated in exact rational arithmetic (a float is converted to the dyadic
    rational it stores), so the result always lies in ``0..p-1``.
    """
    p = _check_radix(p)
    k = int(k)
    if isinstance(x, (int, np.integer)):
        x = int(x)
    else:
        x = Fraction(float(x)) if not isinstance(x, Fraction) else x
    if x < 0:
        raise ValueError("digit() needs x >= 0; split the sign off first")
    scale = Fraction(p) ** k
    return int(math.floor(x / scale) - p * math.floor(x / (scale * p)))


def complex_digit(p: int, k: int, z: complex) -> complex:
    """Signed radix-``p`` digits of the real and imaginary parts of ``z``."""
    z = complex(z)
    re = _sign(z.real) * digit(p, k, abs(z.real))
    im = _sign(z.imag) * digit(p, k, abs(z.imag))
    return complex(re, im)


def disk(x, y, radius: float, kappa: float):
    """Smoothed characteristic function of the disk of ``radius`` at the origin.

    At ``kappa = 0``: 1 inside, 1/2 on the circle, 0 outside.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        rho = math.hypot(float(x), float(y))
    else:
        rho = np.hypot(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return b_kappa(rho, radius, kappa)


def kappa_schedule(t: float, rate: float = 1.0) -> float:
    """Monotone time-to-kappa map ``exp(rate t) - 1``; 0 at ``t = 0``."""
    t = float(t)
    if t < 0:
        raise ValueError("t must be >= 0")
    return math.expm1(rate * t)
