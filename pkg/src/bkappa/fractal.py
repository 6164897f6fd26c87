"""p-lambda-n fractal decomposition of real and complex functions.

The radix-``p`` digits of ``|f|`` are dealt out to ``lambda`` objects: the
digit at position ``k`` goes to object ``n`` with weight
``d_lambda(0, |k| + n) = (|k| + n) mod lambda``. Those weights sum to
``lambda (lambda - 1) / 2`` over ``n``, so after the prefactor
``2 / (lambda (lambda - 1))`` the objects add back up to ``f``:

    F_n f(x) = 2 sign f(x) / (lambda (lambda - 1)) sum_k p^k d_p(k, |f(x)|) d_lambda(0, |k| + n)

The sum runs over ``depth`` digits starting from ``floor(log_p |f|)``. The
complex version applies the same weights to the signed digits of the real
and imaginary parts, anchored at the modulus.
"""

from __future__ import annotations

import csv
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from bkappa import _backend, _pykernels
from bkappa.embedding import IndexedParts, evaluate

# |cos z| below this counts as a pole of tan
TAN_POLE_TOL = 1e-10
SNAP_RTOL = 1e-15


class SingularValueError(ArithmeticError):
    """The mother function is not finite at the requested point."""


def default_depth(p: int) -> int:
    """Digits needed for a relative truncation error of about 1e-12."""
    return math.ceil(12.0 / math.log10(p)) + 1


# ------------------------------------------------------------ mother functions


@dataclass(frozen=True)
class MotherFunction:
    """A vectorised function plus an optional predicate marking singular points."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    singular: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        return self.func(x)

    def sample(self, points) -> tuple[np.ndarray, np.ndarray]:
        """``(values, bad)``; ``bad`` marks singular or non-finite points."""
        pts = np.asarray(points)
        with np.errstate(all="ignore"):
            values = np.asarray(self.func(pts))
        bad = ~np.isfinite(values)
        if self.singular is not None:
            bad |= np.asarray(self.singular(pts), dtype=bool)
        return values, bad

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "MotherFunction":
        """Polynomial with ascending ``coeffs``."""
        c = np.asarray(coeffs)
        if c.size == 0:
            raise ValueError("need at least one coefficient")
        return cls("poly:" + ",".join(_fmt(v) for v in c), lambda x: np.polyval(c[::-1], x))

    @classmethod
    def table(cls, xs: Sequence[float], values: Sequence[complex]) -> "MotherFunction":
        """Piecewise-linear interpolation of samples; NaN outside ``[xs[0], xs[-1]]``."""
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(values)
        if xs.ndim != 1 or xs.size < 2 or xs.shape != vs.shape or np.any(np.diff(xs) <= 0):
            raise ValueError("table needs >= 2 increasing abscissae with matching values")

        def f(x):
            x = np.asarray(x)
            if np.iscomplexobj(x):
                if np.any(x.imag != 0):
                    raise ValueError("tabulated functions are defined on the real line only")
                x = x.real
            re = np.interp(x, xs, vs.real, left=np.nan, right=np.nan)
            if np.iscomplexobj(vs):
                return re + 1j * np.interp(x, xs, vs.imag, left=np.nan, right=np.nan)
            return re

        return cls("table", f)


def _fmt(v) -> str:
    return repr(float(v)) if np.isrealobj(v) else repr(complex(v))


def _tan_pole(z):
    return np.abs(np.cos(z)) < TAN_POLE_TOL


MOTHERS: dict[str, MotherFunction] = {
    "log1p": MotherFunction("log1p", np.log1p),
    "sin": MotherFunction("sin", np.sin),
    "tan": MotherFunction("tan", np.tan, _tan_pole),
}


def parse_mother(text: str) -> MotherFunction:
    """``log1p``, ``sin``, ``tan`` or ``poly:c0,c1,...`` (ascending powers)."""
    if text in MOTHERS:
        return MOTHERS[text]
    if text.startswith("poly:"):
        try:
            coeffs = [complex(s.strip().replace("i", "j")) for s in text[5:].split(",")]
        except ValueError as exc:
            raise ValueError(f"bad polynomial coefficients in {text!r}") from exc
        if all(c.imag == 0 for c in coeffs):
            return MotherFunction.polynomial([c.real for c in coeffs])
        return MotherFunction.polynomial(coeffs)
    raise ValueError(f"unknown mother function {text!r}; expected one of {sorted(MOTHERS)} or poly:...")


# -------------------------------------------------------------------- series


def digit_anchor(values: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """``floor(log_p v)`` for positive ``v``, with boundary snapping.

    Returns ``(anchors, values)``; a value within ``SNAP_RTOL`` below a power
    of ``p`` is replaced by that power.
    """
    v = np.array(values, dtype=float, copy=True)
    pos = v > 0
    safe = np.where(pos, v, 1.0)
    K = np.floor(np.log(safe) / math.log(p)).astype(np.int64)
    pf = float(p)
    # correct the float logarithm by direct comparison with the powers
    for _ in range(2):
        lo = np.power(pf, K.astype(float))
        K = np.where(safe < lo, K - 1, K)
        hi = np.power(pf, (K + 1).astype(float))
        K = np.where(safe >= hi, K + 1, K)
    hi = np.power(pf, (K + 1).astype(float))
    snap = pos & (hi - safe <= SNAP_RTOL * safe)
    v = np.where(snap, hi, v)
    K = np.where(snap, K + 1, K)
    return np.where(pos, K, 0), v


@dataclass(frozen=True)
class FractalSpec:
    """Object ``n`` of the decomposition of ``mother`` with radix ``p`` into ``lam`` parts."""

    p: int
    lam: int
    n: int
    mother: MotherFunction
    depth: int | None = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError("p must be an integer >= 2")
        if int(self.lam) != self.lam or self.lam < 2:
            raise ValueError("lambda must be an integer >= 2")
        if not 0 <= self.n <= self.lam - 1:
            raise ValueError(f"n must lie in 0..{self.lam - 1}")
        if self.depth is not None and self.depth < 1:
            raise ValueError("depth must be >= 1")

    @property
    def digits(self) -> int:
        return self.depth if self.depth is not None else default_depth(self.p)

    @property
    def prefactor(self) -> float:
        return 2.0 / (self.lam * (self.lam - 1))

    def sample(self, points, complex_plane: bool = False, workers: int = 1) -> np.ndarray:
        """Object values at ``points``; NaN where the mother function is singular."""
        f, bad = self.mother.sample(points)
        out = series(f, self.p, self.lam, self.n, self.digits, complex_plane, workers)
        return np.where(bad, np.nan, out)


def _sums(mags, anchors, p, lam, n, depth, workers):
    kern = _backend.kernels
    flat_m = np.ascontiguousarray(mags, dtype=float).ravel()
    flat_k = np.ascontiguousarray(anchors, dtype=np.int64).ravel()
    if workers <= 1 or flat_m.size < 4096:
        out = kern.fractal_sums(flat_m, flat_k, p, lam, n, depth)
    else:
        edges = np.linspace(0, flat_m.size, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(
                lambda i: kern.fractal_sums(flat_m[edges[i]:edges[i + 1]], flat_k[edges[i]:edges[i + 1]],
                                            p, lam, n, depth),
                range(workers),
            )
            out = np.concatenate(list(parts))
    # the double fast path declines deep windows and extreme magnitudes
    slow = np.flatnonzero(np.isnan(out))
    if slow.size:
        out[slow] = _pykernels.fractal_sums_exact(flat_m[slow], flat_k[slow], p, lam, n, depth)
    return np.asarray(out).reshape(np.shape(mags))


def series(f, p: int, lam: int, n: int, depth: int, complex_plane: bool = False, workers: int = 1):
    """Truncated digit series of the values ``f`` (non-finite entries give NaN)."""
    f = np.asarray(f)
    finite = np.isfinite(f)
    fz = np.where(finite, f, 0.0)
    pref = 2.0 / (lam * (lam - 1))
    if complex_plane:
        fz = fz.astype(np.complex128)
        K, _ = digit_anchor(np.abs(fz), p)
        re = _sums(np.abs(fz.real), K, p, lam, n, depth, workers)
        im = _sums(np.abs(fz.imag), K, p, lam, n, depth, workers)
        out = pref * (np.sign(fz.real) * re + 1j * np.sign(fz.imag) * im)
    else:
        if np.iscomplexobj(fz):
            if np.any(fz.imag != 0):
                raise ValueError("complex values need complex_plane=True")
            fz = fz.real
        K, mag = digit_anchor(np.abs(fz), p)
        out = pref * np.sign(fz) * _sums(mag, K, p, lam, n, depth, workers)
    return np.where(finite, out, np.nan)


def _scalar(value) -> complex | float:
    return complex(value) if np.iscomplexobj(value) else float(value)


def fractal_real(spec: FractalSpec, x: float) -> float:
    """``F_n f(x)`` for real ``x``; 0 where ``f(x) = 0``."""
    f, bad = spec.mother.sample(np.array([float(x)]))
    if bad[0]:
        raise SingularValueError(f"{spec.mother.name} is not finite at x={x}")
    if np.iscomplexobj(f) and f[0].imag != 0:
        raise ValueError("mother function is complex here; use fractal_complex")
    return float(series(np.real(f), spec.p, spec.lam, spec.n, spec.digits)[0])


def fractal_complex(spec: FractalSpec, z: complex) -> complex:
    """``F_n f(z)`` with the signed digits of ``Re f`` and ``Im f``."""
    f, bad = spec.mother.sample(np.array([complex(z)]))
    if bad[0]:
        raise SingularValueError(f"{spec.mother.name} is not finite at z={z}")
    return complex(series(f, spec.p, spec.lam, spec.n, spec.digits, complex_plane=True)[0])


def truncation_bound(f, p: int, depth: int) -> np.ndarray:
    """Geometric bound ``p^(K - D + 1) p / (p - 1)`` on the dropped digits (0 where f = 0)."""
    mag = np.abs(np.asarray(f))
    K, _ = digit_anchor(mag, p)
    b = np.power(float(p), (K - depth + 1).astype(float)) * p / (p - 1)
    return np.where(mag > 0, b, 0.0)


@dataclass(frozen=True)
class FractalFamily:
    """All ``lam`` objects of one decomposition."""

    p: int
    lam: int
    mother: MotherFunction
    depth: int | None = None

    def spec(self, n: int) -> FractalSpec:
        return FractalSpec(self.p, self.lam, n, self.mother, self.depth)

    @property
    def digits(self) -> int:
        return self.spec(0).digits

    def objects(self, points, complex_plane: bool = False, workers: int = 1) -> np.ndarray:
        """Array of shape ``(lam,) + shape(points)``."""
        f, bad = self.mother.sample(points)
        objs = [series(f, self.p, self.lam, n, self.digits, complex_plane, workers) for n in range(self.lam)]
        return np.where(bad, np.nan, np.stack(objs))

    def reconstruction_residual(self, points, complex_plane: bool = False) -> np.ndarray:
        """``|sum_n F_n - f|`` pointwise (NaN at singular points)."""
        f, bad = self.mother.sample(points)
        total = self.objects(points, complex_plane).sum(axis=0)
        return np.where(bad, np.nan, np.abs(total - f))


def fractal_embedding(family: FractalFamily, m: int, kappa: float, points, complex_plane: bool = False):
    """Embedding carrying object ``m`` at ``kappa = 0`` to the mother function at infinity."""
    objs = family.objects(points, complex_plane)
    parts = IndexedParts({n: objs[n] for n in range(family.lam)})
    return evaluate(parts, m, kappa)


@dataclass(frozen=True)
class FractalEmbedding:
    """Grid source for :func:`fractal_embedding` at fixed ``m`` and ``kappa``."""

    family: FractalFamily
    m: int
    kappa: float

    def sample(self, points, complex_plane: bool = False, workers: int = 1) -> np.ndarray:
        return np.asarray(fractal_embedding(self.family, self.m, self.kappa, points, complex_plane))


# ---------------------------------------------------------------------- grids


@dataclass(frozen=True)
class Grid:
    """Rectangular sample grid; row ``i`` is ``y = ys[i]`` and column ``j`` is ``x = xs[j]``.

    ``height == 1`` with ``ymin == ymax == 0`` is a plain real interval.
    """

    xmin: float
    xmax: float
    width: int
    ymin: float = 0.0
    ymax: float = 0.0
    height: int = 1
    complex_plane: bool = False

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid needs at least one sample per axis")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.width)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.ymin, self.ymax, self.height)

    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        return X + 1j * Y if self.complex_plane else X

    @classmethod
    def interval(cls, text: str) -> "Grid":
        """``a:b:n`` on the real line."""
        try:
            a, b, n = text.split(":")
            return cls(float(a), float(b), int(n))
        except ValueError as exc:
            raise ValueError(f"expected a:b:n, got {text!r}") from exc

    @classmethod
    def square(cls, text: str) -> "Grid":
        """``z0:z1:n`` with complex corners, e.g. ``-2-2i:2+2i:512``."""
        try:
            a, b, n = text.split(":")
            z0, z1 = parse_complex(a), parse_complex(b)
            n = int(n)
        except ValueError as exc:
            raise ValueError(f"expected z0:z1:n, got {text!r}") from exc
        return cls(z0.real, z1.real, n, z0.imag, z1.imag, n, complex_plane=True)


def parse_complex(text: str) -> complex:
    """``a+bi`` style literal (``i`` or ``j``)."""
    t = text.strip().replace(" ", "")
    if not t:
        raise ValueError("empty number")
    t = t.replace("i", "j")
    if t.endswith("j") and (len(t) == 1 or t[-2] in "+-"):
        t = t[:-1] + "1j"
    return complex(t)


@dataclass
class GridTable:
    grid: Grid
    values: np.ndarray  # complex, shape (height, width); NaN marks flagged cells

    @property
    def flagged(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["x", "y", "re", "im"])
        xs, ys = self.grid.xs, self.grid.ys
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                v = self.values[i, j]
                w.writerow([repr(float(x)), repr(float(y)), repr(float(v.real)), repr(float(v.imag))])

    def to_bytes(self) -> bytes:
        g = self.grid
        header = struct.pack("<6d", g.width, g.height, g.xmin, g.xmax, g.ymin, g.ymax)
        body = np.empty((g.height, g.width, 2), dtype="<f8")
        body[..., 0] = self.values.real
        body[..., 1] = self.values.imag
        return header + body.tobytes()


def read_csv_table(stream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(x, y, value)`` columns from a CSV written by :meth:`GridTable.write_csv`."""
    r = csv.reader(stream)
    if next(r) != ["x", "y", "re", "im"]:
        raise ValueError("unexpected CSV header")
    rows = np.array([[float(s) for s in row] for row in r]).reshape(-1, 4)
    return rows[:, 0], rows[:, 1], rows[:, 2] + 1j * rows[:, 3]


def read_binary_table(data: bytes) -> tuple[tuple[float, ...], np.ndarray]:
    """``(header, values)`` from :meth:`GridTable.to_bytes`; header is
    ``(width, height, xmin, xmax, ymin, ymax)``."""
    header = struct.unpack_from("<6d", data)
    w, h = int(header[0]), int(header[1])
    body = np.frombuffer(data, dtype="<f8", offset=48)
    if body.size != 2 * w * h:
        raise ValueError("binary table size does not match its header")
    body = body.reshape(h, w, 2)
    return header, body[..., 0] + 1j * body[..., 1]


def sample_grid(source, grid: Grid, workers: int = 1) -> GridTable:
    """Evaluate a mother function, a :class:`FractalSpec` or a :class:`FractalEmbedding` on ``grid``."""
    pts = grid.points()
    if isinstance(source, MotherFunction):
        v, bad = source.sample(pts)
        vals = np.where(bad, np.nan, v)
    else:
        vals = source.sample(pts, grid.complex_plane, workers)
    vals = np.asarray(vals, dtype=np.complex128)
    vals = np.where(np.isfinite(vals), vals, complex(np.nan, np.nan))
    return GridTable(grid, vals)
