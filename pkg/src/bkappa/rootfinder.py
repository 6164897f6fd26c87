"""Global simultaneous root finder for univariate complex polynomials.

The polynomial ``P = P0 + P1`` is split into ``P0 = a_N z^N + a_0`` and the
middle terms ``P1``, and embedded as

    R(z, kappa) = (1 + 2 kappa) [P0(z) b_kappa(0, 1/2) + P1(z) b_kappa(1, 1/2)],

which equals ``P0`` at ``kappa = 0`` and ``P`` as ``kappa -> inf``. The N roots
of ``P0`` sit on a regular N-gon; each is carried along the zero set of ``R``
(the zero kappa-net) by the flow ``dz/dkappa = -R_kappa / R_z``, integrated
with fixed-step Euler. A random phase ``e^{2 pi i theta}`` added to ``P0``
and subtracted from ``P1`` at every step keeps branches apart without
changing either end of the embedding.

After ``kappa_max`` the paths are continued in ``tau = 1/kappa`` down to
``tau = 0`` (predictor plus Newton corrector on ``R``), then polished with
Newton on ``P`` and clustered into roots with multiplicities.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from bkappa import _backend
from bkappa.core import embedding_weight, embedding_weight_dkappa


class SingularJacobianError(ArithmeticError):
    """``dR/dz`` vanished (to tolerance) where the flow was requested."""


# ---------------------------------------------------------------- polynomials


@dataclass(frozen=True)
class Polynomial:
    """Dense complex polynomial, coefficients in ascending powers."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).ravel()
        if c.size == 0 or c[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, z):
        out = np.zeros_like(np.asarray(z, dtype=np.complex128)) + self.coeffs[-1]
        for a in self.coeffs[-2::-1]:
            out = out * z + a
        return complex(out) if np.ndim(out) == 0 else out

    def derivative(self, order: int = 1) -> "Polynomial":
        c = self.coeffs
        for _ in range(order):
            if c.size == 1:
                return _ZERO_POLY
            c = c[1:] * np.arange(1, c.size)
        return Polynomial(c)

    def scale(self, z) -> float:
        """``sum |a_k| max(1, |z|)^k``: magnitude of the rounding floor near ``z``."""
        r = max(1.0, abs(z))
        return float(np.sum(np.abs(self.coeffs) * r ** np.arange(self.coeffs.size)))

    def split(self) -> "SplitParts":
        return SplitParts.from_polynomial(self)


class _ZeroPolynomial:
    degree = -1
    coeffs = np.zeros(1, dtype=np.complex128)

    def __call__(self, z):
        return 0j

    def derivative(self, order: int = 1):
        return self


_ZERO_POLY = _ZeroPolynomial()


@dataclass(frozen=True)
class SplitParts:
    """``P0 = a_N z^N + a_0`` and ``P1 = a_{N-1} z^{N-1} + ... + a_1 z``."""

    p0: np.ndarray
    p1: np.ndarray

    @classmethod
    def from_polynomial(cls, P: Polynomial) -> "SplitParts":
        p0 = np.zeros_like(P.coeffs)
        p0[0] = P.coeffs[0]
        p0[-1] = P.coeffs[-1]
        p1 = P.coeffs - p0
        return cls(p0, p1)

    def evaluate(self, z: complex) -> tuple[complex, complex, complex, complex]:
        """``(P0, P1, P0', P1')`` at ``z``."""
        out = []
        for c in (self.p0, self.p1):
            v = 0j
            d = 0j
            for a in c[::-1]:
                d = d * z + v
                v = v * z + a
            out.append((v, d))
        (P0, dP0), (P1, dP1) = out
        return P0, P1, dP0, dP1


def normalize(coeffs: Sequence[complex]) -> tuple[Polynomial, int]:
    """Drop zero high-order coefficients and factor out ``z^k`` at the origin.

    Returns the reduced polynomial (nonzero constant term) and ``k``. When
    every root is at the origin the reduced polynomial is a constant.
    """
    c = np.array(coeffs, dtype=np.complex128).ravel()
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise ValueError("all coefficients are zero")
    c = c[: nz[-1] + 1]
    if c.size < 2:
        raise ValueError("polynomial is constant; degree must be >= 1")
    k = int(nz[0])
    return Polynomial(c[k:]), k


def initial_roots(P: Polynomial) -> np.ndarray:
    """Roots of ``a_N z^N + a_0``: a regular N-gon of radius ``|a_0/a_N|^(1/N)``."""
    N = P.degree
    a0, aN = P.coeffs[0], P.coeffs[-1]
    if N < 1 or a0 == 0:
        raise ValueError("need degree >= 1 and a nonzero constant term")
    ratio = a0 / aN
    radius = abs(ratio) ** (1.0 / N)
    angle = np.angle(-ratio)
    m = np.arange(N)
    return radius * np.exp(1j * (angle + 2.0 * np.pi * m) / N)


# ----------------------------------------------------------------------- flow


def flow_velocity(parts: SplitParts, z: complex, kappa: float, theta: float = 0.0,
                  perturb: bool = False, sing_tol: float = 1e-30) -> complex:
    """``dz/dkappa`` on the zero kappa-net of branch 0, optionally with the phase kick."""
    P0, P1, dP0, dP1 = parts.evaluate(z)
    kick = np.exp(2j * np.pi * theta) if perturb else 0.0
    if math.isinf(kappa):
        raise ValueError("the flow is not defined at kappa = inf")
    A, C = embedding_weight(0, kappa), embedding_weight(1, kappa)
    dA, dC = embedding_weight_dkappa(0, kappa), embedding_weight_dkappa(1, kappa)
    dR_dkappa = dA * (P0 + kick) + dC * (P1 - kick)
    dR_dz = A * dP0 + C * dP1
    scale = (np.sum(np.abs(parts.p0)) + np.sum(np.abs(parts.p1))) * max(1.0, abs(z)) ** (
        parts.p0.size - 1
    )
    if not abs(dR_dz) > sing_tol * scale:
        raise SingularJacobianError(f"dR/dz ~ 0 at z={z}, kappa={kappa}")
    return complex(-dR_dkappa / dR_dz)


def theta_stream(seed: int, n: int, stream: int = 0) -> np.ndarray:
    """``n`` uniforms in [0, 1) from a Philox counter generator keyed by ``(seed, stream)``.

    Entry ``s`` is the phase of step ``s``; it does not depend on how many
    paths there are or the order they are advanced in.
    """
    # one 128-bit key: low word seed, high word stream
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) | (int(stream) << 64)
    return np.random.Generator(np.random.Philox(key=key)).random(n)


@dataclass
class FlowConfig:
    dkappa: float = 0.003
    kappa_max: float = 8.0
    perturb: bool = True
    seed: int = 0
    polish_tol: float = 1e-12
    polish_max_iters: int = 100
    trace_stride: int = 10
    cluster_radius: float = 1e-6
    # continuation in 1/kappa from kappa_max to infinity before polishing
    tail_steps: int = 200
    tail_corrections: int = 2
    step_guard: bool = False
    max_retries: int = 8
    sing_tol: float = 1e-30
    workers: int = 1

    def __post_init__(self):
        if not self.dkappa > 0:
            raise ValueError("dkappa must be positive")
        if not self.kappa_max > self.dkappa:
            raise ValueError("kappa_max must exceed dkappa")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")
        if self.tail_steps < 0 or self.tail_corrections < 0:
            raise ValueError("tail settings must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.kappa_max / self.dkappa))


@dataclass
class RootPath:
    """One branch of the zero kappa-net as tracked from vertex ``m``."""

    m: int
    kappas: np.ndarray
    zs: np.ndarray
    endpoint: complex
    failed: bool = False
    terminal: complex | None = None
    residual: float = math.nan
    polish_iters: int = 0
    converged: bool = False


class _Schedule(NamedTuple):
    main: tuple[np.ndarray, ...]
    kicks: np.ndarray
    main_rows: np.ndarray
    tail: tuple[np.ndarray, ...]
    corr: tuple[np.ndarray, ...]
    h_tail: float
    tail_rows: np.ndarray
    nudges: np.ndarray
    kappas: np.ndarray
    steps: np.ndarray


def _tail_schedule(kappa0: float, M: int):
    # M uniform steps in tau = 1/kappa from 1/kappa0 down to 0
    tau0 = 1.0 / kappa0
    h = tau0 / M if M else 0.0
    taus = [tau0 - j * h for j in range(M + 1)]
    taus[-1] = 0.0
    tk = [1.0 / t for t in taus[:M]]
    tail = (
        np.array([embedding_weight(0, k) for k in tk]),
        np.array([embedding_weight(1, k) for k in tk]),
        np.array([-k * k * embedding_weight_dkappa(0, k) for k in tk]),
        np.array([-k * k * embedding_weight_dkappa(1, k) for k in tk]),
    )
    ck = [1.0 / t if t > 0 else math.inf for t in taus[1:]]
    corr = (
        np.array([embedding_weight(0, k) for k in ck]),
        np.array([embedding_weight(1, k) for k in ck]),
    )
    return tail, corr, h, ck


def _schedule(cfg: FlowConfig) -> _Schedule:
    n = cfg.n_steps
    dk = cfg.dkappa
    ks = [s * dk for s in range(n + 1)]
    main = tuple(
        np.array([f(j, k) for k in ks])
        for f, j in (
            (embedding_weight, 0),
            (embedding_weight, 1),
            (embedding_weight_dkappa, 0),
            (embedding_weight_dkappa, 1),
        )
    )
    if cfg.perturb:
        kicks = np.exp(2j * np.pi * theta_stream(cfg.seed, n))
        kicks[0] = 0.0  # no kick at kappa = 0
    else:
        kicks = np.zeros(n, dtype=np.complex128)

    rows_k, rows_step = [], []
    main_rows = np.full(n + 1, -1, dtype=np.int64)
    for s in range(0, n, cfg.trace_stride):
        main_rows[s] = len(rows_k)
        rows_k.append(ks[s])
        rows_step.append(s)
    main_rows[n] = len(rows_k)
    rows_k.append(ks[n])
    rows_step.append(n)

    M = cfg.tail_steps
    tail, corr, h, ck = _tail_schedule(ks[n], M)
    tail_rows = np.full(M, -1, dtype=np.int64)
    for j in range(M):
        if (j + 1) % cfg.trace_stride == 0 and j + 1 < M:
            tail_rows[j] = len(rows_k)
            rows_k.append(ck[j])
            rows_step.append(n + j + 1)
    nudges = np.exp(2j * np.pi * theta_stream(cfg.seed, cfg.max_retries, stream=1))
    return _Schedule(main, kicks, main_rows, tail, corr, h, tail_rows, nudges,
                     np.array(rows_k), np.array(rows_step, dtype=np.int64))


def _chunks(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, n))
    edges = [round(i * n / parts) for i in range(parts + 1)]
    return [(edges[i], edges[i + 1]) for i in range(parts) if edges[i] < edges[i + 1]]


def track(P: Polynomial, cfg: FlowConfig, backend: str | None = None) -> list[RootPath]:
    """Follow every N-gon vertex along the zero kappa-net out to kappa = inf.

    Paths are independent; with ``cfg.workers > 1`` they are split across
    threads and the result is bit-for-bit the same as a serial run.
    """
    if P.degree < 1:
        raise ValueError("degree must be >= 1")
    kern = _backend.get(backend)
    sched = _schedule(cfg)
    z = np.ascontiguousarray(initial_roots(P), dtype=np.complex128)
    N = z.size
    failed = np.zeros(N, dtype=np.uint8)
    trace = np.zeros((sched.kappas.size, N), dtype=np.complex128)

    def run(lohi):
        lo, hi = lohi
        kern.track_range(
            P.coeffs, z, failed, trace,
            *sched.main, sched.kicks, cfg.dkappa, sched.main_rows,
            *sched.tail, *sched.corr, sched.h_tail, sched.tail_rows,
            cfg.tail_corrections, sched.nudges, cfg.sing_tol, cfg.step_guard, lo, hi,
        )

    chunks = _chunks(N, cfg.workers)
    if len(chunks) == 1:
        run(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(run, chunks))

    return [
        RootPath(m=m, kappas=sched.kappas, zs=trace[:, m].copy(), endpoint=complex(z[m]),
                 failed=bool(failed[m]))
        for m in range(N)
    ]


def continue_to_infinity(P: Polynomial, zs, kappa: float, steps: int = 200, corrections: int = 2,
                         backend: str | None = None) -> np.ndarray:
    """Carry points of the zero kappa-net at ``kappa`` out to ``kappa = inf``.

    Uses the same 1/kappa predictor-corrector as the last phase of :func:`track`.
    """
    if not 0 < kappa < math.inf or steps < 1:
        raise ValueError("need 0 < kappa < inf and steps >= 1")
    kern = _backend.get(backend)
    z = np.array(zs, dtype=np.complex128, ndmin=1)
    failed = np.zeros(z.size, dtype=np.uint8)
    trace = np.zeros((0, z.size), dtype=np.complex128)
    one = np.zeros(1)
    tail, corr, h, _ = _tail_schedule(kappa, steps)
    kern.track_range(
        P.coeffs, z, failed, trace, one, one, one, one, np.zeros(0, dtype=np.complex128), 0.0,
        np.full(1, -1, dtype=np.int64), *tail, *corr, h, np.full(steps, -1, dtype=np.int64),
        corrections, np.ones(1, dtype=np.complex128), 1e-30, False, 0, z.size,
    )
    return z


def trace_steps(cfg: FlowConfig) -> np.ndarray:
    """Step index of each recorded trace row (tail rows continue the count)."""
    return _schedule(cfg).steps


# ------------------------------------------------------------ polish, cluster


class PolishResult(NamedTuple):
    root: complex
    residual: float
    iters: int
    converged: bool


def polish(P: Polynomial, z0: complex, cfg: FlowConfig | None = None) -> PolishResult:
    """Newton iteration on ``P`` from ``z0``; returns the best iterate seen."""
    cfg = cfg or FlowConfig()
    dP = P.derivative()
    z = complex(z0)
    res = abs(P(z))
    best = (res, z)
    if res <= cfg.polish_tol * P.scale(z):
        return PolishResult(z, res, 0, True)
    for it in range(1, cfg.polish_max_iters + 1):
        d = dP(z)
        if d == 0:
            break
        step = P(z) / d
        z = z - step
        res = abs(P(z))
        if not math.isfinite(res):
            break
        if res < best[0]:
            best = (res, z)
        if res <= cfg.polish_tol * P.scale(z) or abs(step) <= 1e-14 * (1.0 + abs(z)):
            return PolishResult(best[1], best[0], it, True)
    return PolishResult(best[1], best[0], cfg.polish_max_iters, False)


def _link_groups(points: np.ndarray, radius: float, radii: np.ndarray | None) -> list[list[int]]:
    n = points.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            reach = radius if radii is None else max(radius, radii[i] + radii[j])
            if abs(points[i] - points[j]) <= reach:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def cluster(roots: Sequence[complex], radius: float, radii: Sequence[float] | None = None
            ) -> list[tuple[complex, int]]:
    """Single-linkage clusters of ``roots``: ``(centroid, size)`` pairs.

    Two points link when closer than ``radius`` or, if per-point uncertainty
    ``radii`` are given, closer than the sum of their radii.
    """
    pts = np.asarray(roots, dtype=np.complex128).ravel()
    if pts.size == 0:
        return []
    rr = None if radii is None else np.asarray(radii, dtype=float).ravel()
    return [(complex(pts[g].mean()), len(g)) for g in _link_groups(pts, radius, rr)]


class ClusteredRoot(NamedTuple):
    value: complex
    multiplicity: int
    residual: float


def _refine_multiple(P: Polynomial, centre: complex, mult: int, reach: float,
                     cfg: FlowConfig) -> complex | None:
    # an m-fold root of P is a simple root of P^(m-1)
    Q = P.derivative(mult - 1)
    dQ = Q.derivative()
    z = centre
    for _ in range(cfg.polish_max_iters):
        d = dQ(z)
        if d == 0:
            break
        step = Q(z) / d
        z = z - step
        if abs(step) <= 1e-15 * (1.0 + abs(z)):
            break
    if not np.isfinite(z) or abs(z - centre) > reach:
        return None
    return complex(z)


@dataclass
class RootReport:
    roots: list[ClusteredRoot]
    paths: list[RootPath]
    origin_multiplicity: int
    partial: bool
    seed: int
    steps: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def values(self) -> list[complex]:
        """Roots expanded by multiplicity."""
        return [r.value for r in self.roots for _ in range(r.multiplicity)]

    def to_dict(self) -> dict:
        return {
            "roots": [
                {"re": r.value.real, "im": r.value.imag, "multiplicity": r.multiplicity,
                 "residual": r.residual}
                for r in self.roots
            ],
            "origin_multiplicity": self.origin_multiplicity,
            "partial": self.partial,
            "seed": self.seed,
            "steps": self.steps,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def reconstruct(leading: complex, roots: Sequence[tuple[complex, int]]) -> np.ndarray:
    """Ascending coefficients of ``leading * prod (z - r)^m``."""
    expanded = [r for r, m in roots for _ in range(m)]
    return (leading * np.poly(np.array(expanded, dtype=np.complex128)))[::-1] if expanded else np.array([leading])


def solve(coeffs: Sequence[complex], cfg: FlowConfig | None = None, backend: str | None = None) -> RootReport:
    """All roots of the polynomial with ascending ``coeffs``, with multiplicities."""
    cfg = cfg or FlowConfig()
    P, k0 = normalize(coeffs)
    full = np.concatenate([np.zeros(k0, dtype=np.complex128), P.coeffs])
    diag: dict = {"backend": _backend.NAME if backend is None else backend,
                  "failed_paths": [], "unpolished_paths": [], "unverified_clusters": [],
                  "flagged_roots": []}
    paths: list[RootPath] = []
    found: list[ClusteredRoot] = []

    if P.degree >= 1:
        paths = track(P, cfg, backend=backend)
        N = P.degree
        dP = P.derivative()
        ends = np.empty(N, dtype=np.complex128)
        radii = np.zeros(N)
        for path in paths:
            pr = polish(P, path.endpoint, cfg)
            path.terminal, path.residual, path.polish_iters, path.converged = pr
            ends[path.m] = pr.root
            d = dP(pr.root)
            radii[path.m] = N * pr.residual / abs(d) if d != 0 else 0.0
            if path.failed:
                diag["failed_paths"].append(path.m)
            if not pr.converged:
                diag["unpolished_paths"].append(path.m)
        diag["polish_iterations"] = [p.polish_iters for p in paths]

        for group in _link_groups(ends, cfg.cluster_radius, radii):
            members = ends[group]
            centre = complex(members.mean())
            mult = len(group)
            value = complex(members[0])
            if mult > 1:
                spread = float(np.max(np.abs(members - centre)))
                reach = max(cfg.cluster_radius, 2.0 * (spread + float(np.max(radii[group]))))
                refined = _refine_multiple(P, centre, mult, reach, cfg)
                if refined is None:
                    diag["unverified_clusters"].append([int(i) for i in group])
                    value = centre
                else:
                    value = refined
            res = abs(P(value))
            if res > cfg.polish_tol * P.scale(value) * max(1, mult) and mult == 1:
                diag["flagged_roots"].append([value.real, value.imag])
            found.append(ClusteredRoot(value, mult, res))

    if k0:
        found.append(ClusteredRoot(0j, k0, 0.0))
    found.sort(key=lambda r: (r.value.real, r.value.imag))

    rebuilt = reconstruct(P.coeffs[-1], [(r.value, r.multiplicity) for r in found])
    scale = float(np.max(np.abs(full)))
    err = float(np.max(np.abs(rebuilt - full))) / scale if rebuilt.size == full.size else math.inf
    diag["reconstruction_error"] = err
    partial = bool(diag["failed_paths"]) or not err <= 1e-6
    return RootReport(found, paths, k0, partial, cfg.seed, cfg.n_steps, diag)


# --------------------------------------------------------------------- output


def trace_rows(report: RootReport, cfg: FlowConfig):
    """``(step, kappa, m, re, im)`` tuples for every recorded sample."""
    if not report.paths:
        return
    steps = trace_steps(cfg)
    for i, kappa in enumerate(report.paths[0].kappas):
        for path in report.paths:
            z = path.zs[i]
            yield int(steps[i]), float(kappa), path.m, float(z.real), float(z.imag)


def write_trace_csv(report: RootReport, cfg: FlowConfig, stream: io.TextIOBase) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["step", "kappa", "m", "re", "im"])
    for step, kappa, m, re, im in trace_rows(report, cfg):
        w.writerow([step, f"{kappa:.17g}", m, f"{re:.17g}", f"{im:.17g}"])
