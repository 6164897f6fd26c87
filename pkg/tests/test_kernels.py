import importlib.util

import numpy as np
import pytest

from bkappa import _backend, _pykernels, fractal as fr, rootfinder as rf
from oracles import NINETEEN_ROOTS, expand_roots

compiled = pytest.mark.skipif(importlib.util.find_spec("bkappa._kernels") is None,
                              reason="extension not built")
BACKENDS = ["python", pytest.param("compiled", marks=compiled)]

P19 = rf.normalize(expand_roots(NINETEEN_ROOTS))[0]


def test_backend_names():
    assert _backend.NAME in ("compiled", "python")
    assert _backend.get("python") is _pykernels
    with pytest.raises(ValueError):
        _backend.get("fortran")


@compiled
@pytest.mark.parametrize("perturb", [True, False])
def test_track_backends_agree(perturb):
    cfg = rf.FlowConfig(seed=5, perturb=perturb)
    for coeffs in ([2, -3, 1], P19.coeffs, [1 + 1j, 0.3, -0.2j, 0.5, 1.0]):
        P = rf.normalize(coeffs)[0]
        a = rf.track(P, cfg, backend="python")
        b = rf.track(P, cfg, backend="compiled")
        for p, q in zip(a, b):
            scale = 1 + np.max(np.abs(p.zs))
            assert np.max(np.abs(p.zs - q.zs)) <= 1e-9 * scale
            assert abs(p.endpoint - q.endpoint) <= 1e-9 * scale
            assert p.failed == q.failed


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("workers", [2, 3, 7, 19])
def test_track_chunking_is_bitwise(backend, workers):
    base = rf.track(P19, rf.FlowConfig(seed=11), backend=backend)
    other = rf.track(P19, rf.FlowConfig(seed=11, workers=workers), backend=backend)
    for p, q in zip(base, other):
        assert np.array_equal(p.zs, q.zs)
        assert p.endpoint == q.endpoint


@pytest.mark.parametrize("backend", BACKENDS)
def test_solve_through_backend(backend):
    rep = rf.solve([2, -3, 1], backend=backend)
    assert rep.diagnostics["backend"] == backend
    assert rep.values == pytest.approx([1, 2], abs=1e-10)


@compiled
def test_fractal_sums_agree():
    rng = np.random.default_rng(0)
    v = np.concatenate([rng.random(500) * 10 ** rng.uniform(-8, 8, 500), [0.0, 1.0, 3.0, 9.0]])
    for p, lam, n in [(3, 3, 0), (3, 3, 2), (2, 5, 1), (10, 4, 3)]:
        K, mag = fr.digit_anchor(v, p)
        depth = fr.default_depth(p)
        a = _backend.get("python").fractal_sums(mag, K, p, lam, n, depth)
        b = _backend.get("compiled").fractal_sums(mag, K, p, lam, n, depth)
        # both decline the same entries; those go to the exact integer routine
        assert np.array_equal(np.isnan(a), np.isnan(b))
        ok = ~np.isnan(a)
        assert ok.sum() > 300
        assert np.max(np.abs(a[ok] - b[ok]) / np.maximum(v[ok], 1e-300)) <= 1e-15


def test_fractal_workers_bitwise():
    x = np.linspace(-5, 5, 20001)
    spec = fr.FractalSpec(3, 3, 1, fr.MOTHERS["sin"])
    assert np.array_equal(spec.sample(x, workers=1), spec.sample(x, workers=5))
