"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from bkappa import _backend, fractal as fr, rootfinder as rf

ROOTS = [1.5, 2, 3 - 3j, 5 + 4j, 5, -1, -1 - 2j, -3j, -4j, 0.05j, -2 + 6j, -3, -1 + 4j,
         2 + 5j, 4 + 6j, -2 - 3j, 1j, 1j, 1j]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--grid", type=int, default=256, help="fractal grid side")
    args = ap.parse_args()

    P = rf.Polynomial(np.poly(ROOTS)[::-1])
    cfg = rf.FlowConfig(seed=0)
    z = fr.Grid.square(f"-2-2i:2+2i:{args.grid}").points()
    f = np.tan(z)
    K, _ = fr.digit_anchor(np.abs(f), 3)
    mags = np.abs(f.real).ravel()
    anchors = K.ravel()
    depth = fr.default_depth(3)

    names = ["python"]
    try:
        _backend.get("compiled")
        names.append("compiled")
    except ImportError:
        print("compiled extension not built; timing the fallback only")

    rows = []
    for name in names:
        kern = _backend.get(name)
        t_track = best_of(lambda: rf.track(P, cfg, backend=name), args.repeat)
        t_frac = best_of(lambda: kern.fractal_sums(mags, anchors, 3, 3, 1, depth), args.repeat)
        rows.append((name, t_track, t_frac))

    print(f"{'backend':<10}{'track deg 19 (s)':>20}{f'fractal {args.grid}^2 (s)':>22}")
    for name, a, b in rows:
        print(f"{name:<10}{a:>20.4f}{b:>22.4f}")
    if len(rows) == 2:
        print(f"{'speedup':<10}{rows[0][1] / rows[1][1]:>19.1f}x{rows[0][2] / rows[1][2]:>21.1f}x")


if __name__ == "__main__":
    main()
