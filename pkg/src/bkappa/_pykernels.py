"""Pure numpy implementations of the hot loops.

Mirrors ``_kernels.pyx`` argument for argument; used when the compiled
extension is missing or ``BKAPPA_PURE=1`` is set. Paths are vectorised
across the ``lo:hi`` slice, so every path sees the same operation sequence
no matter how the slice is chunked.
"""

from __future__ import annotations

import numpy as np

NUDGE_SIZE = 1e-8
GUARD_FRACTION = 0.5
GUARD_MAX_SUBSTEPS = 4096


def _split_eval(a, z):
    """P0, P1, P0', P1' of the split ``a_N z^N + a_0`` / middle terms."""
    N = a.shape[0] - 1
    zpow = np.ones_like(z)
    for _ in range(N - 1):
        zpow = zpow * z
    P0 = a[N] * zpow * z + a[0]
    dP0 = (N * a[N]) * zpow
    if N >= 2:
        b = np.full_like(z, a[N - 1])
        c = np.full_like(z, (N - 1) * a[N - 1])
        for k in range(N - 2, 0, -1):
            b = b * z + a[k]
            c = c * z + k * a[k]
        P1 = b * z
        dP1 = c
    else:
        P1 = np.zeros_like(z)
        dP1 = np.zeros_like(z)
    return P0, P1, dP0, dP1


def _sing_bound(a, z, sing_tol):
    N = a.shape[0] - 1
    return sing_tol * np.sum(np.abs(a)) * np.maximum(1.0, np.abs(z)) ** N


def _euler_dz(a, z, A, C, dA, dC, kick, dk):
    P0, P1, dP0, dP1 = _split_eval(a, z)
    den = A * dP0 + C * dP1
    num = dA * (P0 + kick) + dC * (P1 - kick)
    return -dk * num / den, den


def track_range(coeffs, z, failed, trace,
                main_A, main_C, main_dA, main_dC, kicks, dk, main_rows,
                tail_A, tail_C, tail_dA, tail_dC, corr_A, corr_C, h_tail, tail_rows,
                n_corr, nudges, sing_tol, step_guard, lo, hi):
    """Advance paths ``lo:hi`` through the Euler phase and the 1/kappa tail, in place."""
    a = np.asarray(coeffs, dtype=np.complex128)
    zz = z[lo:hi].copy()
    dead = failed[lo:hi].astype(bool)
    n_steps = kicks.shape[0]
    with np.errstate(all="ignore"):
        for s in range(n_steps):
            row = main_rows[s]
            if row >= 0:
                trace[row, lo:hi] = zz
            live = ~dead
            if not live.any():
                continue
            zl = zz[live]
            A, C, dA, dC = main_A[s], main_C[s], main_dA[s], main_dC[s]
            P0, P1, dP0, dP1 = _split_eval(a, zl)
            den = A * dP0 + C * dP1
            sing = ~(np.abs(den) > _sing_bound(a, zl, sing_tol))
            if sing.any():
                zl, bad = _retry_singular(a, zl, sing, A, C, nudges, sing_tol)
                P0, P1, dP0, dP1 = _split_eval(a, zl)
                den = A * dP0 + C * dP1
            else:
                bad = np.zeros(zl.shape, dtype=bool)
            num = dA * (P0 + kicks[s]) + dC * (P1 - kicks[s])
            dz = -dk * num / den
            if step_guard:
                big = np.abs(dz) > GUARD_FRACTION * (1.0 + np.abs(zl))
                for i in np.flatnonzero(big & ~bad):
                    zl[i] = _guarded_step(a, zl[i], s, main_A, main_C, main_dA, main_dC, kicks[s], dk)
                dz[big] = 0.0
            znew = np.where(bad, zl, zl + dz)
            bad |= ~np.isfinite(znew)
            znew = np.where(bad, zz[live], znew)
            zz[live] = znew
            idx = np.flatnonzero(live)
            dead[idx[bad]] = True
        row = main_rows[n_steps]
        if row >= 0:
            trace[row, lo:hi] = zz

        for j in range(tail_A.shape[0]):
            live = ~dead
            if live.any():
                zl = zz[live]
                P0, P1, dP0, dP1 = _split_eval(a, zl)
                den = tail_A[j] * dP0 + tail_C[j] * dP1
                num = tail_dA[j] * P0 + tail_dC[j] * P1
                ok = np.abs(den) > _sing_bound(a, zl, sing_tol)
                zl = np.where(ok, zl + h_tail * num / np.where(ok, den, 1.0), zl)
                for _ in range(n_corr):
                    P0, P1, dP0, dP1 = _split_eval(a, zl)
                    R = corr_A[j] * P0 + corr_C[j] * P1
                    Rz = corr_A[j] * dP0 + corr_C[j] * dP1
                    ok = np.abs(Rz) > _sing_bound(a, zl, sing_tol)
                    zl = np.where(ok, zl - R / np.where(ok, Rz, 1.0), zl)
                bad = ~np.isfinite(zl)
                zl = np.where(bad, zz[live], zl)
                zz[live] = zl
                idx = np.flatnonzero(live)
                dead[idx[bad]] = True
            row = tail_rows[j]
            if row >= 0:
                trace[row, lo:hi] = zz
    z[lo:hi] = zz
    failed[lo:hi] = dead.astype(np.uint8)


def _retry_singular(a, zl, sing, A, C, nudges, sing_tol):
    zl = zl.copy()
    bad = np.zeros(zl.shape, dtype=bool)
    for i in np.flatnonzero(sing):
        z0 = zl[i]
        for e in nudges:
            zt = z0 + NUDGE_SIZE * (1.0 + abs(z0)) * e
            P0, P1, dP0, dP1 = _split_eval(a, np.array([zt]))
            den = A * dP0[0] + C * dP1[0]
            if abs(den) > _sing_bound(a, np.array([zt]), sing_tol)[0]:
                zl[i] = zt
                break
        else:
            bad[i] = True
    return zl, bad


def _guarded_step(a, z0, s, main_A, main_C, main_dA, main_dC, kick, dk):
    # split one Euler step into 2^d substeps with linearly interpolated weights
    nsub = 2
    zc = z0
    while nsub <= GUARD_MAX_SUBSTEPS:
        zc = z0
        ok = True
        h = dk / nsub
        for i in range(nsub):
            t = i / nsub
            A = main_A[s] + t * (main_A[s + 1] - main_A[s])
            C = main_C[s] + t * (main_C[s + 1] - main_C[s])
            dA = main_dA[s] + t * (main_dA[s + 1] - main_dA[s])
            dC = main_dC[s] + t * (main_dC[s + 1] - main_dC[s])
            dz, _ = _euler_dz(a, np.array([zc]), A, C, dA, dC, kick, h)
            dz = dz[0]
            if abs(dz) > GUARD_FRACTION * (1.0 + abs(zc)):
                ok = False
            zc = zc + dz
        if ok:
            break
        nsub *= 2
    return zc


EXACT_LIMIT = 2.0**53
_SPLIT = 134217729.0  # 2^27 + 1


def _two_prod(a, b):
    """``a*b = hi + lo`` exactly (Dekker splitting)."""
    hi = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    lo = ((ah * bh - hi) + ah * bl + al * bh) + al * bl
    return hi, lo


def _max_exact_power(p):
    e = 0
    while p ** (e + 1) < 2**53:
        e += 1
    return e


def _scaled_floor(v, K, p, depth):
    """``T = floor(v p^(depth-1-K))`` exactly, as float64 integers, where it fits."""
    s = depth - 1 - K
    q = np.power(float(p), np.abs(s).astype(float))
    up = s >= 0
    # v * q for s >= 0, v / q otherwise; then fix the floor by one with exact signs
    hi = np.where(up, v * q, v / q)
    T = np.floor(hi)
    for _ in range(2):
        ph, pl = _two_prod(T, q)
        below = np.where(up, (hi - T) + _two_prod(v, q)[1] < 0, (v - ph) - pl < 0)
        T = np.where(below, T - 1, T)
        ph, pl = _two_prod(T + 1, q)
        above = np.where(up, (hi - (T + 1)) + _two_prod(v, q)[1] >= 0, (v - ph) - pl >= 0)
        T = np.where(above, T + 1, T)
    return T


def fractal_sums(values, anchors, p, lam, n, depth):
    """``sum_k p^k d_p(k, v) d_lam(0, |k| + n)`` over ``depth`` digits from each anchor.

    ``values`` are positive (zeros give 0); ``anchors`` hold the top digit index
    per value. Digits come from the exact integer ``floor(v p^(depth-1-K))``.
    Entries that integer cannot hold exactly in a double come back NaN; see
    :func:`fractal_sums_exact`.
    """
    v = np.asarray(values, dtype=float)
    K = np.asarray(anchors, dtype=np.int64).copy()
    out = np.zeros_like(v)
    pos = v > 0
    if float(p) ** depth >= EXACT_LIMIT:
        out[pos] = np.nan
        return out
    fast = pos & (np.abs(depth - 1 - K) <= _max_exact_power(p))
    out[pos & ~fast] = np.nan
    vf, Kf = v[fast], K[fast]
    T = _scaled_floor(vf, Kf, p, depth)
    # an anchor one too low leaves a digit above the window
    low = T >= float(p) ** depth
    if np.any(low):
        Kf = np.where(low, Kf + 1, Kf)
        T = np.where(low, _scaled_floor(vf, Kf, p, depth), T)
    s = depth - 1 - Kf
    lost = np.abs(s) > _max_exact_power(p)
    T = np.where(lost, 0.0, T)
    pf = float(p)
    acc = np.zeros_like(vf)
    for j in range(depth):
        d = np.fmod(T, pf)
        T = (T - d) / pf
        k = j - s
        w = ((np.abs(k) + n) % lam).astype(float)
        acc += d * np.power(pf, k.astype(float)) * w
    out[fast] = np.where(lost, np.nan, acc)
    return out


def fractal_sums_exact(values, anchors, p, lam, n, depth):
    """Same sums with Python integers; for the entries :func:`fractal_sums` leaves NaN."""
    from fractions import Fraction

    out = np.zeros(len(values))
    for i, (v, K) in enumerate(zip(values, anchors)):
        if not v > 0:
            continue
        K = int(K)
        while True:
            s = depth - 1 - K
            T = int(Fraction(float(v)) * Fraction(p) ** s // 1)
            if T < p**depth:
                break
            K += 1
        acc = 0.0
        for j in range(depth):
            T, d = divmod(T, p)
            k = j - s
            acc += d * float(p) ** k * ((abs(k) + n) % lam)
        out[i] = acc
    return out
