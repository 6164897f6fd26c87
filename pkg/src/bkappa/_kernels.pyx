# cython: language_level=3
"""Compiled hot loops: path tracking of the zero kappa-net and fractal digit sums.

Same contract as ``bkappa._pykernels``; the per-path loops run without the GIL
so callers may split paths across threads.
"""

import numpy as np

from libc.math cimport floor, pow, isfinite, fmax, hypot, fma, fmod, NAN

cdef double NUDGE_SIZE = 1e-8
cdef double GUARD_FRACTION = 0.5
cdef int GUARD_MAX_SUBSTEPS = 4096


cdef inline double cabs_(double complex z) noexcept nogil:
    return hypot(z.real, z.imag)


cdef inline bint cfinite(double complex z) noexcept nogil:
    return isfinite(z.real) and isfinite(z.imag)


cdef inline void split_eval(const double complex[::1] a, int N, double complex z,
                            double complex* P0, double complex* P1,
                            double complex* dP0, double complex* dP1) noexcept nogil:
    cdef double complex zpow = 1.0
    cdef double complex b, c
    cdef int k
    for k in range(N - 1):
        zpow = zpow * z
    P0[0] = a[N] * zpow * z + a[0]
    dP0[0] = (N * a[N]) * zpow
    if N >= 2:
        b = a[N - 1]
        c = (N - 1) * a[N - 1]
        for k in range(N - 2, 0, -1):
            b = b * z + a[k]
            c = c * z + k * a[k]
        P1[0] = b * z
        dP1[0] = c
    else:
        P1[0] = 0.0
        dP1[0] = 0.0


cdef inline double sing_bound(double asum, int N, double complex z, double sing_tol) noexcept nogil:
    cdef double r = fmax(1.0, cabs_(z))
    return sing_tol * asum * pow(r, N)


cdef double complex guarded_step(const double complex[::1] a, int N, double complex z0, Py_ssize_t s,
                                 const double[::1] mA, const double[::1] mC,
                                 const double[::1] mdA, const double[::1] mdC,
                                 double complex kick, double dk) noexcept nogil:
    cdef int nsub = 2
    cdef int i
    cdef double t, A, C, dA, dC, h
    cdef double complex zc = z0, P0, P1, dP0, dP1, dz
    cdef bint ok
    while nsub <= GUARD_MAX_SUBSTEPS:
        zc = z0
        ok = True
        h = dk / nsub
        for i in range(nsub):
            t = (<double> i) / nsub
            A = mA[s] + t * (mA[s + 1] - mA[s])
            C = mC[s] + t * (mC[s + 1] - mC[s])
            dA = mdA[s] + t * (mdA[s + 1] - mdA[s])
            dC = mdC[s] + t * (mdC[s + 1] - mdC[s])
            split_eval(a, N, zc, &P0, &P1, &dP0, &dP1)
            dz = -h * (dA * (P0 + kick) + dC * (P1 - kick)) / (A * dP0 + C * dP1)
            if cabs_(dz) > GUARD_FRACTION * (1.0 + cabs_(zc)):
                ok = False
            zc = zc + dz
        if ok:
            break
        nsub *= 2
    return zc


cdef void track_one(const double complex[::1] a, int N, double asum, Py_ssize_t m,
                    double complex[::1] z, unsigned char[::1] failed, double complex[:, ::1] trace,
                    const double[::1] mA, const double[::1] mC, const double[::1] mdA, const double[::1] mdC,
                    const double complex[::1] kicks, double dk, const long long[::1] main_rows,
                    const double[::1] tA, const double[::1] tC, const double[::1] tdA, const double[::1] tdC,
                    const double[::1] cA, const double[::1] cC, double h_tail, const long long[::1] tail_rows,
                    int n_corr, const double complex[::1] nudges, double sing_tol, bint step_guard) noexcept nogil:
    cdef Py_ssize_t n_steps = kicks.shape[0]
    cdef Py_ssize_t n_tail = tA.shape[0]
    cdef Py_ssize_t s, j, q
    cdef int it
    cdef double complex zz = z[m], zt, P0, P1, dP0, dP1, den, num, dz, R, Rz
    cdef bint dead = failed[m] != 0
    cdef bint bad, found
    for s in range(n_steps):
        if main_rows[s] >= 0:
            trace[main_rows[s], m] = zz
        if dead:
            continue
        split_eval(a, N, zz, &P0, &P1, &dP0, &dP1)
        den = mA[s] * dP0 + mC[s] * dP1
        bad = False
        if not (cabs_(den) > sing_bound(asum, N, zz, sing_tol)):
            found = False
            for q in range(nudges.shape[0]):
                zt = zz + NUDGE_SIZE * (1.0 + cabs_(zz)) * nudges[q]
                split_eval(a, N, zt, &P0, &P1, &dP0, &dP1)
                den = mA[s] * dP0 + mC[s] * dP1
                if cabs_(den) > sing_bound(asum, N, zt, sing_tol):
                    zz = zt
                    found = True
                    break
            if not found:
                bad = True
        if bad:
            dead = True
            continue
        num = mdA[s] * (P0 + kicks[s]) + mdC[s] * (P1 - kicks[s])
        dz = -dk * num / den
        if step_guard and cabs_(dz) > GUARD_FRACTION * (1.0 + cabs_(zz)):
            zt = guarded_step(a, N, zz, s, mA, mC, mdA, mdC, kicks[s], dk)
        else:
            zt = zz + dz
        if not cfinite(zt):
            dead = True
            continue
        zz = zt
    if main_rows[n_steps] >= 0:
        trace[main_rows[n_steps], m] = zz

    for j in range(n_tail):
        if not dead:
            zt = zz
            split_eval(a, N, zt, &P0, &P1, &dP0, &dP1)
            den = tA[j] * dP0 + tC[j] * dP1
            num = tdA[j] * P0 + tdC[j] * P1
            if cabs_(den) > sing_bound(asum, N, zt, sing_tol):
                zt = zt + h_tail * num / den
            for it in range(n_corr):
                split_eval(a, N, zt, &P0, &P1, &dP0, &dP1)
                R = cA[j] * P0 + cC[j] * P1
                Rz = cA[j] * dP0 + cC[j] * dP1
                if cabs_(Rz) > sing_bound(asum, N, zt, sing_tol):
                    zt = zt - R / Rz
            if cfinite(zt):
                zz = zt
            else:
                dead = True
        if tail_rows[j] >= 0:
            trace[tail_rows[j], m] = zz
    z[m] = zz
    failed[m] = 1 if dead else 0


def track_range(coeffs, z, failed, trace,
                main_A, main_C, main_dA, main_dC, kicks, double dk, main_rows,
                tail_A, tail_C, tail_dA, tail_dC, corr_A, corr_C, double h_tail, tail_rows,
                int n_corr, nudges, double sing_tol, bint step_guard, Py_ssize_t lo, Py_ssize_t hi):
    """Advance paths ``lo:hi`` through the Euler phase and the 1/kappa tail, in place."""
    cdef const double complex[::1] a = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef double complex[::1] zv = z
    cdef unsigned char[::1] fv = failed
    cdef double complex[:, ::1] tv = trace
    cdef const double[::1] mA = main_A, mC = main_C, mdA = main_dA, mdC = main_dC
    cdef const double complex[::1] kv = kicks
    cdef const long long[::1] mrows = main_rows, trows = tail_rows
    cdef const double[::1] tA = tail_A, tC = tail_C, tdA = tail_dA, tdC = tail_dC
    cdef const double[::1] cA = corr_A, cC = corr_C
    cdef const double complex[::1] nv = nudges
    cdef int N = a.shape[0] - 1
    cdef double asum = 0.0
    cdef Py_ssize_t m, k
    for k in range(N + 1):
        asum += cabs_(a[k])
    with nogil:
        for m in range(lo, hi):
            track_one(a, N, asum, m, zv, fv, tv, mA, mC, mdA, mdC, kv, dk, mrows,
                      tA, tC, tdA, tdC, cA, cC, h_tail, trows, n_corr, nv, sing_tol, step_guard)


cdef double EXACT_LIMIT = 9007199254740992.0  # 2^53


cdef inline int below(double v, double q, double hi, double T, bint up) noexcept nogil:
    # exact sign test: v*q < T (up) or v < T*q (down)
    cdef double ph
    if up:
        return (hi - T) + fma(v, q, -hi) < 0.0
    ph = T * q
    return (v - ph) - fma(T, q, -ph) < 0.0


cdef double scaled_floor(double v, long long K, long p, long depth) noexcept nogil:
    cdef long long s = depth - 1 - K
    cdef bint up = s >= 0
    cdef double q = pow(<double> p, <double> (s if up else -s))
    cdef double hi = v * q if up else v / q
    cdef double T = floor(hi)
    cdef int it
    for it in range(2):
        if below(v, q, hi, T, up):
            T -= 1.0
        if not below(v, q, hi, T + 1.0, up):
            T += 1.0
    return T


def fractal_sums(values, anchors, long p, long lam, long n, long depth):
    """``sum_k p^k d_p(k, v) d_lam(0, |k| + n)`` over ``depth`` digits from each anchor.

    Digits come from the exact integer ``floor(v p^(depth-1-K))``; entries it
    cannot hold in a double come back NaN.
    """
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef const long long[::1] K = np.ascontiguousarray(anchors, dtype=np.int64).ravel()
    out = np.zeros(v.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef long j
    cdef long long k, s, Ki, Ti, d
    cdef double T, acc, pf = <double> p
    cdef double top = pow(pf, <double> depth)
    cdef long smax = 0
    while pow(pf, <double> (smax + 1)) < EXACT_LIMIT:
        smax += 1
    # p^k for every digit index a fast-path entry can reach
    cdef long long kmin = -smax - 1, kmax = depth + smax
    powers_arr = np.power(pf, np.arange(kmin, kmax + 1, dtype=np.float64))
    cdef const double[::1] powers = powers_arr
    with nogil:
        for i in range(v.shape[0]):
            if not (v[i] > 0.0):
                continue
            Ki = K[i]
            s = depth - 1 - Ki
            if top >= EXACT_LIMIT or s > smax or -s > smax:
                o[i] = NAN
                continue
            T = scaled_floor(v[i], Ki, p, depth)
            if T >= top:
                Ki += 1
                s -= 1
                if -s > smax:
                    o[i] = NAN
                    continue
                T = scaled_floor(v[i], Ki, p, depth)
            Ti = <long long> T
            acc = 0.0
            for j in range(depth):
                d = Ti % p
                Ti = Ti // p
                k = j - s
                acc += <double> d * powers[k - kmin] * <double> (((k if k >= 0 else -k) + n) % lam)
            o[i] = acc
    return out.reshape(np.shape(values))
