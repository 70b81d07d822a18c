# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: superposition fields and the adaptive integrator.

Same functions, arguments and return values as ``_kernels_py``; see that
module for the conventions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, cos, sin, atan2, hypot, fabs, INFINITY, M_PI

cnp.import_array()

NAME = "compiled"

cdef double LOG_2PI_4 = 0.25 * log(2.0 * M_PI)

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double D1 = -12715105075.0 / 11282082432, D3 = 87487479700.0 / 32700410799
cdef double D4 = -10690763975.0 / 1880347072, D5 = 701980252875.0 / 199316789632
cdef double D6 = -1453857185.0 / 822651844, D7 = 69997945.0 / 29380423

cdef enum:
    MAX_PACKETS = 64

STATUS_OK = 0
STATUS_POLE = 1
STATUS_UNDERFLOW = 2
STATUS_MAX_STEPS = 3


cdef inline double complex _cexp(double complex w) noexcept nogil:
    cdef double r = exp(w.real)
    return r * cos(w.imag) + 1j * (r * sin(w.imag))


cdef inline double _cabs(double complex w) noexcept nogil:
    return hypot(w.real, w.imag)


cdef inline double complex _conj(double complex w) noexcept nogil:
    return w.real - 1j * w.imag


cdef void _sums(const double[:, ::1] P, double mass, double hbar, double complex z,
                double t, double *m_out, double complex *s0_out,
                double complex *s1_out, double complex *s2_out) noexcept nogil:
    cdef Py_ssize_t k, n = P.shape[0]
    cdef double x0, vp, sig0, p, m
    cdef double complex st, ss, u, expo, g, w, s0 = 0, s1 = 0, s2 = 0
    cdef double complex expos[MAX_PACKETS]
    cdef double complex gs[MAX_PACKETS]
    cdef double complex dgs[MAX_PACKETS]
    m = -INFINITY
    for k in range(n):
        x0 = P[k, 0]
        vp = P[k, 1]
        sig0 = P[k, 2]
        st = sig0 + 1j * (hbar * t / (2.0 * mass * sig0))
        ss = st * sig0
        u = z - (x0 + vp * t)
        p = mass * vp
        expo = (-LOG_2PI_4 - 0.5 * log(_cabs(st)) - 0.5j * atan2(st.imag, st.real)
                - u * u / (4.0 * ss) + 1j * (p * u + 0.5 * p * vp * t) / hbar)
        expos[k] = expo
        gs[k] = -u / (2.0 * ss) + 1j * p / hbar
        dgs[k] = -1.0 / (2.0 * ss)
        if expo.real > m:
            m = expo.real
    for k in range(n):
        w = _cexp(expos[k] - m)
        g = gs[k]
        s0 = s0 + w
        s1 = s1 + w * g
        s2 = s2 + w * (g * g + dgs[k])
    m_out[0] = m
    s0_out[0] = s0
    s1_out[0] = s1
    s2_out[0] = s2


cdef double _log_scale(const double[:, ::1] P, double mass, double hbar, double t) noexcept nogil:
    cdef Py_ssize_t k
    cdef double sig0, sig, total = 0.0
    for k in range(P.shape[0]):
        sig0 = P[k, 2]
        sig = sig0 * hypot(1.0, hbar * t / (2.0 * mass * sig0 * sig0))
        total += exp(-LOG_2PI_4 - 0.5 * log(sig))
    return log(total)


cdef int _rhs(const double[:, ::1] P, double mass, double hbar, bint polya,
              double complex z, double t, double log_guard, double complex *v,
              double complex *p, double complex *dp, double *lrel) noexcept nogil:
    cdef double m
    cdef double complex s0, s1, s2, r
    cdef double a0
    _sums(P, mass, hbar, z, t, &m, &s0, &s1, &s2)
    a0 = _cabs(s0)
    if a0 == 0.0:
        return 0
    lrel[0] = m + log(a0) - _log_scale(P, mass, hbar, t)
    # a pole needs both a small |psi| and cancellation between the packet terms;
    # a small |psi| alone only means the Gaussian tails
    if lrel[0] < log_guard and log(a0) < log_guard:
        return 0
    r = s1 / s0
    p[0] = -1j * hbar * r
    dp[0] = -1j * hbar * (s2 / s0 - r * r)
    if polya:
        v[0] = _conj(p[0]) / mass
    else:
        v[0] = p[0] / mass
    return 1


def _check_packets(P):
    P = np.ascontiguousarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 3:
        raise ValueError("packets array must have shape (K, 3)")
    if P.shape[0] > MAX_PACKETS:
        raise ValueError(f"at most {MAX_PACKETS} packets supported by the compiled core")
    return P


def log_sums(P, double mass, double hbar, z, double t):
    cdef const double[:, ::1] Pv = _check_packets(P)
    cdef double m
    cdef double complex s0, s1, s2
    _sums(Pv, mass, hbar, <double complex>complex(z), t, &m, &s0, &s1, &s2)
    return m, complex(s0), complex(s1), complex(s2)


def log_sums_grid(P, double mass, double hbar, z, t):
    cdef const double[:, ::1] Pv = _check_packets(P)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] za = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ta = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = za.shape[0]
    if ta.shape[0] != n:
        raise ValueError("z and t must have the same length")
    m_arr = np.empty(n, dtype=np.float64)
    s0_arr = np.empty(n, dtype=np.complex128)
    s1_arr = np.empty(n, dtype=np.complex128)
    s2_arr = np.empty(n, dtype=np.complex128)
    cdef double[::1] mv = m_arr
    cdef double complex[::1] a0 = s0_arr
    cdef double complex[::1] a1 = s1_arr
    cdef double complex[::1] a2 = s2_arr
    cdef double complex[::1] zv = za
    cdef double[::1] tv = ta
    with nogil:
        for i in range(n):
            _sums(Pv, mass, hbar, zv[i], tv[i], &mv[i], &a0[i], &a1[i], &a2[i])
    return m_arr, s0_arr, s1_arr, s2_arr


def log_scale(P, double mass, double hbar, double t):
    cdef const double[:, ::1] Pv = _check_packets(P)
    return _log_scale(Pv, mass, hbar, t)


def dopri5(P, double mass, double hbar, bint polya, z0, double t0, double t1,
           double rtol, double atol, double log_guard, long max_steps, double hmin):
    cdef const double[:, ::1] Pv = _check_packets(P)
    cdef double complex z = <double complex>complex(z0)
    cdef double direction = 1.0 if t1 >= t0 else -1.0
    cdef double span = fabs(t1 - t0)
    cdef long nfev = 1, nsteps = 0, cap = 1024, n = 0
    cdef int status = STATUS_OK, ok
    cdef double complex f0, p0, dp0, k1, k2, k3, k4, k5, k6, k7, v, pp, dpp, znew, err_vec
    cdef double hs
    cdef double lrel0, lrel, min_lrel, sc, d0, d1, d2, dm, h0, h1, h, t, tnew, err, fac
    cdef double facmax = 10.0
    cdef bint last

    ok = _rhs(Pv, mass, hbar, polya, z, t0, log_guard, &f0, &p0, &dp0, &lrel0)
    if not ok:
        return (np.array([t0]), np.array([complex(z)]), np.array([np.nan + 0j]),
                np.array([np.nan + 0j]), np.zeros((0, 5), dtype=np.complex128),
                STATUS_POLE, -np.inf, nfev)
    min_lrel = lrel0
    if span == 0.0:
        return (np.array([t0]), np.array([complex(z)]), np.array([complex(p0)]),
                np.array([complex(dp0)]), np.zeros((0, 5), dtype=np.complex128),
                STATUS_OK, min_lrel, nfev)

    ts_arr = np.empty(cap, dtype=np.float64)
    zs_arr = np.empty(cap, dtype=np.complex128)
    ps_arr = np.empty(cap, dtype=np.complex128)
    dps_arr = np.empty(cap, dtype=np.complex128)
    cont_arr = np.empty((cap, 5), dtype=np.complex128)
    cdef double[::1] tsv = ts_arr
    cdef double complex[::1] zsv = zs_arr
    cdef double complex[::1] psv = ps_arr
    cdef double complex[::1] dpsv = dps_arr
    cdef double complex[:, ::1] cv = cont_arr
    tsv[0] = t0
    zsv[0] = z
    psv[0] = p0
    dpsv[0] = dp0
    n = 1

    sc = atol + rtol * _cabs(z)
    d0 = _cabs(z) / sc
    d1 = _cabs(f0) / sc
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > span:
        h0 = span
    nfev += 1
    ok = _rhs(Pv, mass, hbar, polya, z + direction * h0 * f0, t0 + direction * h0,
              log_guard, &v, &pp, &dpp, &lrel)
    if not ok:
        h = h0 * 1e-3
    else:
        d2 = _cabs(v - f0) / sc / h0
        dm = d1 if d1 > d2 else d2
        if dm <= 1e-15:
            h1 = h0 * 1e-3 if h0 * 1e-3 > 1e-6 else 1e-6
        else:
            h1 = (0.01 / dm) ** 0.2
        h = 100.0 * h0 if 100.0 * h0 < h1 else h1
    if h > span:
        h = span

    t = t0
    k1 = f0
    while direction * (t1 - t) > 0.0:
        if nsteps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h < hmin:
            status = STATUS_UNDERFLOW
            break
        last = False
        if h >= fabs(t1 - t):
            h = fabs(t1 - t)
            last = True
        hs = direction * h
        nfev += 6
        ok = _rhs(Pv, mass, hbar, polya, z + hs * A21 * k1, t + C2 * hs, log_guard,
                  &k2, &pp, &dpp, &lrel)
        if ok:
            ok = _rhs(Pv, mass, hbar, polya, z + hs * (A31 * k1 + A32 * k2), t + C3 * hs,
                      log_guard, &k3, &pp, &dpp, &lrel)
        if ok:
            ok = _rhs(Pv, mass, hbar, polya, z + hs * (A41 * k1 + A42 * k2 + A43 * k3),
                      t + C4 * hs, log_guard, &k4, &pp, &dpp, &lrel)
        if ok:
            ok = _rhs(Pv, mass, hbar, polya,
                      z + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
                      t + C5 * hs, log_guard, &k5, &pp, &dpp, &lrel)
        if ok:
            ok = _rhs(Pv, mass, hbar, polya,
                      z + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                      t + hs, log_guard, &k6, &pp, &dpp, &lrel)
        if ok:
            znew = z + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            tnew = t1 if last else t + hs
            ok = _rhs(Pv, mass, hbar, polya, znew, tnew, log_guard, &k7, &pp, &dpp, &lrel)
        if not ok:
            # a stage fell inside the pole guard: retreat with a smaller step
            h *= 0.25
            facmax = 1.0
            if h < hmin:
                status = STATUS_POLE
                break
            continue
        err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = _cabs(z)
        if _cabs(znew) > sc:
            sc = _cabs(znew)
        sc = atol + rtol * sc
        err = _cabs(err_vec) / sc
        if err <= 1.0:
            if n >= cap:
                cap *= 2
                ts_arr = np.resize(ts_arr, cap)
                zs_arr = np.resize(zs_arr, cap)
                ps_arr = np.resize(ps_arr, cap)
                dps_arr = np.resize(dps_arr, cap)
                cont_arr = np.resize(cont_arr, (cap, 5))
                tsv = ts_arr
                zsv = zs_arr
                psv = ps_arr
                dpsv = dps_arr
                cv = cont_arr
            cv[n - 1, 0] = z
            cv[n - 1, 1] = znew - z
            cv[n - 1, 2] = hs * k1 - cv[n - 1, 1]
            cv[n - 1, 3] = cv[n - 1, 1] - hs * k7 - cv[n - 1, 2]
            cv[n - 1, 4] = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            t = tnew
            z = znew
            k1 = k7
            tsv[n] = t
            zsv[n] = z
            psv[n] = pp
            dpsv[n] = dpp
            if lrel < min_lrel:
                min_lrel = lrel
            n += 1
            nsteps += 1
            if err == 0.0:
                fac = 10.0
            else:
                fac = 0.9 * err ** -0.2
                if fac < 0.2:
                    fac = 0.2
                if fac > facmax:
                    fac = facmax
            h *= fac
            facmax = 10.0
        else:
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            h *= fac
            facmax = 1.0

    return (ts_arr[:n].copy(), zs_arr[:n].copy(), ps_arr[:n].copy(), dps_arr[:n].copy(),
            cont_arr[:n - 1].copy(), status, min_lrel, nfev)
