"""Pure-Python reference implementation of the hot kernels.

Mirrors ``_kernels.pyx`` function for function; the compiled module is used
when it imports, this one otherwise (see :mod:`cqhj._backend`).

Packets are passed as a float64 array of shape (K, 3) holding
``(x0, vp, sigma0)`` per row. Wave-function values are returned in
log-scaled form ``(M, S0, S1, S2)`` with

    psi = exp(M) * S0,   dpsi/dz = exp(M) * S1,   d2psi/dz2 = exp(M) * S2,

which keeps ratios such as the QMF finite far out in the complex plane where
the individual Gaussians overflow or underflow.
"""

import cmath
import math

import numpy as np

NAME = "python"

_LOG_2PI_4 = 0.25 * math.log(2.0 * math.pi)

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# continuous extension (Hairer's dopri5 dense output, 4th order)
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

STATUS_OK = 0
STATUS_POLE = 1
STATUS_UNDERFLOW = 2
STATUS_MAX_STEPS = 3


def log_sums(P, mass, hbar, z, t):
    """Log-scaled psi, psi', psi'' of the superposition at one (z, t)."""
    z = complex(z)
    terms = []
    for x0, vp, s0 in P:
        st = s0 * complex(1.0, hbar * t / (2.0 * mass * s0 * s0))
        ss = st * s0
        u = z - (x0 + vp * t)
        p = mass * vp
        log_amp = -_LOG_2PI_4 - 0.5 * cmath.log(st)
        expo = log_amp - u * u / (4.0 * ss) + 1j * (p * u + 0.5 * p * vp * t) / hbar
        g = -u / (2.0 * ss) + 1j * p / hbar
        terms.append((expo, g, -1.0 / (2.0 * ss)))
    m = max(e.real for e, _, _ in terms)
    s0 = s1 = s2 = 0j
    for expo, g, dg in terms:
        w = cmath.exp(expo - m)
        s0 += w
        s1 += w * g
        s2 += w * (g * g + dg)
    return m, s0, s1, s2


def log_sums_grid(P, mass, hbar, z, t):
    """Vectorised :func:`log_sums` over equal-length 1-D arrays ``z`` and ``t``."""
    z = np.asarray(z, dtype=np.complex128)
    t = np.asarray(t, dtype=np.float64)
    expos, gs, dgs = [], [], []
    for x0, vp, s0 in P:
        st = s0 * (1.0 + 1j * hbar * t / (2.0 * mass * s0 * s0))
        ss = st * s0
        u = z - (x0 + vp * t)
        p = mass * vp
        log_amp = -_LOG_2PI_4 - 0.5 * np.log(st)
        expos.append(log_amp - u * u / (4.0 * ss) + 1j * (p * u + 0.5 * p * vp * t) / hbar)
        gs.append(-u / (2.0 * ss) + 1j * p / hbar)
        dgs.append(-1.0 / (2.0 * ss))
    m = np.max([e.real for e in expos], axis=0)
    s0 = np.zeros(z.shape, dtype=np.complex128)
    s1 = np.zeros_like(s0)
    s2 = np.zeros_like(s0)
    for expo, g, dg in zip(expos, gs, dgs):
        w = np.exp(expo - m)
        s0 += w
        s1 += w * g
        s2 += w * (g * g + dg)
    return m, s0, s1, s2


def log_scale(P, mass, hbar, t):
    """log of sum_k |A_t,k|, an upper bound of max |psi| on the real axis."""
    total = 0.0
    for _, _, s0 in P:
        sig = s0 * math.hypot(1.0, hbar * t / (2.0 * mass * s0 * s0))
        total += math.exp(-_LOG_2PI_4 - 0.5 * math.log(sig))
    return math.log(total)


def _rhs(P, mass, hbar, polya, z, t, log_guard):
    m, s0, s1, s2 = log_sums(P, mass, hbar, z, t)
    if s0 == 0:
        return None
    lrel = m + math.log(abs(s0)) - log_scale(P, mass, hbar, t)
    # a pole needs both a small |psi| and cancellation between the packet terms;
    # a small |psi| alone only means the Gaussian tails
    if lrel < log_guard and math.log(abs(s0)) < log_guard:
        return None
    r = s1 / s0
    p = -1j * hbar * r
    dp = -1j * hbar * (s2 / s0 - r * r)
    v = (p.conjugate() if polya else p) / mass
    return v, p, dp, lrel


def dopri5(P, mass, hbar, polya, z0, t0, t1, rtol, atol, log_guard, max_steps, hmin):
    """Adaptive Dormand-Prince 5(4) integration of dz/dt = p/m (or conj(p)/m).

    Returns ``(ts, zs, ps, dps, cont, status, min_log_rel, nfev)`` where
    ``cont[i]`` holds the five dense-output coefficients of step i.
    """
    z0 = complex(z0)
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    nfev = 1
    ev = _rhs(P, mass, hbar, polya, z0, t0, log_guard)
    if ev is None:
        empty = np.zeros((0, 5), dtype=np.complex128)
        return (np.array([t0]), np.array([z0]), np.array([np.nan + 0j]),
                np.array([np.nan + 0j]), empty, STATUS_POLE, -math.inf, nfev)
    f0, p0, dp0, lrel0 = ev
    ts, zs, ps, dps, cont = [t0], [z0], [p0], [dp0], []
    min_lrel = lrel0
    if span == 0.0:
        return (np.array(ts), np.array(zs), np.array(ps), np.array(dps),
                np.zeros((0, 5), dtype=np.complex128), STATUS_OK, min_lrel, nfev)

    # initial step (Hairer & Wanner, II.4)
    sc = atol + rtol * abs(z0)
    d0 = abs(z0) / sc
    d1 = abs(f0) / sc
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    ev = _rhs(P, mass, hbar, polya, z0 + direction * h0 * f0, t0 + direction * h0, log_guard)
    nfev += 1
    if ev is None:
        h = h0 * 1e-3
    else:
        d2 = abs(ev[0] - f0) / sc / h0
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        h = min(100.0 * h0, h1)
    h = min(h, span)

    t, z, k1 = t0, z0, f0
    status = STATUS_OK
    facmax = 10.0
    nsteps = 0
    while direction * (t1 - t) > 0.0:
        if nsteps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h < hmin:
            status = STATUS_UNDERFLOW
            break
        last = False
        if h >= abs(t1 - t):
            h = abs(t1 - t)
            last = True
        hs = direction * h
        stages = None
        e2 = _rhs(P, mass, hbar, polya, z + hs * A21 * k1, t + C2 * hs, log_guard)
        if e2 is not None:
            k2 = e2[0]
            e3 = _rhs(P, mass, hbar, polya, z + hs * (A31 * k1 + A32 * k2), t + C3 * hs, log_guard)
            if e3 is not None:
                k3 = e3[0]
                e4 = _rhs(P, mass, hbar, polya,
                          z + hs * (A41 * k1 + A42 * k2 + A43 * k3), t + C4 * hs, log_guard)
                if e4 is not None:
                    k4 = e4[0]
                    e5 = _rhs(P, mass, hbar, polya,
                              z + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
                              t + C5 * hs, log_guard)
                    if e5 is not None:
                        k5 = e5[0]
                        e6 = _rhs(P, mass, hbar, polya,
                                  z + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                                  t + hs, log_guard)
                        if e6 is not None:
                            k6 = e6[0]
                            znew = z + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
                            tnew = t1 if last else t + hs
                            e7 = _rhs(P, mass, hbar, polya, znew, tnew, log_guard)
                            if e7 is not None:
                                stages = (k2, k3, k4, k5, k6, e7)
        nfev += 6
        if stages is None:
            # a stage fell inside the pole guard: retreat with a smaller step
            h *= 0.25
            facmax = 1.0
            if h < hmin:
                status = STATUS_POLE
                break
            continue
        k2, k3, k4, k5, k6, e7 = stages
        k7 = e7[0]
        err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * max(abs(z), abs(znew))
        err = abs(err_vec) / sc
        if err <= 1.0:
            r1 = z
            r2 = znew - z
            r3 = hs * k1 - r2
            r4 = r2 - hs * k7 - r3
            r5 = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            cont.append((r1, r2, r3, r4, r5))
            t, z, k1 = tnew, znew, k7
            ts.append(t)
            zs.append(z)
            ps.append(e7[1])
            dps.append(e7[2])
            min_lrel = min(min_lrel, e7[3])
            nsteps += 1
            fac = 10.0 if err == 0.0 else min(facmax, max(0.2, 0.9 * err ** -0.2))
            h *= fac
            facmax = 10.0
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            facmax = 1.0

    cont_arr = np.array(cont, dtype=np.complex128).reshape(-1, 5)
    return (np.array(ts, dtype=np.float64), np.array(zs, dtype=np.complex128),
            np.array(ps, dtype=np.complex128), np.array(dps, dtype=np.complex128),
            cont_arr, status, min_lrel, nfev)
