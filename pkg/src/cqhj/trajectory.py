"""Complex quantum and Polya trajectories, isochrone shooting, and linearised motion near stagnation points."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from . import wavefield as wf
from .errors import AlphaZero, NoConvergence, NotStagnation, PoleEncounter, ScenarioShape, StepUnderflow
from .wavefield import Superposition

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
#: abort when |psi| drops below POLE_GUARD_REL * psi_scale(t)
POLE_GUARD_REL = 1e-6
HMIN = 1e-12
MAX_STEPS = 200_000
ROUNDTRIP_TOL = 1e-6
ROUNDTRIP_RETRIES = 2
NODE_EXCLUSION = 1e-3
BETA_FD_STEP = 1e-5

KINDS = ("quantum", "polya")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted integrator steps sorted by increasing t, with dense output.

    ``cont[i]`` holds the continuous-extension coefficients of the step
    covering ``[t[i], t[i+1]]``; that step started at ``base[i]`` with signed
    size ``h[i]`` (negative for backward integration).
    """

    kind: str
    t: np.ndarray
    z: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    cont: np.ndarray
    base: np.ndarray
    h: np.ndarray
    launch: complex
    t_span: tuple[float, float]
    status: str  # "completed" | "aborted_near_pole"
    min_psi_seen: float  # min |psi| / psi_scale over accepted steps
    nfev: int = 0
    sup: Superposition | None = field(default=None, repr=False)

    @property
    def gamma(self) -> np.ndarray:
        return 2.0 * self.dp.real

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * self.dp.imag

    def __len__(self):
        return len(self.t)

    @property
    def samples(self):
        """Rows of (t, z, p, gamma, omega)."""
        return list(zip(self.t.tolist(), self.z.tolist(), self.p.tolist(), self.gamma.tolist(), self.omega.tolist()))

    def at(self, t):
        """Dense-output position at ``t`` (scalar or array) inside the covered span."""
        tq = np.asarray(t, dtype=float)
        lo, hi = self.t[0], self.t[-1]
        if np.any(tq < lo - 1e-12 * max(1.0, abs(lo))) or np.any(tq > hi + 1e-12 * max(1.0, abs(hi))):
            raise ValueError(f"t outside the integrated span [{lo}, {hi}]")
        if len(self.t) == 1:
            out = np.full(tq.shape, self.z[0])
            return complex(out) if out.ndim == 0 else out
        idx = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, len(self.t) - 2)
        th = (tq - self.base[idx]) / self.h[idx]
        c = self.cont[idx]
        r1, r2, r3, r4, r5 = (c[..., k] for k in range(5))
        out = r1 + th * (r2 + (1.0 - th) * (r3 + th * (r4 + (1.0 - th) * r5)))
        return complex(out) if out.ndim == 0 else out

    def resample(self, t):
        """Positions and fields at the requested times: ``(z, p, dp)``."""
        if self.sup is None:
            raise ValueError("trajectory carries no superposition to evaluate fields")
        tq = np.asarray(t, dtype=float)
        z = np.asarray(self.at(tq))
        m, s0, s1, s2 = wf._sums(self.sup, z, tq)
        r1 = s1 / s0
        hbar = self.sup.hbar
        return z, -1j * hbar * r1, -1j * hbar * (s2 / s0 - r1 * r1)

    def velocity(self) -> np.ndarray:
        """Recorded dz/dt at every sample."""
        m = self.sup.mass if self.sup is not None else 1.0
        v = self.p / m
        return np.conj(v) if self.kind == "polya" else v


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


def integrate(
    sup: Superposition,
    kind: str,
    z0: complex,
    t0: float,
    t1: float,
    tol: float = DEFAULT_TOL,
    *,
    rtol: float | None = None,
    atol: float | None = None,
    pole_guard: float = POLE_GUARD_REL,
    max_steps: int = MAX_STEPS,
    strict: bool = True,
) -> Trajectory:
    """Integrate dz/dt = p/m (quantum) or conj(p)/m (polya) from (z0, t0) to t1.

    Dormand-Prince 5(4) with local extrapolation and dense output. ``t1 < t0``
    integrates backwards. With ``strict`` a pole encounter raises
    :class:`PoleEncounter` carrying the partial trajectory; otherwise the
    partial trajectory is returned with ``status="aborted_near_pole"``.
    """
    _check_kind(kind)
    rtol = tol if rtol is None else rtol
    atol = tol if atol is None else atol
    k = _backend.kernels
    ts, zs, ps, dps, cont, status, min_lrel, nfev = k.dopri5(
        sup.array, sup.mass, sup.hbar, kind == "polya", complex(z0), float(t0), float(t1),
        float(rtol), float(atol), math.log(pole_guard), int(max_steps), HMIN,
    )
    if len(ts) > 1:
        base, h = ts[:-1].copy(), np.diff(ts)
    else:
        base, h = ts[:0].copy(), ts[:0].copy()
    if t1 < t0:
        ts, zs, ps, dps = ts[::-1], zs[::-1], ps[::-1], dps[::-1]
        cont, base, h = cont[::-1], base[::-1], h[::-1]
    st = "completed"
    if status == k.STATUS_UNDERFLOW:
        # error control can also starve the step right next to a node
        if min_lrel < math.log(pole_guard) + math.log(100.0):
            status = k.STATUS_POLE
    if status == k.STATUS_POLE:
        st = "aborted_near_pole"
    traj = Trajectory(
        kind=kind,
        t=np.ascontiguousarray(ts),
        z=np.ascontiguousarray(zs),
        p=np.ascontiguousarray(ps),
        dp=np.ascontiguousarray(dps),
        cont=np.ascontiguousarray(cont),
        base=np.ascontiguousarray(base),
        h=np.ascontiguousarray(h),
        launch=complex(z0),
        t_span=(float(t0), float(t1)),
        status=st,
        min_psi_seen=math.exp(min_lrel) if np.isfinite(min_lrel) else 0.0,
        nfev=int(nfev),
        sup=sup,
    )
    if status == k.STATUS_POLE:
        t_last = float(ts[0] if t1 < t0 else ts[-1])
        msg = f"{kind} trajectory from {complex(z0)!r} hit the pole guard near t={t_last:.6g}"
        if strict:
            raise PoleEncounter(msg, trajectory=traj)
        log.info(msg)
    elif status == k.STATUS_UNDERFLOW:
        raise StepUnderflow(f"step size fell below {HMIN} at t={float(ts[-1] if t1 >= t0 else ts[0]):.6g}")
    elif status == k.STATUS_MAX_STEPS:
        raise NoConvergence(f"integration exceeded {max_steps} steps")
    return traj


def winding_number(z: np.ndarray, center=0j) -> float:
    """Accumulated phase of ``z - center`` along a sampled path, in turns."""
    w = np.asarray(z) - center
    dphi = np.angle(w[1:] / w[:-1])
    return float(np.sum(dphi) / (2.0 * math.pi))


@dataclass(frozen=True)
class IsochroneEntry:
    x_arrival: float
    z_launch: complex | None
    residual: float | None
    status: str  # "ok" | "excluded" | "failed"
    message: str = ""


@dataclass(frozen=True)
class IsochroneResult:
    t_launch: float
    t_arrival: float
    kind: str
    entries: list[IsochroneEntry]

    @property
    def arrivals(self) -> list[tuple[float, complex]]:
        return [(e.x_arrival, e.z_launch) for e in self.entries if e.status == "ok"]

    @property
    def roundtrip_residuals(self) -> list[float]:
        return [e.residual for e in self.entries if e.status == "ok"]

    @property
    def excluded(self) -> int:
        return sum(e.status == "excluded" for e in self.entries)

    @property
    def failed(self) -> int:
        return sum(e.status == "failed" for e in self.entries)


def isochrone_targets(lo: float, hi: float, step: float) -> np.ndarray:
    """Evenly spaced arrival targets, rounded to suppress accumulated drift."""
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 12)


def on_axis_nodes_excluded(sup: Superposition, x: float, t_arrival: float, exclusion: float = NODE_EXCLUSION) -> bool:
    """True when ``x`` is within ``exclusion`` of a real-axis node at maximal interference."""
    from .nodal import symmetric_params

    try:
        sp = symmetric_params(sup)
    except ScenarioShape:
        return False
    if sp.vp == 0 or abs(t_arrival - sp.t_max_interference) > 1e-12 * max(1.0, t_arrival):
        return False
    half = 0.5 * sp.wavelength
    k = round(x / half - 0.5)
    return abs(x - (k + 0.5) * half) < exclusion


def _shoot(sup, kind, x, t_arrival, t_launch, tol):
    back = integrate(sup, kind, complex(x, 0.0), t_arrival, t_launch, tol)
    z_launch = complex(back.z[0])
    fwd = integrate(sup, kind, z_launch, t_launch, t_arrival, tol)
    return z_launch, abs(complex(fwd.z[-1]) - x)


def isochrone(
    sup: Superposition,
    kind: str,
    x_targets,
    t_arrival: float,
    t_launch: float,
    tol: float = DEFAULT_TOL,
    exclusion: float = NODE_EXCLUSION,
) -> IsochroneResult:
    """Shoot backwards from real-axis arrivals (x, t_arrival) to t_launch and verify by a forward pass.

    A target whose round trip misses by ROUNDTRIP_TOL or more is reshot with
    the tolerance tightened 100-fold, at most twice.
    """
    _check_kind(kind)
    entries = []
    for x in x_targets:
        x = float(x)
        if on_axis_nodes_excluded(sup, x, t_arrival, exclusion):
            entries.append(IsochroneEntry(x, None, None, "excluded", "node-adjacent target"))
            continue
        entry = None
        for attempt in range(ROUNDTRIP_RETRIES + 1):
            t_tol = tol * 0.01**attempt
            try:
                z_launch, resid = _shoot(sup, kind, x, t_arrival, t_launch, t_tol)
            except (PoleEncounter, StepUnderflow, NoConvergence) as exc:
                entry = IsochroneEntry(x, None, None, "failed", str(exc))
                break
            if resid < ROUNDTRIP_TOL:
                entry = IsochroneEntry(x, z_launch, resid, "ok", "" if attempt == 0 else f"tol {t_tol:.0e}")
                break
            entry = IsochroneEntry(x, z_launch, resid, "failed", "round trip mismatch")
        entries.append(entry)
    return IsochroneResult(float(t_launch), float(t_arrival), kind, entries)


@dataclass(frozen=True)
class StagnationExpansion:
    """Linear model p ~ alpha (z - z0) + beta (t - t0) about a stagnation point."""

    z0: complex
    t0: float
    alpha: complex
    beta: complex
    mass: float = 1.0


def stagnation_expansion(sup: Superposition, z0: complex, t0: float, fd_step: float = BETA_FD_STEP) -> StagnationExpansion:
    p0 = complex(wf.qmf(sup, z0, t0))
    if abs(p0) > 1e-8:
        raise NotStagnation(f"|p({z0!r}, {t0})| = {abs(p0):.3e} is not a stagnation point")
    dp, _, _ = wf.qmf_dz(sup, z0, t0)
    beta = (complex(wf.qmf(sup, z0, t0 + fd_step)) - complex(wf.qmf(sup, z0, t0 - fd_step))) / (2.0 * fd_step)
    return StagnationExpansion(complex(z0), float(t0), complex(dp), beta, sup.mass)


def approx_trajectory(exp: StagnationExpansion, z_start: complex, dt):
    """Closed-form solution of m dz/dt = alpha (z - z0) + beta (t - t0), started at (z_start, t0)."""
    if abs(exp.alpha) < 1e-12:
        raise AlphaZero("alpha vanishes; the linearised solution is singular")
    a = exp.alpha / exp.mass
    dt = np.asarray(dt, dtype=float)
    e = np.exp(a * dt)
    xi0 = complex(z_start) - exp.z0
    xi = xi0 * e + (exp.beta * exp.mass / exp.alpha**2) * (e - (1.0 + a * dt))
    out = exp.z0 + xi
    return complex(out) if out.ndim == 0 else out
