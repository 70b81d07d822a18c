"""Wrapping times from vorticity histories and the nodal-line interference lifetime."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import uniform_filter1d

from . import nodal
from . import trajectory as tj
from .errors import ConvergedToNode, EmptyEnsemble, NeverEnters, NoConvergence, TooShort
from .wavefield import Superposition

log = logging.getLogger(__name__)

RESAMPLE_DT = 1e-3
SMOOTHING = 5
MIN_SAMPLES = 100
#: ensemble trajectories run to ENSEMBLE_SPAN * (x0/vp) so late minima are seen
ENSEMBLE_SPAN = 4.0
TRACK_STRIDE = 10


@dataclass(frozen=True)
class WrappingRecord:
    trajectory_id: str
    t_first_min: float
    t_last_min: float
    t_wrap: float
    loop_count: int
    valid: bool
    unbounded: bool = False
    omega_turns: float = 0.0  # integral of Omega/(2m) over the bracket, in turns

    @classmethod
    def invalid(cls, trajectory_id, reason=""):
        log.debug("wrapping record %s invalid: %s", trajectory_id, reason)
        return cls(trajectory_id, math.nan, math.nan, 0.0, 0, False)


@dataclass(frozen=True)
class LifetimeWindow:
    theta_enter: float  # degrees
    theta_exit: float
    t_enter: float
    t_exit: float
    lifetime: float


@dataclass(frozen=True)
class EnsembleSummary:
    mean: float
    minimum: float
    maximum: float
    n_valid: int
    n_invalid: int
    n_unbounded: int
    n_excluded: int = 0
    n_failed: int = 0
    common_window: tuple[float, float] = (math.nan, math.nan)
    records: list[WrappingRecord] = field(default_factory=list, repr=False)

    @property
    def mean_is_lower_bound(self) -> bool:
        return self.n_unbounded > 0


def smooth(series: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average; ``window`` <= 1 returns the input."""
    if window <= 1:
        return np.asarray(series, dtype=float)
    return uniform_filter1d(np.asarray(series, dtype=float), size=int(window), mode="nearest")


def local_minima(series: np.ndarray) -> np.ndarray:
    """Indices of interior samples strictly below both neighbours."""
    s = np.asarray(series)
    return np.flatnonzero((s[1:-1] < s[:-2]) & (s[1:-1] < s[2:])) + 1


def positive_regions(series: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs ``[start, stop)`` where the series is > 0."""
    pos = np.concatenate(([False], np.asarray(series) > 0, [False]))
    edges = np.flatnonzero(np.diff(pos.astype(np.int8)))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _track_stagnation(sup, t, z, i_seed, lo, hi):
    """Stagnation point nearest ``z[i_seed]``, continued over samples ``lo..hi``."""
    try:
        seed = nodal.refine_stagnation(sup, z[i_seed], t[i_seed]).z
    except (NoConvergence, ConvergedToNode):
        return None
    knots = {i_seed: seed}
    for stop, step in ((hi, TRACK_STRIDE), (lo, -TRACK_STRIDE)):
        c = seed
        idx = list(range(i_seed + step, stop, step)) + [stop]
        for i in idx:
            if i == i_seed:
                continue
            try:
                c = nodal.refine_stagnation(sup, c, t[i]).z
            except (NoConvergence, ConvergedToNode):
                pass
            knots[i] = c
    ks = np.array(sorted(knots))
    cs = np.array([knots[k] for k in ks])
    tt = t[lo : hi + 1]
    return np.interp(tt, t[ks], cs.real) + 1j * np.interp(tt, t[ks], cs.imag)


def wrapping_time(
    traj: tj.Trajectory,
    smoothing: int = SMOOTHING,
    dt: float = RESAMPLE_DT,
    trajectory_id: str = "",
) -> WrappingRecord:
    """First and last Omega minima flanking the dominant positive-vorticity region.

    The trajectory is resampled on a uniform grid of step ``dt``; Omega is
    smoothed with a ``smoothing``-point moving average. The dominant region is
    the contiguous Omega > 0 run with the largest integral of Omega. A region
    running into the end of the trajectory gives an unbounded record whose
    ``t_wrap`` is a lower bound.
    """
    if traj.sup is None:
        raise ValueError("trajectory carries no superposition")
    t0, t1 = float(traj.t[0]), float(traj.t[-1])
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    if n < MIN_SAMPLES:
        raise TooShort(f"trajectory spans {t1 - t0:.3g}, fewer than {MIN_SAMPLES} samples at dt={dt}")
    t = t0 + dt * np.arange(n)
    z, _, dp = traj.resample(t)
    omega = smooth(2.0 * dp.imag, smoothing)
    regions = positive_regions(omega)
    if not regions:
        return WrappingRecord.invalid(trajectory_id, "no positive vorticity")
    weights = [trapezoid(omega[a:b], dx=dt) if b - a > 1 else omega[a] * dt for a, b in regions]
    a, b = regions[int(np.argmax(weights))]
    minima = local_minima(omega)
    before = minima[minima < a]
    after = minima[minima >= b]
    if before.size == 0 and after.size == 0:
        return WrappingRecord.invalid(trajectory_id, "positive region has no flanking minima")
    if before.size == 0:
        raise TooShort(f"positive-vorticity region starts at t={t[a]:.4g} with no earlier minimum")
    i0 = int(before[-1])
    unbounded = after.size == 0
    i1 = n - 1 if unbounded else int(after[0])
    mass = traj.sup.mass
    omega_turns = float(trapezoid(2.0 * dp.imag[i0 : i1 + 1], dx=dt) / (2.0 * mass) / (2.0 * math.pi))
    i_peak = a + int(np.argmax(omega[a:b]))
    center = _track_stagnation(traj.sup, t, z, i_peak, i0, i1)
    if center is None:
        loops = 0
    else:
        w = tj.winding_number(z[i0 : i1 + 1] - center)
        loops = int(math.floor(abs(w)))
    return WrappingRecord(
        trajectory_id=trajectory_id,
        t_first_min=float(t[i0]),
        t_last_min=float(t[i1]),
        t_wrap=float(t[i1] - t[i0]),
        loop_count=loops,
        valid=True,
        unbounded=unbounded,
        omega_turns=omega_turns,
    )


def average_wrapping_time(records) -> float:
    """Mean t_wrap over valid records; unbounded records enter with their lower bound."""
    vals = [r.t_wrap for r in records if r.valid]
    if not vals:
        raise EmptyEnsemble("no valid wrapping records")
    return float(np.mean(vals))


def summarize(records, n_excluded: int = 0, n_failed: int = 0) -> EnsembleSummary:
    """Aggregates over valid records; ``mean_is_lower_bound`` when any record is unbounded."""
    records = list(records)
    mean = average_wrapping_time(records)
    good = [r for r in records if r.valid]
    return EnsembleSummary(
        mean=mean,
        minimum=min(r.t_wrap for r in good),
        maximum=max(r.t_wrap for r in good),
        n_valid=len(good),
        n_invalid=len(records) - len(good),
        n_unbounded=sum(r.unbounded for r in good),
        n_excluded=n_excluded,
        n_failed=n_failed,
        common_window=(max(r.t_first_min for r in good), min(r.t_last_min for r in good)),
        records=records,
    )


def ensemble_wrapping(
    sup: Superposition,
    x_targets,
    t_arrival: float,
    t_launch: float = 0.0,
    t_end: float | None = None,
    tol: float = tj.DEFAULT_TOL,
    smoothing: int = SMOOTHING,
):
    """Isochrone ensemble: shoot launch points, integrate forward to ``t_end``, extract wrapping records.

    ``t_end`` defaults to ENSEMBLE_SPAN times the maximal-interference time.
    Returns ``(records, isochrone_result, trajectories)``; pass the records
    to :func:`summarize` for the aggregates.
    """
    if t_end is None:
        t_end = ENSEMBLE_SPAN * nodal.symmetric_params(sup).t_max_interference
    iso = tj.isochrone(sup, "quantum", x_targets, t_arrival, t_launch, tol)
    records, trajs = [], {}
    for x, z0 in iso.arrivals:
        tid = f"{x:+.4f}"
        traj = tj.integrate(sup, "quantum", z0, t_launch, t_end, tol, strict=False)
        trajs[tid] = traj
        try:
            rec = wrapping_time(traj, smoothing, trajectory_id=tid)
        except TooShort as exc:
            log.info("trajectory %s: %s", tid, exc)
            rec = WrappingRecord.invalid(tid, str(exc))
        records.append(rec)
    return records, iso, trajs


def time_at_angle(sup: Superposition, theta_deg: float) -> float:
    """Time at which the nodal line reaches ``theta_deg``; 0 below theta0, +inf at or above theta_inf."""
    sp = nodal.symmetric_params(sup)
    theta0, theta_inf = nodal.theta_limits(sup)
    th = math.radians(theta_deg)
    if th <= theta0:
        return 0.0
    if th >= theta_inf:
        return math.inf
    return sp.tau * math.tan(th - theta0)


def interference_lifetime(sup: Superposition, theta_enter: float = -10.0, theta_exit: float = 10.0) -> LifetimeWindow:
    """Time window in which the nodal line lies within [theta_enter, theta_exit] degrees of the real axis."""
    if not theta_enter < theta_exit:
        raise ValueError("theta_enter must be below theta_exit")
    _, theta_inf = nodal.theta_limits(sup)
    if math.radians(theta_enter) >= theta_inf:
        raise NeverEnters(f"nodal line never reaches {theta_enter} deg (limit {math.degrees(theta_inf):.4f} deg)")
    t_enter = time_at_angle(sup, theta_enter)
    t_exit = time_at_angle(sup, theta_exit)
    return LifetimeWindow(theta_enter, theta_exit, t_enter, t_exit, t_exit - t_enter)
