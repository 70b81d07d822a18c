"""Nodal-line dynamics, characteristic-point refinement and circulation integrals.

The closed-form results (node positions, nodal-line angle and rotation rate,
node spacing, nodal trajectories) hold for the symmetric head-on pair built
by :meth:`Superposition.symmetric`: left packet at -x0 moving with +vp, right
packet at +x0 moving with -vp, common sigma0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import wavefield as wf
from .errors import (
    ContourThroughPole,
    ConvergedToNode,
    DegenerateScenario,
    NoConvergence,
    ScenarioShape,
)
from .wavefield import Superposition

log = logging.getLogger(__name__)

NEWTON_MAX_ITER = 50
STEP_TOL = 1e-13
NODE_CANCELLATION = 1e-8
#: circulation quadrature: points per unit of radius/spacing, and the floor
QUAD_POINTS = 256
QUAD_TOL = 1e-11
MAX_QUAD_POINTS = 1 << 16


class SymmetricParams(NamedTuple):
    x0: float
    vp: float
    sigma0: float
    mass: float
    hbar: float

    @property
    def tau(self) -> float:
        return 2.0 * self.mass * self.sigma0**2 / self.hbar

    @property
    def p_s(self) -> float:
        return self.hbar / (2.0 * self.sigma0)

    @property
    def wavelength(self) -> float:
        """de Broglie wavelength 2 pi hbar / (m vp)."""
        return 2.0 * math.pi * self.hbar / (self.mass * self.vp)

    @property
    def t_max_interference(self) -> float:
        """Time at which the nodal line lies on the real axis."""
        return self.x0 / self.vp


def symmetric_params(sup: Superposition, rtol: float = 1e-12) -> SymmetricParams:
    """Extract (x0, vp, sigma0) of a symmetric head-on pair, or raise ScenarioShape."""
    if len(sup.packets) != 2:
        raise ScenarioShape(f"expected 2 packets, got {len(sup.packets)}")
    left, right = sorted(sup.packets, key=lambda p: p.x0)
    scale = max(abs(left.x0), abs(left.vp), abs(left.sigma0), 1.0)

    def close(a, b):
        return abs(a - b) <= rtol * scale

    if not (close(left.x0, -right.x0) and close(left.vp, -right.vp) and close(left.sigma0, right.sigma0)):
        raise ScenarioShape("packets are not the mirror-symmetric pair (x0, vp) <-> (-x0, -vp)")
    if left.x0 == right.x0 and left.vp != -right.vp:
        raise ScenarioShape("coincident packets")
    return SymmetricParams(right.x0, left.vp, left.sigma0, left.mass, left.hbar)


@dataclass(frozen=True)
class NodalTrajectoryLine:
    """Straight line y = slope * x + intercept traced by node n."""

    slope: float
    intercept: float
    n: int

    def residual(self, z: complex) -> float:
        return abs(z.imag - (self.slope * z.real + self.intercept))


@dataclass(frozen=True)
class NodalLineState:
    t: float
    theta: float
    omega_rate: float
    node_positions: list[tuple[int, complex]]
    spacing: float


@dataclass(frozen=True)
class CharacteristicPoint:
    kind: str  # "node" | "stagnation"
    z: complex
    t: float
    order: int
    residual: float
    iterations: int = 0


@dataclass(frozen=True)
class ContourSpec:
    """Circle of ``radius`` about ``center`` sampled at ``n_points`` (None: automatic)."""

    center: complex
    radius: float
    n_points: int | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("contour radius must be > 0")
        if self.n_points is not None and self.n_points < 16:
            raise ValueError("contour needs at least 16 quadrature points")


def node_position(sup: Superposition, n: int, t):
    """Closed-form position z_n(t) = x_n(t) + i y_n(t) of the n-th node."""
    sp = symmetric_params(sup)
    x0, vp, s0, m, hbar = sp
    tau = sp.tau
    t = np.asarray(t, dtype=float)
    denom = x0**2 + vp**2 * tau**2
    k = math.pi * (n + 0.5)
    x = k * (hbar / m) * (x0 * t + vp * tau**2) / denom
    y = k * 2.0 * s0**2 * (vp * t - x0) / denom
    z = x + 1j * y
    return complex(z) if z.ndim == 0 else z


def theta_limits(sup: Superposition) -> tuple[float, float]:
    """Initial and limiting nodal-line angles (radians)."""
    sp = symmetric_params(sup)
    if sp.vp == 0:
        raise DegenerateScenario("vp = 0: the nodal line does not rotate from a finite angle")
    theta0 = math.atan(-sp.x0 / (sp.vp * sp.tau))
    return theta0, theta0 + 0.5 * math.pi


def nodal_angle(sup: Superposition, t):
    """Angle of the nodal line against the positive real axis (radians).

    Computed from the n = 0 node as atan2(y_0, x_0) and mapped continuously
    onto the open interval (theta0 - pi/2, theta0 + pi/2) swept for t in (-inf, inf).
    """
    theta0, _ = theta_limits(sup)
    z = np.asarray(node_position(sup, 0, t))
    raw = np.arctan2(z.imag, z.real)
    lo = theta0 - 0.5 * math.pi
    theta = lo + np.mod(raw - lo, math.pi)
    # exact lower endpoint belongs to t = -inf only
    theta = np.where(theta <= lo, theta + math.pi, theta)
    return float(theta) if theta.ndim == 0 else theta


def nodal_rate(sup: Superposition, t):
    """Rotation rate d(theta)/dt = hbar / (2 m sigma_t^2)."""
    sp = symmetric_params(sup)
    sig_t = wf.sigma_t(sup.packets[0], t)
    rate = sp.hbar / (2.0 * sp.mass * sig_t**2)
    return float(rate) if np.ndim(rate) == 0 else rate


def node_spacing(sup: Superposition, t):
    """Distance between consecutive nodes, pi hbar sigma_t / (p_s sqrt(x0^2 + vp^2 tau^2))."""
    sp = symmetric_params(sup)
    sig_t = wf.sigma_t(sup.packets[0], t)
    d = math.pi * sp.hbar * sig_t / (sp.p_s * math.sqrt(sp.x0**2 + sp.vp**2 * sp.tau**2))
    return float(d) if np.ndim(d) == 0 else d


def nodal_trajectory(sup: Superposition, n: int) -> NodalTrajectoryLine:
    sp = symmetric_params(sup)
    if sp.x0 == 0:
        raise DegenerateScenario("x0 = 0: nodal trajectories are vertical lines (undefined slope)")
    return NodalTrajectoryLine(
        slope=sp.vp * sp.tau / sp.x0,
        intercept=-(2 * n + 1) * math.pi * sp.sigma0**2 / sp.x0,
        n=n,
    )


def nodal_line_state(sup: Superposition, t: float, n_range=range(-5, 5)) -> NodalLineState:
    return NodalLineState(
        t=float(t),
        theta=nodal_angle(sup, t),
        omega_rate=nodal_rate(sup, t),
        node_positions=[(n, node_position(sup, n, t)) for n in n_range],
        spacing=node_spacing(sup, t),
    )


def stagnation_seed(sup: Superposition, n: int, t: float) -> complex:
    """Midpoint between nodes n and n+1, the starting guess for a stagnation point."""
    return 0.5 * (node_position(sup, n, t) + node_position(sup, n + 1, t))


def _default_max_step(sup, t):
    """Half the node spacing, the damping threshold for Newton steps."""
    try:
        return 0.5 * node_spacing(sup, t)
    except ScenarioShape:
        return None


def _newton(sup, seed, t, order, max_step, max_drift):
    """Newton iteration on the ``order``-th z-derivative of psi (0: psi, 1: psi').

    Stops once the Newton step is at round-off level. The residual is
    reported relative to psi_scale(t).
    """
    z = complex(seed)
    scale = wf.psi_scale(sup, t)
    history = []
    for it in range(NEWTON_MAX_ITER + 1):
        m, s0, s1, s2 = wf._sums(sup, z, t)
        f, fp = (s0, s1) if order == 0 else (s1, s2)
        resid = math.exp(m) * abs(f) / scale
        history.append(abs(f))
        if f == 0:
            return z, resid, it, s0
        if it == NEWTON_MAX_ITER or fp == 0:
            break
        step = f / fp
        if abs(step) <= STEP_TOL * max(1.0, abs(z)):
            log.debug("newton(order=%d) converged in %d steps: %s", order, it, history)
            return z - step, resid, it, s0
        if max_step is not None and abs(step) > max_step:
            step *= 0.5
        z = z - step
        if max_drift is not None and abs(z - seed) > max_drift:
            raise NoConvergence(f"Newton left the basin of the seed {seed!r} (now at {z!r})")
    raise NoConvergence(
        f"Newton on d^{order}psi did not converge from seed {seed!r} at t={t}: last |f| {history[-3:]}"
    )


def refine_node(sup: Superposition, seed: complex, t: float) -> CharacteristicPoint:
    """Newton refinement of a zero of psi near ``seed``."""
    half = _default_max_step(sup, t)
    drift = None if half is None else 4.0 * half
    z, resid, it, _ = _newton(sup, seed, t, 0, half, drift)
    return CharacteristicPoint("node", z, float(t), 1, resid, it)


def refine_stagnation(sup: Superposition, seed: complex, t: float) -> CharacteristicPoint:
    """Newton refinement of a zero of psi' near ``seed``; rejects zeros of psi."""
    half = _default_max_step(sup, t)
    drift = None if half is None else 4.0 * half
    z, resid, it, s0 = _newton(sup, seed, t, 1, half, drift)
    # s0 is psi divided by its largest packet term: near zero only when the terms cancel
    if abs(s0) < NODE_CANCELLATION:
        raise ConvergedToNode(f"stagnation refinement converged onto a node at {z!r}")
    return CharacteristicPoint("stagnation", z, float(t), 1, resid, it)


def characteristic_points(
    sup: Superposition, t: float, n_range=range(-5, 5), skip_failures: bool = False
) -> list[tuple[int, CharacteristicPoint]]:
    """Refined nodes n in ``n_range`` and the stagnation points between them, ordered along the line.

    Each entry is ``(n, point)``; a stagnation point carries the n of the
    node below it. With ``skip_failures`` seeds that do not refine are
    dropped (far from the packet overlap the stagnation points leave the
    nodal line) instead of raising.
    """
    pts = []
    ns = list(n_range)
    for n in ns:
        seeds = [(n, refine_node, node_position(sup, n, t))]
        if n + 1 in ns:
            seeds.append((n + 0.5, refine_stagnation, stagnation_seed(sup, n, t)))
        for key, refine, seed in seeds:
            try:
                pts.append((key, n, refine(sup, seed, t)))
            except (NoConvergence, ConvergedToNode) as exc:
                if not skip_failures:
                    raise
                log.info("t=%g n=%d: %s", t, n, exc)
    return [(n, p) for _, n, p in sorted(pts, key=lambda item: item[0])]


def _quadrature_points(sup, contour, t):
    if contour.n_points is not None:
        return contour.n_points
    try:
        d = node_spacing(sup, t)
    except ScenarioShape:
        return QUAD_POINTS
    return max(QUAD_POINTS, int(math.ceil(QUAD_POINTS * contour.radius / d)))


def _contour_integral(sup, contour, t, n):
    phi = 2.0 * math.pi * np.arange(n) / n
    e = np.exp(1j * phi)
    z = contour.center + contour.radius * e
    m, s0, s1, _ = wf._sums(sup, z, np.full(n, float(t)))
    eps = wf.node_epsilon(sup, t)
    bad, _ = wf._near_node(m, s0, math.log(eps))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ContourThroughPole(f"contour point {z[k]!r} within node_epsilon={eps:.3e} of a node")
    p = -1j * sup.hbar * s1 / s0
    return np.sum(p * 1j * contour.radius * e) * (2.0 * math.pi / n)


def circulation(sup: Superposition, contour: ContourSpec, t: float) -> tuple[float, float]:
    """Return ``(gamma, flux)`` = (Re, Im) of the counterclockwise integral of p dz.

    Trapezoid rule on the circle, spectrally accurate for the periodic
    integrand; the rate depends on how close the nearest node sits to the
    contour. With automatic resolution the point count is doubled until two
    successive sums agree to QUAD_TOL (at most MAX_QUAD_POINTS points).
    """
    n = _quadrature_points(sup, contour, t)
    integral = _contour_integral(sup, contour, t, n)
    if contour.n_points is None:
        while n < MAX_QUAD_POINTS:
            n *= 2
            finer = _contour_integral(sup, contour, t, n)
            converged = abs(finer - integral) <= QUAD_TOL * max(1.0, abs(finer))
            integral = finer
            if converged:
                break
    return float(integral.real), float(integral.imag)


def pole_local_div_vort(n_order: int, dz: complex, hbar: float = 1.0) -> tuple[float, float]:
    """Leading-order divergence and vorticity at offset ``dz`` from an n-th order node."""
    x, y = dz.real, dz.imag
    r2 = x * x + y * y
    if r2 == 0.0:
        raise ZeroDivisionError("pole-local formulas are singular at the pole itself")
    gamma = n_order * hbar * 4.0 * x * y / r2**2
    omega = n_order * hbar * 2.0 * (x * x - y * y) / r2**2
    return gamma, omega


def pole_streamlines(n_samples: int = 201, radius: float = 0.1):
    """Hyperbolic QMF streamlines about a pole at the origin, labelled 1-4.

    Streamlines 1 and 3: (x, y) = (-/+ r sec s, +/- r tan s); streamlines 2 and 4:
    (x, y) = (+/- r tan s, -/+ r sec s); s runs over [-pi/3, pi/3].
    Returns ``{label: (s, dz)}``.
    """
    s = np.linspace(-math.pi / 3, math.pi / 3, n_samples)
    sec, tan = 1.0 / np.cos(s), np.tan(s)
    return {
        1: (s, -radius * sec + 1j * radius * tan),
        2: (s, radius * tan - 1j * radius * sec),
        3: (s, radius * sec - 1j * radius * tan),
        4: (s, -radius * tan + 1j * radius * sec),
    }
