"""Complex-extended wave function of a free Gaussian superposition and its local fields.

All quantities are closed form. Derivatives in z are analytic; finite
differences only appear in the test-suite oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _backend
from .errors import PoleProximity

#: node_epsilon = NODE_EPS_REL * psi_scale(t)
NODE_EPS_REL = 1e-12


@dataclass(frozen=True)
class GaussianPacket:
    """One free Gaussian component (atomic units)."""

    x0: float
    vp: float
    sigma0: float
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be > 0, got {self.hbar}")

    @property
    def momentum(self) -> float:
        return self.mass * self.vp

    @property
    def energy(self) -> float:
        """Translational energy E = p^2/2m carried by the plane-wave factor."""
        return self.momentum**2 / (2.0 * self.mass)

    @property
    def mean_energy(self) -> float:
        """Average energy including the spreading contribution hbar^2/(8 m sigma0^2)."""
        return self.energy + self.hbar**2 / (8.0 * self.mass * self.sigma0**2)

    @property
    def tau(self) -> float:
        """Spreading time scale 2 m sigma0^2 / hbar."""
        return 2.0 * self.mass * self.sigma0**2 / self.hbar

    @property
    def p_s(self) -> float:
        """Effective spreading momentum hbar / (2 sigma0)."""
        return self.hbar / (2.0 * self.sigma0)

    @property
    def v_s(self) -> float:
        return self.p_s / self.mass

    def center(self, t):
        return self.x0 + self.vp * t


@dataclass(frozen=True)
class Superposition:
    """Ordered sum of Gaussian packets sharing mass and hbar."""

    packets: tuple[GaussianPacket, ...]

    def __post_init__(self):
        packets = tuple(self.packets)
        if not packets:
            raise ValueError("a superposition needs at least one packet")
        object.__setattr__(self, "packets", packets)
        m, h = packets[0].mass, packets[0].hbar
        for pk in packets[1:]:
            if pk.mass != m or pk.hbar != h:
                raise ValueError("all packets must share mass and hbar")

    @classmethod
    def symmetric(cls, x0, vp, sigma0, mass=1.0, hbar=1.0) -> "Superposition":
        """Head-on pair: left packet at -x0 moving with +vp, right at +x0 with -vp."""
        return cls(
            (
                GaussianPacket(-x0, vp, sigma0, mass, hbar),
                GaussianPacket(x0, -vp, sigma0, mass, hbar),
            )
        )

    @property
    def mass(self) -> float:
        return self.packets[0].mass

    @property
    def hbar(self) -> float:
        return self.packets[0].hbar

    @cached_property
    def array(self) -> np.ndarray:
        """Packet parameters as a contiguous (K, 3) array of (x0, vp, sigma0)."""
        arr = np.array([[p.x0, p.vp, p.sigma0] for p in self.packets], dtype=np.float64)
        arr.setflags(write=False)
        return arr


@dataclass(frozen=True)
class FieldSample:
    """Every local field value at one space-time point."""

    z: complex
    t: float
    psi: complex
    dpsi: complex
    p: complex
    dp: complex
    gamma_div: float
    omega_vort: float
    q: complex
    pvf: tuple[float, float]
    s_real: float
    s_imag: float


def sigma_tilde(packet: GaussianPacket, t):
    """Complex time-dependent spreading sigma0 (1 + i hbar t / (2 m sigma0^2))."""
    return packet.sigma0 * (1.0 + 1j * packet.hbar * np.asarray(t) / (2.0 * packet.mass * packet.sigma0**2))


def sigma_t(packet: GaussianPacket, t):
    """Real width |sigma_tilde(t)|."""
    return packet.sigma0 * np.sqrt(1.0 + (packet.hbar * np.asarray(t) / (2.0 * packet.mass * packet.sigma0**2)) ** 2)


def packet_value(packet: GaussianPacket, z, t):
    """Single Gaussian psi(z, t) evaluated directly (no log scaling)."""
    st = sigma_tilde(packet, t)
    u = np.asarray(z) - packet.center(t)
    p = packet.momentum
    # principal square root of sigma_tilde: arg stays in (-pi/2, pi/2)
    amp = (2.0 * np.pi) ** -0.25 / np.sqrt(st)
    expo = -u * u / (4.0 * st * packet.sigma0) + 1j * p * u / packet.hbar + 1j * packet.energy * t / packet.hbar
    return amp * np.exp(expo)


def _sums(sup: Superposition, z, t):
    k = _backend.kernels
    if np.ndim(z) == 0 and np.ndim(t) == 0:
        return k.log_sums(sup.array, sup.mass, sup.hbar, complex(z), float(t))
    zb, tb = np.broadcast_arrays(np.asarray(z, dtype=np.complex128), np.asarray(t, dtype=np.float64))
    m, s0, s1, s2 = k.log_sums_grid(sup.array, sup.mass, sup.hbar, zb.ravel(), tb.ravel())
    shape = zb.shape
    return m.reshape(shape), s0.reshape(shape), s1.reshape(shape), s2.reshape(shape)


def superposition_value(sup: Superposition, z, t):
    m, s0, _, _ = _sums(sup, z, t)
    return np.exp(m) * s0


def superposition_dz(sup: Superposition, z, t):
    """Analytic dPsi/dz."""
    m, _, s1, _ = _sums(sup, z, t)
    return np.exp(m) * s1


def superposition_d2z(sup: Superposition, z, t):
    """Analytic d2Psi/dz2."""
    m, _, _, s2 = _sums(sup, z, t)
    return np.exp(m) * s2


def psi_scale(sup: Superposition, t) -> float:
    """Sum of packet amplitudes |A_t|; bounds max |Psi| on the real axis at time t."""
    return math.exp(_backend.kernels.log_scale(sup.array, sup.mass, sup.hbar, float(t)))


def node_epsilon(sup: Superposition, t) -> float:
    return NODE_EPS_REL * psi_scale(sup, t)


def _log_eps(sup: Superposition, t):
    if np.ndim(t) == 0:
        return math.log(node_epsilon(sup, t))
    return np.vectorize(lambda tt: math.log(node_epsilon(sup, tt)))(np.asarray(t, dtype=float))


def _near_node(m, s0, log_eps):
    """Mask of points that sit on a node.

    |psi| must be below node_epsilon and the packet terms must cancel: s0 is
    psi divided by its largest term, so a small |psi| with |s0| ~ 1 is just a
    Gaussian tail, not a pole of the QMF.
    """
    a = np.abs(s0)
    with np.errstate(divide="ignore"):
        log_abs = m + np.log(a)
    return ~(log_abs > log_eps) & ~(a > NODE_EPS_REL), log_abs


def _ratios(sup: Superposition, z, t):
    """(psi'/psi, psi''/psi), raising PoleProximity at nodes."""
    m, s0, s1, s2 = _sums(sup, z, t)
    log_eps = _log_eps(sup, t)
    bad, log_abs = _near_node(m, s0, log_eps)
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), np.shape(bad)) if np.ndim(bad) else ()
        zb = np.broadcast_to(z, np.shape(bad))[idx]
        tb = np.broadcast_to(t, np.shape(bad))[idx]
        raise PoleProximity(zb, tb, math.exp(np.broadcast_to(log_abs, np.shape(bad))[idx]),
                            math.exp(np.broadcast_to(log_eps, np.shape(bad))[idx]))
    return s1 / s0, s2 / s0


def qmf(sup: Superposition, z, t):
    """Quantum momentum function p = (hbar/i) psi'/psi."""
    r1, _ = _ratios(sup, z, t)
    return -1j * sup.hbar * r1


def qmf_dz(sup: Superposition, z, t):
    """Return ``(dp, gamma, omega)``: dp/dz with divergence 2 Re dp and vorticity 2 Im dp."""
    r1, r2 = _ratios(sup, z, t)
    dp = -1j * sup.hbar * (r2 - r1 * r1)
    return dp, 2.0 * np.real(dp), 2.0 * np.imag(dp)


def quantum_potential(sup: Superposition, z, t):
    """Complex quantum potential Q = (hbar / 2mi) dp/dz."""
    dp, _, _ = qmf_dz(sup, z, t)
    return sup.hbar / (2j * sup.mass) * dp


def pvf(sup: Superposition, z, t) -> np.ndarray:
    """Polya vector field (Re p, -Im p); leading axis holds the two components."""
    p = qmf(sup, z, t)
    return np.array([np.real(p), -np.imag(p)])


def complex_action(sup: Superposition, z, t):
    """``(s_real, s_imag)`` with psi = exp(-s_imag/hbar) exp(i s_real/hbar).

    ``s_real`` is the principal branch hbar*arg(psi) in (-pi hbar, pi hbar].
    """
    m, s0, _, _ = _sums(sup, z, t)
    if np.ndim(s0) == 0:
        eps = node_epsilon(sup, t)
        if s0 == 0 or _near_node(m, s0, math.log(eps))[0]:
            raise PoleProximity(z, t, abs(math.exp(m) * s0), eps)
    s_imag = -sup.hbar * (m + np.log(np.abs(s0)))
    s_real = sup.hbar * np.angle(s0)
    return s_real, s_imag


def field_sample(sup: Superposition, z: complex, t: float) -> FieldSample:
    """All local fields at (z, t) from a single kernel evaluation."""
    m, s0, s1, s2 = _sums(sup, z, t)
    scale = math.exp(m)
    psi = scale * s0
    eps = node_epsilon(sup, t)
    if s0 == 0 or _near_node(m, s0, math.log(eps))[0]:
        raise PoleProximity(z, t, abs(psi), eps)
    hbar, mass = sup.hbar, sup.mass
    r1 = s1 / s0
    p = -1j * hbar * r1
    dp = -1j * hbar * (s2 / s0 - r1 * r1)
    gamma, omega = 2.0 * dp.real, 2.0 * dp.imag
    return FieldSample(
        z=complex(z),
        t=float(t),
        psi=complex(psi),
        dpsi=complex(scale * s1),
        p=complex(p),
        dp=complex(dp),
        gamma_div=float(gamma),
        omega_vort=float(omega),
        q=complex(hbar / (2j * mass) * dp),
        pvf=(float(p.real), float(-p.imag)),
        s_real=float(hbar * np.angle(s0)),
        s_imag=float(-hbar * (m + math.log(abs(s0)))),
    )


def probability_density(sup: Superposition, x, t):
    """|Psi(x, t)|^2 on the real axis."""
    return np.abs(superposition_value(sup, np.asarray(x, dtype=float) + 0j, t)) ** 2
