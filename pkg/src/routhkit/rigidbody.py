"""Rigid body with a fixed point in an axially symmetric field.

The configuration chart uses Euler angles with proper rotation ``phi`` and
nutation ``theta`` as shape coordinates and the precession ``psi`` about
the field symmetry axis as the single angular cyclic coordinate.  The
kinetic matrix comes from the body-frame angular velocity substitution

    w1 = psidot sin(theta) sin(phi) + thetadot cos(phi)
    w2 = psidot sin(theta) cos(phi) - thetadot sin(phi)
    w3 = psidot cos(theta) + phidot

with kinetic energy (A w1^2 + B w2^2 + C w3^2) / 2.  The chart excludes
the poles theta in {0, pi}; trajectories entering the guard band abort
with ChartBoundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ChartBoundary, GridMismatch, InvalidParams, SpanTooShort
from .integrate import Trajectory, cumulative_quadrature
from .reduction import BOUNDARY_TOL, SymmetricSystem

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RigidBodyParams:
    """Principal moments of inertia and an axially symmetric potential.

    Attributes:
        A, B, C: principal moments of inertia, each positive and satisfying
            the triangle-type physicality bounds.
        potential: optional callable (phi, theta) -> energy; independence of
            the precession angle is structural.
    """

    A: float
    B: float
    C: float
    potential: Optional[Callable[[float, float], float]] = None

    def __post_init__(self):
        moments = (self.A, self.B, self.C)
        if any(not (m > 0 and math.isfinite(m)) for m in moments):
            raise InvalidParams(f"inertia moments must be positive, got {moments}")
        if self.A + self.B < self.C or self.B + self.C < self.A or self.A + self.C < self.B:
            raise InvalidParams(
                f"inertia moments {moments} violate the triangle inequality"
            )

    def potential_value(self, phi: float, theta: float) -> float:
        if self.potential is None:
            return 0.0
        return float(self.potential(phi, theta))


def heavy_potential(coefficient: float) -> Callable[[float, float], float]:
    """Heavy-body potential: coefficient times the cosine of the nutation."""

    def v0(phi: float, theta: float) -> float:
        return coefficient * math.cos(theta)

    return v0


def _metric_entries(p: RigidBodyParams, phi: float, theta: float):
    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    k_pp = p.C
    k_pt = 0.0
    k_ppsi = p.C * ct
    k_tt = p.A * cp * cp + p.B * sp * sp
    k_tpsi = (p.A - p.B) * st * sp * cp
    k_psipsi = (p.A * sp * sp + p.B * cp * cp) * st * st + p.C * ct * ct
    return k_pp, k_pt, k_ppsi, k_tt, k_tpsi, k_psipsi


def rb_system(p: RigidBodyParams) -> SymmetricSystem:
    """Adapted-chart system for the rigid body: n=2 shape (phi, theta), l=1.

    The pole guard is min(theta, pi - theta).
    """

    def mass_matrix(q: np.ndarray) -> np.ndarray:
        k_pp, k_pt, k_ppsi, k_tt, k_tpsi, k_psipsi = _metric_entries(p, q[0], q[1])
        return np.array([
            [k_pp, k_pt, k_ppsi],
            [k_pt, k_tt, k_tpsi],
            [k_ppsi, k_tpsi, k_psipsi],
        ])

    def potential(q: np.ndarray) -> float:
        return p.potential_value(q[0], q[1])

    def pole_guard(q: np.ndarray) -> float:
        return min(q[1], math.pi - q[1])

    return SymmetricSystem(n=2, k=0, l=1, mass_matrix=mass_matrix,
                           potential=potential, pole_guard=pole_guard,
                           name="rigid-body")


def _guard_theta(theta: float) -> None:
    if min(theta, math.pi - theta) < BOUNDARY_TOL:
        raise ChartBoundary(f"theta={theta:.6g} within the pole guard band")


def kolosov_reduced_lagrangian(p: RigidBodyParams, phi: float, theta: float,
                               phidot: float, thetadot: float) -> float:
    """Closed form of the zero-momentum reduced Lagrangian in the chart.

    The quadratic form is the Schur complement of the precession block,
    written out explicitly; it agrees with the Routhian of ``rb_system``
    at zero momentum on the chart interior.
    """
    _guard_theta(theta)
    A, B, C = p.A, p.B, p.C
    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    denom = (A * sp * sp + B * cp * cp) * st * st + C * ct * ct
    q_num = (A * cp * cp + B * sp * sp) * C * ct * ct + A * B * st * st
    r_num = (A * sp * sp + B * cp * cp) * C * st * st
    cross = 2.0 * (A - B) * C * phidot * thetadot * sp * cp * st * ct
    kinetic = 0.5 * (q_num * thetadot ** 2 + r_num * phidot ** 2 - cross) / denom
    return kinetic - p.potential_value(phi, theta)


def psi_dot_zero_momentum(p: RigidBodyParams, phi: float, theta: float,
                          phidot: float, thetadot: float) -> float:
    """Precession rate along zero-momentum motions."""
    _guard_theta(theta)
    A, B, C = p.A, p.B, p.C
    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    denom = (A * sp * sp + B * cp * cp) * st * st + C * ct * ct
    return -((A - B) * thetadot * sp * cp * st + C * phidot * ct) / denom


def lambda_average(times, psidot_samples, T: float) -> float:
    """Average precession rate over exactly one period [0, T].

    Uses the same quadrature as reconstruction, so the lifted precession
    angle satisfies psi(T) - psi(0) = lambda * T up to quadrature error.

    Raises:
        GridMismatch: samples do not cover exactly [0, T].
    """
    t = np.asarray(times, dtype=float)
    vals = np.asarray(psidot_samples, dtype=float)
    if t.size != vals.size:
        raise GridMismatch("times and samples must align")
    if abs(t[0]) > 1e-9 * max(1.0, abs(T)) or abs(t[-1] - T) > 1e-9 * max(1.0, abs(T)):
        raise GridMismatch(
            f"samples span [{t[0]:.6g}, {t[-1]:.6g}], expected [0, {T:.6g}]"
        )
    return float(cumulative_quadrature(t, vals)[-1]) / T


def _angle_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance between angles modulo 2*pi."""
    d = np.mod(a - b + math.pi, TWO_PI) - math.pi
    return np.abs(d)


def rotating_frame_residual(full: Trajectory, lam: float, T: float) -> float:
    """Periodicity defect in the frame rotating at rate lam about the axis.

    Compares (phi, theta, psi - lam*t) at t and t + T for every grid point
    t in the first period; angle components are compared modulo 2*pi.  A
    uniform grid whose step divides T is compared sample-to-sample;
    otherwise the shifted states are linearly interpolated.

    Raises:
        SpanTooShort: the trajectory does not cover two periods.
    """
    t = full.times
    if t[-1] - t[0] < 2.0 * T - 1e-9:
        raise SpanTooShort(
            f"trajectory spans {t[-1] - t[0]:.6g}, need at least {2 * T:.6g}"
        )
    pos = full.states[:, :3]
    chi = pos.copy()
    chi[:, 2] = pos[:, 2] - lam * (t - t[0])

    first = t <= t[0] + T + 1e-12
    t_first = t[first]
    chi_first = chi[first]

    steps = np.diff(t)
    h = steps[0]
    uniform = np.max(np.abs(steps - h)) <= 1e-9 * h
    m_shift = int(round(T / h)) if uniform else 0
    if uniform and abs(m_shift * h - T) <= 1e-9 * max(1.0, T):
        idx = np.nonzero(first)[0]
        keep = idx + m_shift <= t.size - 1
        chi_a = chi[idx[keep]]
        chi_b = chi[idx[keep] + m_shift]
    else:
        chi_a = chi_first
        chi_b = np.column_stack([
            np.interp(t_first + T, t, chi[:, j]) for j in range(3)
        ])

    gap_phi = _angle_gap(chi_a[:, 0], chi_b[:, 0])
    gap_theta = np.abs(chi_a[:, 1] - chi_b[:, 1])
    gap_psi = _angle_gap(chi_a[:, 2], chi_b[:, 2])
    return float(np.max(np.concatenate([gap_phi, gap_theta, gap_psi])))
