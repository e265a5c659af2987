"""Momentum map, cyclic-velocity elimination, and reduced dynamics.

Everything here works on a mechanical system with an abelian symmetry
group presented in a single adapted chart: shape coordinates ``q``,
line-type cyclic coordinates ``x``, and angle-type cyclic coordinates
``psi``.  The kinetic matrix and the potential depend on ``q`` only; the
group acts by translations in the cyclic coordinates.  All operations are
pure functions of their inputs and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    ChartBoundary,
    NotPositiveDefinite,
    SingularReducedMass,
)

# Evaluations closer than this to the chart boundary are refused.
BOUNDARY_TOL = 1e-6
# Relative tolerance on the symmetry defect of the kinetic matrix.
SYMMETRY_TOL = 1e-12

TWO_PI = 2.0 * np.pi


def _finite_vector(value, size: int, name: str) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float))
    if vec.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} must be finite, got {vec}")
    return vec


@dataclass(frozen=True)
class SymmetricSystem:
    """Mechanical system with abelian symmetry in one adapted chart.

    Attributes:
        n: Number of shape coordinates q.
        k: Number of line-type cyclic coordinates x.
        l: Number of angle-type cyclic coordinates psi.
        mass_matrix: Callable q -> symmetric positive definite
            (n+k+l) x (n+k+l) kinetic matrix (energy per squared velocity).
        potential: Callable q -> potential energy.
        pole_guard: Optional callable q -> distance to the chart boundary.
            Evaluations with guard value below ``BOUNDARY_TOL`` raise
            ChartBoundary.
        name: Short identifier used in trajectory metadata.
    """

    n: int
    k: int
    l: int
    mass_matrix: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float]
    pole_guard: Optional[Callable[[np.ndarray], float]] = None
    name: str = "system"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one shape coordinate")
        if self.k < 0 or self.l < 0:
            raise ValueError("cyclic coordinate counts must be non-negative")

    @property
    def dim(self) -> int:
        """Total configuration dimension n + k + l."""
        return self.n + self.k + self.l

    @property
    def n_cyclic(self) -> int:
        return self.k + self.l


@dataclass(frozen=True)
class MomentumValue:
    """Fixed value of the momentum integral: a covector (xi, eta)."""

    xi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi", _finite_vector(self.xi, np.size(self.xi), "xi"))
        object.__setattr__(self, "eta", _finite_vector(self.eta, np.size(self.eta), "eta"))

    @classmethod
    def zero(cls, k: int, l: int) -> "MomentumValue":
        return cls(xi=np.zeros(k), eta=np.zeros(l))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.eta])

    def matches(self, other: "MomentumValue") -> bool:
        """Exact (bitwise) equality; reconstruction requires it."""
        return np.array_equal(self.xi, other.xi) and np.array_equal(self.eta, other.eta)


@dataclass(frozen=True)
class ReducedState:
    """Point of the reduced phase space: shape position and velocity."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _finite_vector(self.q, np.size(self.q), "q"))
        object.__setattr__(self, "qdot", _finite_vector(self.qdot, np.size(self.q), "qdot"))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot])

    @classmethod
    def from_vector(cls, sys: SymmetricSystem, vec) -> "ReducedState":
        vec = np.asarray(vec, dtype=float)
        n = sys.n
        return cls(q=vec[:n], qdot=vec[n:2 * n])


@dataclass(frozen=True)
class FullState:
    """Point of the full phase space; psi is normalized into [0, 2*pi)."""

    q: np.ndarray
    x: np.ndarray
    psi: np.ndarray
    qdot: np.ndarray
    xdot: np.ndarray
    psidot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _finite_vector(self.q, np.size(self.q), "q"))
        object.__setattr__(self, "x", _finite_vector(self.x, np.size(self.x), "x"))
        psi = _finite_vector(self.psi, np.size(self.psi), "psi")
        object.__setattr__(self, "psi", np.mod(psi, TWO_PI))
        object.__setattr__(self, "qdot", _finite_vector(self.qdot, np.size(self.q), "qdot"))
        object.__setattr__(self, "xdot", _finite_vector(self.xdot, np.size(self.x), "xdot"))
        object.__setattr__(self, "psidot", _finite_vector(self.psidot, np.size(self.psi), "psidot"))

    def velocity(self) -> np.ndarray:
        return np.concatenate([self.qdot, self.xdot, self.psidot])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.x, self.psi, self.qdot, self.xdot, self.psidot])

    @classmethod
    def from_vector(cls, sys: SymmetricSystem, vec) -> "FullState":
        vec = np.asarray(vec, dtype=float)
        n, k, l = sys.n, sys.k, sys.l
        d = sys.dim
        return cls(
            q=vec[:n], x=vec[n:n + k], psi=vec[n + k:d],
            qdot=vec[d:d + n], xdot=vec[d + n:d + n + k], psidot=vec[d + n + k:2 * d],
        )


@dataclass(frozen=True)
class CyclicVelocities:
    """Cyclic velocities solving the momentum constraint at fixed (q, qdot)."""

    xdot: np.ndarray
    psidot: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xdot, self.psidot])


def guard_chart(sys: SymmetricSystem, q: np.ndarray) -> None:
    """Raise ChartBoundary when q is within the guard distance of the boundary."""
    if sys.pole_guard is not None:
        dist = float(sys.pole_guard(np.asarray(q, dtype=float)))
        if dist < BOUNDARY_TOL:
            raise ChartBoundary(
                f"state within {dist:.3e} of the chart boundary (guard {BOUNDARY_TOL:.1e})"
            )


def _metric_raw(sys: SymmetricSystem, q: np.ndarray) -> np.ndarray:
    """Guarded metric evaluation without definiteness checks.

    Used for finite-difference probe points a step away from a state whose
    matrix was already validated.
    """
    guard_chart(sys, q)
    K = np.asarray(sys.mass_matrix(q), dtype=float)
    if K.shape != (sys.dim, sys.dim):
        raise NotPositiveDefinite(
            f"kinetic matrix must be ({sys.dim},{sys.dim}), got {K.shape}"
        )
    return K


def evaluate_metric(sys: SymmetricSystem, q) -> np.ndarray:
    """Evaluate and validate the kinetic matrix at q.

    Raises:
        ChartBoundary: q is within the pole-guard distance of the boundary.
        NotPositiveDefinite: the matrix is asymmetric beyond tolerance or a
            Cholesky factorization fails.
    """
    q = np.asarray(q, dtype=float)
    K = _metric_raw(sys, q)
    scale = max(1.0, float(np.max(np.abs(K))))
    defect = float(np.max(np.abs(K - K.T)))
    if defect > SYMMETRY_TOL * scale:
        raise NotPositiveDefinite(
            f"kinetic matrix asymmetric: |K - K^T| = {defect:.3e} exceeds "
            f"{SYMMETRY_TOL:.1e} relative"
        )
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("kinetic matrix is not positive definite") from exc
    return K


def mass_matrix_blocks(sys: SymmetricSystem, q):
    """Partition the kinetic matrix into shape/coupling/cyclic blocks.

    Returns:
        (Kqq, Kqc, D): the n x n shape block, the n x (k+l) coupling block,
        and the (k+l) x (k+l) cyclic block D (symmetric positive definite).
    """
    K = evaluate_metric(sys, q)
    n = sys.n
    return K[:n, :n].copy(), K[:n, n:].copy(), K[n:, n:].copy()


def momentum_map(sys: SymmetricSystem, s: FullState) -> MomentumValue:
    """Momentum integral of a full state: cyclic rows of K times the velocity."""
    K = evaluate_metric(sys, s.q)
    p = K[sys.n:, :] @ s.velocity()
    return MomentumValue(xi=p[:sys.k], eta=p[sys.k:])


def solve_cyclic(sys: SymmetricSystem, q, qdot, f: MomentumValue) -> CyclicVelocities:
    """Cyclic velocities at fixed momentum: solve D w = (xi, eta) - Kcq qdot.

    Unique because D inherits positive definiteness from the full matrix.
    """
    q = _finite_vector(q, sys.n, "q")
    qdot = _finite_vector(qdot, sys.n, "qdot")
    if f.xi.size != sys.k or f.eta.size != sys.l:
        raise ValueError(
            f"momentum dimensions ({f.xi.size},{f.eta.size}) do not match "
            f"system ({sys.k},{sys.l})"
        )
    K = evaluate_metric(sys, q)
    n = sys.n
    rhs = f.as_vector() - K[n:, :n] @ qdot
    if rhs.size == 0:
        return CyclicVelocities(xdot=np.zeros(0), psidot=np.zeros(0))
    w = np.linalg.solve(K[n:, n:], rhs)
    return CyclicVelocities(xdot=w[:sys.k], psidot=w[sys.k:])


def complete_state(sys: SymmetricSystem, f: MomentumValue, r: ReducedState,
                   x=None, psi=None) -> FullState:
    """Lift a reduced state to the momentum level set, fixing cyclic positions."""
    w = solve_cyclic(sys, r.q, r.qdot, f)
    x = np.zeros(sys.k) if x is None else _finite_vector(x, sys.k, "x")
    psi = np.zeros(sys.l) if psi is None else _finite_vector(psi, sys.l, "psi")
    return FullState(q=r.q, x=x, psi=psi, qdot=r.qdot, xdot=w.xdot, psidot=w.psidot)


def lagrangian_full(sys: SymmetricSystem, s: FullState) -> float:
    """Full Lagrangian: kinetic energy minus potential."""
    K = evaluate_metric(sys, s.q)
    v = s.velocity()
    return 0.5 * float(v @ K @ v) - float(sys.potential(s.q))


def energy_full(sys: SymmetricSystem, s: FullState) -> float:
    """Full energy: kinetic energy plus potential."""
    K = evaluate_metric(sys, s.q)
    v = s.velocity()
    return 0.5 * float(v @ K @ v) + float(sys.potential(s.q))


def routhian(sys: SymmetricSystem, f: MomentumValue, r: ReducedState) -> float:
    """Routhian at fixed momentum.

    Completes the state with the cyclic velocities solving the momentum
    constraint, evaluates the full Lagrangian there, and subtracts the
    pairing of the momentum with the cyclic velocities.  At zero momentum
    this is exactly the full Lagrangian of the completed state.
    """
    w = solve_cyclic(sys, r.q, r.qdot, f)
    K = evaluate_metric(sys, r.q)
    v = np.concatenate([r.qdot, w.as_vector()])
    lbar = 0.5 * float(v @ K @ v) - float(sys.potential(r.q))
    return lbar - float(f.as_vector() @ w.as_vector())


def reduced_energy(sys: SymmetricSystem, f: MomentumValue, r: ReducedState) -> float:
    """Energy of the completed state; constant along reduced trajectories."""
    w = solve_cyclic(sys, r.q, r.qdot, f)
    K = evaluate_metric(sys, r.q)
    v = np.concatenate([r.qdot, w.as_vector()])
    return 0.5 * float(v @ K @ v) + float(sys.potential(r.q))


def reduced_mass_matrix(sys: SymmetricSystem, q) -> np.ndarray:
    """Schur complement of the cyclic block: Kqq - Kqc D^-1 Kqc^T.

    Equals the velocity Hessian of the Routhian; the velocity-quadratic
    part of the Routhian does not depend on the momentum value.
    """
    Kqq, Kqc, D = mass_matrix_blocks(sys, q)
    if sys.n_cyclic == 0:
        return Kqq
    return Kqq - Kqc @ np.linalg.solve(D, Kqc.T)


def _effective_terms(sys: SymmetricSystem, c: np.ndarray, q: np.ndarray,
                     validate: bool = True):
    """Closed-form pieces of the Routhian at fixed momentum covector c.

    The Routhian is exactly quadratic in the shape velocity:
    0.5 qdot^T M qdot + g . qdot - V_eff, with
    M the Schur complement, g = Kqc D^-1 c, and
    V_eff = V0 + 0.5 c . D^-1 c.
    """
    K = evaluate_metric(sys, q) if validate else _metric_raw(sys, q)
    n = sys.n
    Kqq = K[:n, :n]
    Kqc = K[:n, n:]
    D = K[n:, n:]
    if sys.n_cyclic == 0:
        return Kqq.copy(), np.zeros(n), float(sys.potential(q))
    stacked = np.empty((sys.n_cyclic, n + 1))
    stacked[:, :n] = Kqc.T
    stacked[:, n] = c
    if sys.n_cyclic == 1:
        sol = stacked / D[0, 0]
    else:
        sol = np.linalg.solve(D, stacked)
    M = Kqq - Kqc @ sol[:, :n]
    g = Kqc @ sol[:, n]
    v_eff = float(sys.potential(q)) + 0.5 * float(c @ sol[:, n])
    return M, g, v_eff


def fd_step(value: float) -> float:
    """Central-difference step for first derivatives: max(1e-6, 1e-6 |value|)."""
    return max(1e-6, 1e-6 * abs(value))


def gradient(fn: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for j in range(x.size):
        h = fd_step(x[j])
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        out[j] = (fn(xp) - fn(xm)) / (2.0 * h)
    return out


def _reduced_accel(sys: SymmetricSystem, c: np.ndarray, q: np.ndarray,
                   qdot: np.ndarray) -> np.ndarray:
    """Shape acceleration from the Euler-Lagrange equations of the Routhian.

    M qddot = dL/dq - (d/dq dL/dqdot) qdot, with the q-derivatives of the
    exactly-assembled quadratic pieces taken by central differences.
    """
    n = sys.n
    M0, g0, _ = _effective_terms(sys, c, q)
    force = np.empty(n)
    mixed = np.empty((n, n))
    for b in range(n):
        h = fd_step(q[b])
        qp = q.copy()
        qm = q.copy()
        qp[b] += h
        qm[b] -= h
        Mp, gp, vp = _effective_terms(sys, c, qp, validate=False)
        Mm, gm, vm = _effective_terms(sys, c, qm, validate=False)
        dM = (Mp - Mm) / (2.0 * h)
        dg = (gp - gm) / (2.0 * h)
        dv = (vp - vm) / (2.0 * h)
        force[b] = 0.5 * float(qdot @ dM @ qdot) + float(dg @ qdot) - dv
        mixed[:, b] = dM @ qdot + dg
    try:
        return np.linalg.solve(M0, force - mixed @ qdot)
    except np.linalg.LinAlgError as exc:
        raise SingularReducedMass("reduced mass matrix solve failed") from exc


def reduced_rhs(sys: SymmetricSystem, f: MomentumValue, r: ReducedState):
    """Second-order vector field of the reduced system.

    Returns:
        (qdot, qddot): the first block repeats the input velocity exactly
        (the reduced field is a second-order equation); the second block is
        the shape acceleration.
    """
    qddot = _reduced_accel(sys, f.as_vector(), r.q, r.qdot)
    return r.qdot.copy(), qddot


def shape_momentum(sys: SymmetricSystem, f: MomentumValue, q, qdot) -> np.ndarray:
    """Shape rows of the full fiber derivative at the completed state.

    This is the covector whose exterior derivative against dq builds the
    reduced symplectic form; it is evaluated directly from the full kinetic
    matrix, independently of the Schur-complement path.
    """
    w = solve_cyclic(sys, q, qdot, f)
    K = evaluate_metric(sys, q)
    v = np.concatenate([qdot, w.as_vector()])
    return (K @ v)[:sys.n]


def symplectic_det_pair(sys: SymmetricSystem, f: MomentumValue, r: ReducedState):
    """Two independent evaluations of the reduced symplectic determinant.

    The left side assembles the 2n x 2n coordinate matrix of the reduced
    symplectic form from central finite differences of the shape momentum
    covector (the constrained derivative rule applied numerically); the
    right side is (det K / det D)^2 from plain block determinants.

    Returns:
        (lhs, rhs): both scalars; they agree to 1e-5 relative on interior
        states.
    """
    n = sys.n
    q = r.q.copy()
    qdot = r.qdot.copy()
    c = f

    A = np.empty((n, n))   # dP_a / dq_b
    B = np.empty((n, n))   # dP_a / dqdot_b
    for b in range(n):
        hq = fd_step(q[b])
        qp = q.copy()
        qm = q.copy()
        qp[b] += hq
        qm[b] -= hq
        A[:, b] = (shape_momentum(sys, c, qp, qdot) - shape_momentum(sys, c, qm, qdot)) / (2.0 * hq)
        hv = fd_step(qdot[b])
        vp = qdot.copy()
        vm = qdot.copy()
        vp[b] += hv
        vm[b] -= hv
        B[:, b] = (shape_momentum(sys, c, q, vp) - shape_momentum(sys, c, q, vm)) / (2.0 * hv)

    omega = np.zeros((2 * n, 2 * n))
    omega[:n, :n] = A - A.T
    omega[:n, n:] = B
    omega[n:, :n] = -B.T
    lhs = float(np.linalg.det(omega))

    K = evaluate_metric(sys, q)
    if sys.n_cyclic == 0:
        rhs = float(np.linalg.det(K)) ** 2
    else:
        rhs = (float(np.linalg.det(K)) / float(np.linalg.det(K[n:, n:]))) ** 2
    return lhs, rhs
