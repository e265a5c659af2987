"""Invariant suites: reduction self-checks and the ellipsoid equivalence.

Every check returns a CheckResult with the measured residual and its
tolerance, so the CLI can print one pass/fail line per check and emit a
machine-readable report.  The same functions back the acceptance tests.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np

from .ellipsoid import (
    ConformalData,
    EllipsoidState,
    _flow_project,
    _flow_rhs,
    conformal_factor,
    dsigma_length,
    kolosov_map,
    kolosov_velocity,
    maupertuis_speed,
    principal_section_orbits,
)
from .errors import NotPositiveDefinite
from .integrate import (
    IntegratorConfig,
    Trajectory,
    TrajectoryMeta,
    integrate_full,
    integrate_grid,
    integrate_reduced,
    propagate,
    reconstruct,
    reduced_vector_field,
    reparametrize_time,
    shoot_periodic,
)
from .reduction import (
    FullState,
    MomentumValue,
    ReducedState,
    SymmetricSystem,
    complete_state,
    evaluate_metric,
    lagrangian_full,
    momentum_map,
    reduced_energy,
    routhian,
    symplectic_det_pair,
)
from .rigidbody import (
    RigidBodyParams,
    kolosov_reduced_lagrangian,
    lambda_average,
    rb_system,
    rotating_frame_residual,
)
from .systems import constant_matrix_system

REPORT_SCHEMA_VERSION = 1


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def _result(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    return CheckResult(name=name, passed=bool(value <= tolerance),
                       value=float(value), tolerance=float(tolerance), detail=detail)


def random_system(rng: np.random.Generator, n: int = None, k: int = None,
                  l: int = None, constant: bool = True) -> SymmetricSystem:
    """Random symmetric system with a (possibly q-dependent) SPD matrix."""
    n = int(rng.integers(1, 4)) if n is None else n
    k = int(rng.integers(0, 4)) if k is None else k
    l = int(rng.integers(0, 4)) if l is None else l
    if k + l == 0:
        l = 1
    d = n + k + l
    base = rng.normal(size=(d, d))
    K0 = base @ base.T + d * np.eye(d)
    if constant:
        return constant_matrix_system(n, k, l, K0, name="synthetic")
    amp = 0.1 * float(np.min(np.linalg.eigvalsh(K0)))
    seed_mat = rng.normal(size=(d, d))
    S = 0.5 * (seed_mat + seed_mat.T)
    freq = rng.uniform(0.5, 1.5, size=n)

    def mass(q: np.ndarray) -> np.ndarray:
        return K0 + amp * float(np.sin(freq @ q)) * S

    coeffs = rng.normal(size=n)

    def v0(q: np.ndarray) -> float:
        return float(coeffs @ np.cos(q))

    return SymmetricSystem(n=n, k=k, l=l, mass_matrix=mass, potential=v0,
                           name="synthetic-varying")


def random_momentum(rng: np.random.Generator, sys: SymmetricSystem) -> MomentumValue:
    return MomentumValue(xi=rng.normal(size=sys.k), eta=rng.normal(size=sys.l))


def momentum_round_trip_check(count: int = 100, seed: int = 1234,
                              tolerance: float = 1e-12) -> CheckResult:
    """Momentum of the momentum-completed state reproduces the target covector."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        sys = random_system(rng, constant=bool(rng.integers(0, 2)))
        f = random_momentum(rng, sys)
        r = ReducedState(q=rng.normal(size=sys.n), qdot=rng.normal(size=sys.n))
        s = complete_state(sys, f, r)
        back = momentum_map(sys, s).as_vector()
        ref = max(1.0, float(np.max(np.abs(f.as_vector()))))
        worst = max(worst, float(np.max(np.abs(back - f.as_vector()))) / ref)
    return _result("momentum-round-trip", worst, tolerance,
                   f"{count} random systems")


def determinant_identity_check(params: RigidBodyParams, count: int = 50,
                               seed: int = 99, tolerance: float = 1e-5) -> CheckResult:
    """Symplectic determinant vs (det K / det D)^2 on rigid-body and synthetic states."""
    rng = np.random.default_rng(seed)
    sys_rb = rb_system(params)
    worst = 0.0
    for i in range(count):
        if i % 2 == 0:
            sys = sys_rb
            q = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(0.4, np.pi - 0.4)])
            f = MomentumValue.zero(0, 1)
        else:
            sys = random_system(rng, constant=bool(rng.integers(0, 2)))
            q = rng.normal(size=sys.n)
            f = random_momentum(rng, sys)
        r = ReducedState(q=q, qdot=rng.normal(size=sys.n))
        lhs, rhs = symplectic_det_pair(sys, f, r)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return _result("symplectic-determinant-identity", worst, tolerance,
                   f"{count} states, rigid body and synthetic")


def zero_momentum_degeneration_check(params: RigidBodyParams, count: int = 100,
                                     seed: int = 7, tolerance: float = 1e-12) -> CheckResult:
    """At zero momentum the Routhian equals the completed-state Lagrangian."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(count):
        if i % 2 == 0:
            sys = rb_system(params)
            q = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(0.4, np.pi - 0.4)])
        else:
            sys = random_system(rng, constant=bool(rng.integers(0, 2)))
            q = rng.normal(size=sys.n)
        f0 = MomentumValue.zero(sys.k, sys.l)
        r = ReducedState(q=q, qdot=rng.normal(size=sys.n))
        a = routhian(sys, f0, r)
        b = lagrangian_full(sys, complete_state(sys, f0, r))
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    return _result("zero-momentum-degeneration", worst, tolerance,
                   f"{count} random states")


def closed_form_lagrangian_check(params: RigidBodyParams, count: int = 100,
                                 seed: int = 21, tolerance: float = 1e-10) -> CheckResult:
    """Rigid-body Routhian at zero momentum matches the explicit chart formula."""
    rng = np.random.default_rng(seed)
    sys = rb_system(params)
    f0 = MomentumValue.zero(0, 1)
    worst = 0.0
    for _ in range(count):
        phi = rng.uniform(-np.pi, np.pi)
        theta = rng.uniform(0.3, np.pi - 0.3)
        phidot, thetadot = rng.normal(size=2)
        a = kolosov_reduced_lagrangian(params, phi, theta, phidot, thetadot)
        b = routhian(sys, f0, ReducedState(q=[phi, theta], qdot=[phidot, thetadot]))
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    return _result("closed-form-reduced-lagrangian", worst, tolerance,
                   f"{count} random chart states")


def asymmetric_rejection_check() -> CheckResult:
    """An injected asymmetric kinetic matrix must be rejected."""
    bad = constant_matrix_system(1, 1, 0, [[2.0, 0.3], [0.1, 1.0]])
    try:
        evaluate_metric(bad, np.zeros(1))
    except NotPositiveDefinite:
        return CheckResult(name="asymmetric-metric-rejected", passed=True,
                           value=0.0, tolerance=0.0, detail="NotPositiveDefinite raised")
    return CheckResult(name="asymmetric-metric-rejected", passed=False,
                       value=1.0, tolerance=0.0, detail="no error raised")


def projection_equivalence_check(params: RigidBodyParams, r0: ReducedState,
                                 t_end: float = 10.0, dt: float = 1e-3,
                                 psi0: float = 0.5,
                                 tolerance: float = 1e-6) -> List[CheckResult]:
    """Projected full trajectory vs reduced trajectory, and reconstruction.

    Returns three results: the projection gap, the reconstructed cyclic
    angle gap, and the momentum residual along the reconstruction.
    """
    sys = rb_system(params)
    f0 = MomentumValue.zero(0, 1)
    cfg = IntegratorConfig(method="rk4", dt=dt)
    red = integrate_reduced(sys, f0, r0, 0.0, t_end, cfg)
    s0 = complete_state(sys, f0, r0, psi=[psi0])
    full = integrate_full(sys, s0, 0.0, t_end, cfg)

    proj = full.states[:, [0, 1, 3, 4]]
    gap = float(np.max(np.abs(proj - red.states)))

    rec = reconstruct(sys, f0, red, x0=None, psi0=[psi0])
    psi_gap = float(np.max(np.abs(rec.states[:, 2] - full.states[:, 2])))

    worst_mom = 0.0
    for row in rec.states[:: max(1, rec.states.shape[0] // 200)]:
        st = FullState(q=row[:2], x=[], psi=[row[2]], qdot=row[3:5], xdot=[],
                       psidot=[row[5]])
        worst_mom = max(worst_mom, float(np.max(np.abs(momentum_map(sys, st).as_vector()))))

    return [
        _result("projection-equivalence", gap, tolerance, f"t_end={t_end}, dt={dt}"),
        _result("reconstruction-angle-match", psi_gap, tolerance, "cyclic angle vs full run"),
        _result("reconstruction-momentum-residual", worst_mom, 1e-10,
                "momentum along reconstructed samples"),
    ]


def conservation_check(params: RigidBodyParams, r0: ReducedState,
                       t_end_reduced: float = 100.0, t_end_full: float = 50.0,
                       dt: float = 1e-3, psi0: float = 0.5) -> List[CheckResult]:
    """Energy drift of the reduced flow and momentum drift of the full flow."""
    sys = rb_system(params)
    f0 = MomentumValue.zero(0, 1)
    cfg = IntegratorConfig(method="rk4", dt=dt, max_steps=10_000_000)

    red = integrate_reduced(sys, f0, r0, 0.0, t_end_reduced, cfg)
    e0 = red.meta.energy0
    stride = max(1, red.states.shape[0] // 500)
    drift_e = 0.0
    for row in red.states[::stride]:
        e = reduced_energy(sys, f0, ReducedState(q=row[:2], qdot=row[2:]))
        drift_e = max(drift_e, abs(e - e0) / max(1.0, abs(e0)))

    s0 = complete_state(sys, f0, r0, psi=[psi0])
    full = integrate_full(sys, s0, 0.0, t_end_full, cfg)
    drift_j = 0.0
    for row in full.states[::stride]:
        st = FullState(q=row[:2], x=[], psi=[row[2]], qdot=row[3:5], xdot=[],
                       psidot=[row[5]])
        drift_j = max(drift_j, float(np.max(np.abs(momentum_map(sys, st).as_vector()))))

    return [
        _result("reduced-energy-drift", drift_e, 1e-6, f"t={t_end_reduced}, dt={dt}"),
        _result("full-momentum-drift", drift_j, 1e-7, f"t={t_end_full}, dt={dt}"),
    ]


def run_verify(params: RigidBodyParams, r0: ReducedState, t_end: float = 10.0,
               dt: float = 1e-3) -> List[CheckResult]:
    """Default verification suite for the CLI."""
    results = [
        momentum_round_trip_check(),
        determinant_identity_check(params),
        zero_momentum_degeneration_check(params),
        closed_form_lagrangian_check(params),
        asymmetric_rejection_check(),
    ]
    results.extend(projection_equivalence_check(params, r0, t_end=t_end, dt=dt))
    return results


def report_dict(results: List[CheckResult], system: str = "rigid-body") -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "system": system,
        "all_passed": all(r.passed for r in results),
        "checks": [asdict(r) for r in results],
    }


# ---------------------------------------------------------------------------
# Ellipsoid equivalence pipeline


def map_reduced_trajectory(params: RigidBodyParams, red: Trajectory) -> Trajectory:
    """Image of a reduced trajectory on the ellipsoid, original time."""
    m = red.times.size
    img = np.empty((m, 6))
    for i, row in enumerate(red.states):
        img[i, :3] = kolosov_map(params, row[0], row[1])
        img[i, 3:] = kolosov_velocity(params, row[0], row[1], row[2], row[3])
    return Trajectory(times=red.times.copy(), states=img,
                      meta=TrajectoryMeta(system="ellipsoid", chart="embedded",
                                          energy0=red.meta.energy0))


@dataclass
class KolosovReport:
    """Results of the free-body ellipsoid equivalence run."""

    h: float
    window: float
    zero_energy_relation: CheckResult
    flow_match: CheckResult
    speed_constancy: CheckResult
    sections: Dict[str, dict]
    periods_distinct: Optional[CheckResult]
    lambda_avg: float
    equatorial_period: float
    endpoint_defect: CheckResult
    rotating_frame: CheckResult
    image_tau: Trajectory

    def results(self) -> List[CheckResult]:
        out = [self.zero_energy_relation, self.flow_match, self.speed_constancy]
        if self.periods_distinct is not None:
            out.append(self.periods_distinct)
        out.extend([self.endpoint_defect, self.rotating_frame])
        return out


def run_kolosov(params: RigidBodyParams, r0: ReducedState, dt: float = 1e-3,
                energy_target: Optional[float] = None) -> KolosovReport:
    """Free-body pipeline: map, rescale time, compare flows, find geodesics.

    The energy constant is taken from the initial state unless
    ``energy_target`` rescales the initial velocity first.  The comparison
    window is one period of the equatorial section orbit in rescaled time.
    """
    sys = rb_system(params)
    f0 = MomentumValue.zero(0, 1)
    if energy_target is not None:
        e_now = reduced_energy(sys, f0, r0)
        r0 = ReducedState(q=r0.q, qdot=r0.qdot * np.sqrt(energy_target / e_now))
    h = reduced_energy(sys, f0, r0)
    cd = ConformalData(h=h)
    cfg = IntegratorConfig(method="rk4", dt=dt, max_steps=10_000_000)

    # geodesic candidates first: their periods set the comparison window
    orbits = principal_section_orbits(params, cd)
    sections = {
        plane: {
            "period": orbit.period,
            "closure_error": orbit.closure_error,
            "dsigma_length": dsigma_length(params, cd, orbit),
        }
        for plane, orbit in orbits.items()
    }
    periods = [sections[p]["period"] for p in ("x", "y", "z")]
    gaps = [abs(periods[0] - periods[1]), abs(periods[1] - periods[2]),
            abs(periods[0] - periods[2])]
    distinct: Optional[CheckResult] = None
    moments = (params.A, params.B, params.C)
    if len(set(moments)) == 3:
        distinct = CheckResult(name="section-periods-distinct",
                               passed=bool(min(gaps) > 1e-6),
                               value=float(min(gaps)), tolerance=1e-6,
                               detail="pairwise period separation (pass if above)")
    elif len(set(moments)) == 1:
        distinct = _result("section-periods-equal", max(gaps), 1e-8,
                           "sphere: all three periods agree")

    window_tau = sections["z"]["period"]
    # a(u) is at most max(A,B,C)-fold time compression on the surface
    t_end = 1.05 * window_tau * max(moments)
    red = integrate_reduced(sys, f0, r0, 0.0, t_end, cfg)
    image_t = map_reduced_trajectory(params, red)
    image_tau = reparametrize_time(image_t, lambda s: conformal_factor(params, s[:3]))

    stop = int(np.searchsorted(image_tau.times, window_tau)) + 1
    stop = min(stop, image_tau.times.size)
    tau_w = image_tau.times[:stop]
    img_w = image_tau.states[:stop]

    # (a) zero-energy relation with the rescaled-time velocity u' = a(u) udot
    worst_a = 0.0
    for row in img_w:
        a = conformal_factor(params, row[:3])
        uprime = a * row[3:]
        worst_a = max(worst_a, abs(0.5 * float(uprime @ uprime) - a * h) / (a * h))
    rel_a = _result("zero-energy-relation", worst_a, 1e-6, "T(u') = a(u) h pointwise")

    # (b) independently integrated rescaled-time flow from matched data
    rhs = _flow_rhs(params, cd)
    project = _flow_project(params)
    start = np.concatenate([img_w[0, :3],
                            conformal_factor(params, img_w[0, :3]) * img_w[0, 3:]])
    flow_states = integrate_grid(rhs, project(start), tau_w, dt, project=project)
    gap_b = float(np.max(np.abs(flow_states[:, :3] - img_w[:, :3])))
    match_b = _result("conformal-flow-match", gap_b, 1e-5,
                      f"sup position gap over one section period ({window_tau:.4g})")

    # (c) rescaled-metric speed constancy along the original-time image
    speeds = np.array([
        maupertuis_speed(params, h, EllipsoidState.from_vector(row))
        for row in image_t.states[:red.times.size]
    ])
    variation = float((speeds.max() - speeds.min()) / speeds.mean())
    const_c = _result("rescaled-speed-constancy", variation, 1e-5,
                      f"mean speed {speeds.mean():.6g}, expect h*sqrt(2) = {h * np.sqrt(2):.6g}")

    # relative-periodicity quantities on the chart-representable orbit
    lam, T_eq, endpoint, rotating = _equatorial_analysis(params, sys, f0, h, dt)

    return KolosovReport(h=h, window=window_tau, zero_energy_relation=rel_a,
                         flow_match=match_b, speed_constancy=const_c,
                         sections=sections, periods_distinct=distinct,
                         lambda_avg=lam, equatorial_period=T_eq,
                         endpoint_defect=endpoint, rotating_frame=rotating,
                         image_tau=image_tau)


def _equatorial_analysis(params: RigidBodyParams, sys: SymmetricSystem,
                         f0: MomentumValue, h: float, dt: float):
    """Detect the equatorial periodic reduced orbit and certify its average
    precession rate and relative periodicity in the rotating frame.

    The other two principal-section orbits cross the chart poles and are
    analyzed on the ellipsoid only.
    """
    omega = float(np.sqrt(2.0 * h / params.C))
    seed = ReducedState(q=[0.0, np.pi / 2.0], qdot=[omega, 0.0])
    cfg45 = IntegratorConfig(method="rk45", dt=1e-2, abs_tol=1e-12, rel_tol=1e-12)
    rhs = reduced_vector_field(sys, f0)

    def flow(s, T):
        return propagate(rhs, s, 0.0, T, cfg45)

    orbit = shoot_periodic(flow, seed.to_vector(), 2.0 * np.pi / omega,
                           phase_index=2, angle_indices=(0,))
    T = orbit.period

    steps = max(2, int(round(T / dt)))
    cfg = IntegratorConfig(method="rk4", dt=T / steps, max_steps=10_000_000)
    r_start = ReducedState.from_vector(sys, orbit.initial_state)
    red = integrate_reduced(sys, f0, r_start, 0.0, 2.0 * T, cfg)
    full = reconstruct(sys, f0, red, x0=None, psi0=[0.0])

    first = red.times <= T + 1e-12
    lam = lambda_average(red.times[first], full.states[first, 5], T)
    i_T = int(np.searchsorted(red.times, T))
    defect = abs(full.states[i_T, 2] - full.states[0, 2] - lam * T)
    endpoint = _result("lambda-endpoint-consistency", defect, 1e-8,
                       f"|psi(T) - psi(0) - lambda T| at T={T:.6g}")
    residual = rotating_frame_residual(full, lam, T)
    rotating = _result("rotating-frame-periodicity", residual, 1e-6,
                       f"lambda={lam:.3e} over a second period")
    return lam, T, endpoint, rotating
