"""Acceptance suite: one test and one printed pass/fail line per criterion.

Every tolerance is fixed here, not calibrated elsewhere.  The rigid body
is the triaxial free body (1, 2, 3) at zero momentum with the frozen
interior initial state from conftest; long runs use RK4 at dt = 1e-3 as
stated by the criteria.
"""

import numpy as np
import pytest

from routhkit import (
    ConformalData,
    FullState,
    IntegratorConfig,
    ReducedState,
    RigidBodyParams,
    complete_state,
    integrate_full,
    integrate_ode,
    integrate_reduced,
    momentum_map,
    principal_section_orbits,
    reconstruct,
    reduced_energy,
)
from routhkit.verify import (
    closed_form_lagrangian_check,
    determinant_identity_check,
    momentum_round_trip_check,
    run_kolosov,
    zero_momentum_degeneration_check,
)

DT = 1e-3


def _report(criterion: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    return ok


@pytest.fixture(scope="module")
def kolosov_report(triaxial_params, generic_state):
    return run_kolosov(triaxial_params, generic_state, dt=DT)


@pytest.fixture(scope="module")
def matched_runs(triaxial_system, zero_momentum, generic_state):
    cfg = IntegratorConfig(method="rk4", dt=DT, max_steps=10_000_000)
    red = integrate_reduced(triaxial_system, zero_momentum, generic_state,
                            0.0, 10.0, cfg)
    s0 = complete_state(triaxial_system, zero_momentum, generic_state, psi=[0.5])
    full = integrate_full(triaxial_system, s0, 0.0, 10.0, cfg)
    return red, full


def test_criterion_1_momentum_round_trip():
    res = momentum_round_trip_check(count=100, tolerance=1e-12)
    ok = _report("criterion 1 momentum round-trip",
                 res.passed, f"worst relative residual {res.value:.3e} <= 1e-12")
    assert ok


def test_criterion_2_determinant_identity(triaxial_params):
    res = determinant_identity_check(triaxial_params, count=50, tolerance=1e-5)
    ok = _report("criterion 2 symplectic determinant identity",
                 res.passed, f"worst relative gap {res.value:.3e} <= 1e-5")
    assert ok


def test_criterion_3_zero_momentum_degeneration(triaxial_params):
    res_a = zero_momentum_degeneration_check(triaxial_params, count=100,
                                             tolerance=1e-12)
    res_b = closed_form_lagrangian_check(triaxial_params, count=100,
                                         tolerance=1e-10)
    ok = _report(
        "criterion 3 zero-momentum degeneration",
        res_a.passed and res_b.passed,
        f"Routhian vs Lagrangian {res_a.value:.3e} <= 1e-12; "
        f"closed chart form {res_b.value:.3e} <= 1e-10")
    assert ok


def test_criterion_4_projection_equivalence(triaxial_system, zero_momentum,
                                            matched_runs):
    red, full = matched_runs
    proj_gap = float(np.max(np.abs(full.states[:, [0, 1, 3, 4]] - red.states)))
    rec = reconstruct(triaxial_system, zero_momentum, red, x0=None, psi0=[0.5])
    psi_gap = float(np.max(np.abs(rec.states[:, 2] - full.states[:, 2])))
    ok = _report(
        "criterion 4 projection equivalence",
        proj_gap <= 1e-6 and psi_gap <= 1e-6,
        f"sup projection gap {proj_gap:.3e} <= 1e-6 over t=[0,10]; "
        f"reconstructed precession gap {psi_gap:.3e} <= 1e-6")
    assert ok


def test_criterion_5_conservation(triaxial_system, zero_momentum, generic_state):
    cfg = IntegratorConfig(method="rk4", dt=DT, max_steps=10_000_000)
    red = integrate_reduced(triaxial_system, zero_momentum, generic_state,
                            0.0, 100.0, cfg)
    e0 = red.meta.energy0
    drift_e = 0.0
    for row in red.states[::200]:
        e = reduced_energy(triaxial_system, zero_momentum,
                           ReducedState(q=row[:2], qdot=row[2:]))
        drift_e = max(drift_e, abs(e - e0) / abs(e0))

    s0 = complete_state(triaxial_system, zero_momentum, generic_state, psi=[0.5])
    full = integrate_full(triaxial_system, s0, 0.0, 50.0, cfg)
    drift_j = 0.0
    for row in full.states[::200]:
        st = FullState.from_vector(triaxial_system, row)
        drift_j = max(drift_j, float(np.max(np.abs(
            momentum_map(triaxial_system, st).as_vector()))))

    ok = _report(
        "criterion 5 conservation",
        drift_e <= 1e-6 and drift_j <= 1e-7,
        f"reduced energy drift {drift_e:.3e} <= 1e-6 over t=100; "
        f"momentum drift {drift_j:.3e} <= 1e-7 over t=50")
    assert ok


def test_criterion_6_ellipsoid_equivalence(kolosov_report):
    rep = kolosov_report
    a = rep.zero_energy_relation
    b = rep.flow_match
    c = rep.speed_constancy
    ok = _report(
        "criterion 6 ellipsoid equivalence",
        a.passed and b.passed and c.passed,
        f"zero-energy relation {a.value:.3e} <= 1e-6; "
        f"flow sup gap {b.value:.3e} <= 1e-5; "
        f"speed variation {c.value:.3e} <= 1e-5")
    assert ok


def test_criterion_7_closed_geodesics(kolosov_report):
    closures = {plane: kolosov_report.sections[plane]["closure_error"]
                for plane in ("x", "y", "z")}
    periods = [kolosov_report.sections[plane]["period"] for plane in ("x", "y", "z")]
    triaxial_ok = max(closures.values()) <= 1e-8
    distinct = float(np.min(np.diff(np.sort(periods))))

    sphere = principal_section_orbits(RigidBodyParams(1.0, 1.0, 1.0),
                                      ConformalData(h=0.5))
    sphere_periods = [sphere[plane].period for plane in ("x", "y", "z")]
    sphere_spread = max(sphere_periods) - min(sphere_periods)
    sphere_ok = (sphere_spread <= 1e-8
                 and max(o.closure_error for o in sphere.values()) <= 1e-8)

    ok = _report(
        "criterion 7 closed geodesics",
        triaxial_ok and sphere_ok,
        f"triaxial closure errors {max(closures.values()):.3e} <= 1e-8, "
        f"periods {[f'{p:.9f}' for p in sorted(periods)]} "
        f"(min separation {distinct:.3e}); "
        f"sphere period spread {sphere_spread:.3e} <= 1e-8")
    assert ok


def test_criterion_8_rotating_frame(kolosov_report):
    endpoint = kolosov_report.endpoint_defect
    rotating = kolosov_report.rotating_frame
    ok = _report(
        "criterion 8 rotating-frame periodicity",
        endpoint.passed and rotating.passed,
        f"|psi(T)-psi(0)-lambda T| = {endpoint.value:.3e} <= 1e-8; "
        f"residual over second period {rotating.value:.3e} <= 1e-6 "
        f"(lambda = {kolosov_report.lambda_avg:.3e}, "
        f"T = {kolosov_report.equatorial_period:.6g})")
    assert ok


def test_criterion_9_rk4_order():
    def rhs(y):
        return np.array([y[1], -y[0]])

    errs = []
    for dt in (0.02, 0.01):
        traj = integrate_ode(rhs, [1.0, 0.0], 0.0, 2.0 * np.pi,
                             IntegratorConfig(method="rk4", dt=dt))
        errs.append(float(np.max(np.abs(traj.states[-1] - np.array([1.0, 0.0])))))
    ratio = errs[0] / errs[1]
    ok = _report("criterion 9 integrator order",
                 12.0 <= ratio <= 20.0,
                 f"halving dt scales the endpoint error by {ratio:.2f}, "
                 f"within [12, 20]")
    assert ok
