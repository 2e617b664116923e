"""Acceptance criteria, one PASS/FAIL line each.

Lines tagged ``supplementary`` are informational and are not counted.
"""

import math

import numba
import numpy as np
import pytest
import scipy.linalg

from lyapflow.config import parse_config
from lyapflow.errors import ConfigError
from lyapflow.integrator import CoupledState, IntegratorConfig, integrate
from lyapflow.lyapunov import evolve_spectrum, qr_oracle, sample_trajectory
from lyapflow.operators import apply_psi_ad, psi_scalar
from lyapflow.systems import StatePoint, SystemDefinition, abc_flow, frw, gross_neveu, linear_system
from lyapflow.varproj import (adjoint_ve_generator, arclength_trajectory, make_context, normal_projector,
                              nve_generator, projected_ve_generator, raychaudhuri_residual)

from oracles import (abc_tilde, frw_p2, gn_nve_reference, gn_p2, operator_closed_form_mp, psi_ad_bruteforce,
                     qr_closed_form_mp, random_symmetric)

T_LONG, DT = 1e4, 1e-2
ABC_X0 = [0.0, 0.0, 0.001]
GN = gross_neveu("imaginary")
GN_X0 = np.array([0.01, 0.0, 0.01, gn_p2(0.01, 0.0, 0.01, 3.0)])
ABC_HALF = abc_flow(1, 1, math.sqrt(2) / 2)

RESULTS = []


def record(label, ok, detail, counted=True):
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
    if not counted:
        line = f"{label} (supplementary, not counted): {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def long_run(sys, x0):
    return evolve_spectrum(sys, np.asarray(x0, dtype=float), T_LONG, DT, sample_stride=1000, backend="numba")


def fmt(v):
    return "(" + ", ".join(f"{x:.4e}" for x in v) + ")"


# --- 1-5: long runs -----------------------------------------------------------------

def test_criterion_1_abc_integrable():
    lam = long_run(abc_flow(1, 1, 0), ABC_X0).final
    ok = np.max(np.abs(lam)) <= 2e-3 and abs(lam.sum()) <= 1e-3
    assert record("criterion 1", ok, f"lambda={fmt(lam)} max|l|<=2e-3, |sum|<=1e-3")


def test_criterion_2_abc_chaotic():
    lam = long_run(ABC_HALF, ABC_X0).final
    pair = abs(lam[0] + lam[2] + lam[1])
    ok = 0.03 <= lam[0] <= 0.09 and abs(lam.sum()) <= 1e-2 and pair <= 5e-3
    assert record("criterion 2", ok, f"lambda={fmt(lam)} l_max in [0.03,0.09], |sum|<=1e-2, "
                                     f"|l_max+l_min+l_mid|={pair:.2e}<=5e-3")


def test_criterion_3_gn_imaginary():
    lam = long_run(GN, GN_X0).final
    pairing = np.max(np.abs(lam + lam[::-1]))
    ok = 0.15 <= lam[0] <= 0.30 and pairing <= 1e-2
    assert record("criterion 3", ok, f"lambda={fmt(lam)} l_max in [0.15,0.30], pairing={pairing:.2e}<=1e-2")


def test_criterion_4_gn_real():
    # stated configuration: q1=0.01, q2=0, p1=0.01, p2>0 from H=-3 on the real-domain Hamiltonian
    doc = ('{"system": "gross-neveu-real", "initial_state": [0.01, 0.0, 0.01, null], "t_max": 10000, '
           '"energy_closure": {"target": -3, "solve_for": "p2", "sign": 1}}')
    try:
        cfg = parse_config(doc)
    except ConfigError as exc:
        record("criterion 4", False, f"stated initial condition does not exist: {exc.errors[0]}")
        pytest.fail("criterion 4: energy closure H=-3 is infeasible on the real-domain Hamiltonian (H <= -8)")
    lam = long_run(gross_neveu("real"), cfg.initial_state).final
    assert record("criterion 4", np.max(np.abs(lam)) <= 5e-3, f"lambda={fmt(lam)} max|l|<=5e-3")


def test_supplementary_gn_real_sign_flipped_closure():
    c1, c2 = math.cosh(0.01), 1.0
    p2 = math.sqrt(2 * (-3 + 2 * c1 + 2 * c2 + 4 * c1 * c2) - 0.01 ** 2)
    lam = long_run(gross_neveu("real"), [0.01, 0.0, 0.01, p2]).final
    record("criterion 4", np.max(np.abs(lam)) <= 5e-3,
           f"real-domain field with p2={p2:.8f} from H=+3 sign convention: lambda={fmt(lam)}", counted=False)


def test_criterion_5_frw():
    x0 = [0.01, 0.0, 0.01, frw_p2(0.01, 0.0, 0.01, 0.01, 1.0, -1.0)]
    lam1 = long_run(frw(1.0, -1.0), x0).final
    x0b = [0.01, 0.0, 0.01, frw_p2(0.01, 0.0, 0.01, 0.01, 1.0, -1.9)]
    lam2 = long_run(frw(1.0, -1.9), x0b).final
    ok = np.max(np.abs(lam1)) <= 3e-3 and 0.08 <= lam2[0] <= 0.20
    assert record("criterion 5", ok, f"eps=-1 lambda={fmt(lam1)} max|l|<=3e-3; eps=-1.9 l_max={lam2[0]:.4e} "
                                     f"in [0.08,0.20]")


# --- 6: oracle equivalence ---------------------------------------------------------

def _gap_ok(op, qr):
    gap = np.abs(op - qr)
    return gap, bool(np.all(gap <= np.maximum(5e-3, 0.05 * np.abs(qr))))


def test_criterion_6a_gn_operator_vs_qr():
    op = evolve_spectrum(GN, GN_X0, 1e3, DT, sample_stride=1000, backend="numba").final
    qr = qr_oracle(GN, GN_X0, 1e3, DT, renorm_every=10, backend="numba")
    gap, ok = _gap_ok(op, qr)
    assert record("criterion 6a", ok, f"t=1e3 operator={fmt(op)} qr={fmt(qr)} gap={fmt(gap)} "
                                      f"tol=max(5e-3, 5% rel)")


def test_supplementary_6a_long_time():
    op = long_run(GN, GN_X0).final
    qr = qr_oracle(GN, GN_X0, T_LONG, DT, renorm_every=10, backend="numba")
    gap, ok = _gap_ok(op, qr)
    record("criterion 6a", ok, f"t=1e4 gap={fmt(gap)}", counted=False)


LINEAR_CASES = {
    "diagonal": np.diag([0.3, -0.1, -0.2]),
    "normal": np.array([[0.1, 1.0, 0.0], [-1.0, 0.1, 0.0], [0.0, 0.0, -0.2]]),
    "non-normal": np.array([[0.2, 2.0, 0.0], [0.0, -0.05, 1.0], [0.0, 0.0, -0.15]]),
}


def test_criterion_6b_linear_closed_forms():
    t = 1e3
    worst = {}
    for name, M in LINEAR_CASES.items():
        sys = linear_system(M)
        op = evolve_spectrum(sys, np.ones(3), t, DT, sample_stride=1000).final
        qr = qr_oracle(sys, np.ones(3), t, DT, renorm_every=10)
        worst[name] = (float(np.max(np.abs(op - operator_closed_form_mp(M, t)))),
                       float(np.max(np.abs(qr - qr_closed_form_mp(M, t)))))
    ok = all(a <= 1e-6 and b <= 1e-6 for a, b in worst.values())
    detail = ", ".join(f"{k}: op {a:.1e} qr {b:.1e}" for k, (a, b) in worst.items())
    assert record("criterion 6b", ok, f"t=1e3 error vs exact finite-time exponents: {detail} (<=1e-6)")


def test_supplementary_6b_against_eigenvalues():
    # normal A: the operator value is t/(t+1) Re eig(A); the rescaled value hits Re eig(A)
    t = 1e3
    M = LINEAR_CASES["normal"]
    re = np.sort(np.linalg.eigvals(M).real)[::-1]
    op = evolve_spectrum(linear_system(M), np.ones(3), t, DT, sample_stride=1000).final
    qr = qr_oracle(linear_system(M), np.ones(3), t, DT)
    raw, scaled, q = (float(np.max(np.abs(v - re))) for v in (op, op * (t + 1) / t, qr))
    record("criterion 6b", scaled <= 1e-6 and q <= 1e-6,
           f"normal A vs Re eig: operator raw {raw:.1e}, rescaled (t+1)/t {scaled:.1e}, qr {q:.1e}", counted=False)


# --- 7: golden matrices ------------------------------------------------------------

def test_criterion_7_golden_matrices():
    start = np.array([0.3, math.pi / 4, 0.3 + math.pi / 2])
    _, pts = sample_trajectory(ABC_HALF, start, 10.0, 1e-2, 100)
    # the reference matrix is a function of x on the particular solution, so it is evaluated there;
    # RK4 leaves the invariant line by about 1e-8, which is integration error, not generator error
    line = [np.array([p[0], math.pi / 4, p[0] + math.pi / 2]) for p in pts[1:11]]
    abc_err = max(np.max(np.abs(projected_ve_generator(ABC_HALF, make_context(ABC_HALF, q), "time")
                                - abc_tilde(q[0], 1.0, 0.5))) for q in line)
    # on the invariant plane q2 = p2 = 0, H = 3 fixes p1 by the same formula with the roles swapped
    plane = np.array([0.01, 0.0, gn_p2(0.0, 0.01, 0.0, 3.0), 0.0])
    _, pts = sample_trajectory(GN, plane, 10.0, 1e-2, 100)
    gn_err = max(np.max(np.abs(nve_generator(GN, make_context(GN, p), 0, "time") - gn_nve_reference(p[0], p[2])))
                 for p in pts[1:11])
    factor6_gap = max(5 * abs(gn_nve_reference(p[0], p[2])[2, 2]) for p in pts[1:11])
    ok = abc_err <= 1e-10 and gn_err <= 1e-10
    assert record("criterion 7", ok, f"ABC max entry error {abc_err:.1e}, GN NVE {gn_err:.1e} (<=1e-10, 10 points "
                                     f"each; GN (3,3) variant -6 f p1^2 would differ by up to {factor6_gap:.2f})")


# --- 8: property suites ------------------------------------------------------------

def _drift(before, after, *factors):
    scale = max(1.0, float(np.prod([np.linalg.norm(f) for f in factors])))
    return abs(after - before) / scale


@numba.njit(cache=True)
def _vdp_field(u, p):
    return np.array([u[1], p[0] * (1.0 - u[0] * u[0]) * u[1] - u[0]])


@numba.njit(cache=True)
def _vdp_jacobian(u, p):
    return np.array([[0.0, 1.0], [-2.0 * p[0] * u[0] * u[1] - 1.0, p[0] * (1.0 - u[0] * u[0])]])


def test_criterion_8_property_suites():
    checks = {}
    xs = np.linspace(-30, 30, 601)
    checks["psi"] = max(abs(psi_scalar(0.0) - 1.0),
                        max(abs(psi_scalar(x) - psi_scalar(-x) - x) for x in xs)), 1e-12

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        L, B, c = random_symmetric(rng, 4), rng.normal(size=(4, 4)), rng.uniform(-5, 5)
        worst = max(worst, np.max(np.abs(apply_psi_ad(L, B, c) - psi_ad_bruteforce(L, B, c))))
    checks["psi_ad"] = worst, 1e-8

    worst = 0.0
    for sys, dim in ((ABC_HALF, 3), (GN, 4), (frw(1.0, -1.9), 4)):
        for u in rng.uniform(-2, 2, (20, dim)):
            ctx = make_context(sys, u)
            h = normal_projector(ctx)
            worst = max(worst, np.max(np.abs(h @ h - h)), np.max(np.abs(h @ ctx.V)))
    checks["projector"] = worst, 1e-12

    def rhs(st, t):
        x = st.x
        J = GN.jacobian(x)
        return {"point": GN.field(x), "Z1": J @ st["Z1"], "Z2": J @ st["Z2"],
                "Y": adjoint_ve_generator(GN, x, "time") @ st["Y"]}

    Z1, Z2, Y0 = np.array([0.1, 0.2, -0.3, 0.05]), np.array([-0.2, 0.1, 0.0, 0.3]), np.array([0.3, 0.4, 0.0, -1.0])
    st0 = CoupledState(StatePoint(GN_X0), {"Z1": Z1, "Z2": Z2, "Y": Y0})
    st = integrate(rhs, st0, IntegratorConfig(dt=1e-2, t_max=100.0, sample_stride=1000)).state
    dH, I = GN.hamiltonian.gradient, GN.symplectic.I
    checks["dJ(Z)"] = max(_drift(dH(st0.x) @ st0[k], dH(st.x) @ st[k], dH(st.x), st[k]) for k in ("Z1", "Z2")), 1e-6
    checks["<Y,Z>"] = _drift(Y0 @ Z1, st["Y"] @ st["Z1"], st["Y"], st["Z1"]), 1e-6
    checks["<Z1,IZ2>"] = _drift(Z1 @ I @ Z2, st["Z1"] @ I @ st["Z2"], st["Z1"], st["Z2"]), 1e-6
    growth = min(np.linalg.norm(st["Z1"]), np.linalg.norm(st["Z2"]))

    checks["raychaudhuri"] = max(
        raychaudhuri_residual(sys, arclength_trajectory(sys, x0, 400, 1e-3), 1e-3)
        for sys, x0 in ((ABC_HALF, [0.1, 0.2, 0.3]), (GN, GN_X0))), 1e-4

    def pf_rhs(st, t):
        return {"point": ABC_HALF.field(st.x), "F": ABC_HALF.jacobian(st.x) @ st["F"],
                "P": adjoint_ve_generator(ABC_HALF, st.x) @ st["P"]}

    res = integrate(pf_rhs, CoupledState(StatePoint([0.1, 0.2, 0.3]), {"F": np.eye(3), "P": np.eye(3)}),
                    IntegratorConfig(dt=1e-2, t_max=100.0, sample_stride=1000))
    P, F = res.state["P"], res.state["F"]
    pf_abs = float(np.max(np.abs(P.T @ F - np.eye(3))))
    # entries of P^T F are pairings <P_i, F_j>, measured like the other pairings
    checks["P^T F = I"] = pf_abs / max(1.0, np.linalg.norm(P) * np.linalg.norm(F)), 1e-6

    vdp = SystemDefinition(name="van-der-pol", dim=2, field_kernel=_vdp_field, jacobian_kernel=_vdp_jacobian,
                           params=np.array([1.5]))

    def det_rhs(st, t):
        J = vdp.jacobian(st.x)
        return {"point": vdp.field(st.x), "F": J @ st["F"], "I": np.array([np.trace(J)])}

    res = integrate(det_rhs, CoupledState(StatePoint([0.5, 0.0]), {"F": np.eye(2), "I": np.zeros(1)}),
                    IntegratorConfig(dt=1e-3, t_max=10.0, sample_stride=1000))
    expected = math.exp(res.state["I"][0])
    checks["det F"] = abs(np.linalg.det(res.state["F"]) / expected - 1.0), 1e-6

    ok = all(v <= tol for v, tol in checks.values())
    detail = ", ".join(f"{k} {v:.1e}<={tol:.0e}" for k, (v, tol) in checks.items())
    assert record("criterion 8", ok, detail + f" (variations grew to {growth:.1e}; pairings relative to factors; "
                                    f"P^T F absolute {pf_abs:.1e} with |P||F| = {np.linalg.norm(P) * np.linalg.norm(F):.1e})")


# --- 9: short-time law ---------------------------------------------------------------

def _first_step(sys, x0, dt, initial="zero"):
    return evolve_spectrum(sys, x0, dt, dt, sample_stride=1, initial=initial, backend="python").final_L


def test_criterion_9_first_step():
    dt = 1e-6
    theta = 0.5 * (GN.jacobian(GN_X0) + GN.jacobian(GN_X0).T)
    L1 = _first_step(GN, GN_X0, dt)
    rel = np.max(np.abs(L1 - dt * theta)) / np.max(np.abs(dt * theta))
    assert record("criterion 9", rel <= 1e-8, f"max|L1 - dt theta| / max|dt theta| = {rel:.2e} (<=1e-8); "
                                              f"exact first step is dt theta/(1+dt) + O(dt^2)")


def test_supplementary_9_readings():
    dt = 1e-6
    theta = 0.5 * (GN.jacobian(GN_X0) + GN.jacobian(GN_X0).T)
    L1 = _first_step(GN, GN_X0, dt)
    absolute = np.max(np.abs(L1 - dt * theta)) / max(1.0, np.max(np.abs(theta)))
    M = np.array([[0.1, 1.0, 0.0], [-0.5, 0.3, 0.2], [0.0, 0.4, -0.4]])
    F = scipy.linalg.expm(dt * M)
    w, U = np.linalg.eigh(F @ F.T)
    exact = U @ np.diag(np.log(w)) @ U.T / (2 * (dt + 1))
    L1m = _first_step(linear_system(M), np.ones(3), dt)
    closed = np.max(np.abs(L1m - exact)) / np.max(np.abs(exact))
    ident = np.max(np.abs(_first_step(GN, GN_X0, dt, "identity") - dt * theta))
    record("criterion 9", absolute <= 1e-8 and closed <= 1e-8 and ident > 0.1,
           f"absolute {absolute:.1e}, vs exact closed form (constant A) {closed:.1e} relative, "
           f"identity start misses by {ident:.2f}", counted=False)
