"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The long simulations are shared through module-scoped fixtures; the whole
file takes roughly forty minutes on one core.
"""
import math
import time

import mpmath
import numpy as np
import pytest

from corrocrack.analysis import CaseResult, analyse_campaign, crack_band, crack_width_slope
from corrocrack.chemistry import (UA_CM2, ChemistryConstants, box_reaction_fraction, composition,
                                  flux_reduction)
from corrocrack.mechanics import (MATERIAL_PRESETS, MaterialSet, MechanicsModel, annulus_bcs, compliance,
                                  rust_layer_pressure, solve_elasticity)
from corrocrack.mesh import SpecimenGeometry, Tag, build_annulus_mesh
from corrocrack.numerics import lambert_w0
from corrocrack.solver import CaseConfig, run_case
from corrocrack.transport import TransportProps

RESULTS = {}
CURRENTS = (1.0, 10.0, 100.0, 500.0)


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def case(preset: str, cover_mm: float, i_uA: float, **kw) -> CaseConfig:
    t_end = 12e-6 if cover_mm > 30.0 else 8e-6
    return CaseConfig(geometry=SpecimenGeometry(cover=cover_mm * 1e-3), materials=MATERIAL_PRESETS[preset],
                      i_a=i_uA * UA_CM2, t_cor_end=t_end, **kw)


def campaign(preset, cover_mm, hooks=None):
    cases = []
    for i in CURRENTS:
        res = run_case(case(preset, cover_mm, i), on_record=(hooks or {}).get(i))
        s = res.series
        cases.append(CaseResult(i * UA_CM2, s.column("t_cor"), s.column("w")))
        cases[-1].run = res
    return analyse_campaign(cases, UA_CM2)


class Monitor:
    """Per-record irreversibility and pore-floor checks for one run."""

    def __init__(self):
        self.phi_prev = None
        self.min_dphi = 0.0
        self.min_theta_margin = math.inf

    def __call__(self, sim, step):
        phi = sim.mech.phi
        if self.phi_prev is not None:
            self.min_dphi = min(self.min_dphi, float(np.min(phi - self.phi_prev)))
        self.phi_prev = phi.copy()
        tr = sim.transport
        margin = float(np.min(tr.p0 - tr.theta_r - tr.theta_floor))
        self.min_theta_margin = min(self.min_theta_margin, margin)


@pytest.fixture(scope="module")
def camp28():
    mon = Monitor()
    t0 = time.perf_counter()
    out = campaign("pedrosa-28d", 20.0, hooks={100.0: mon})
    out.monitor = mon
    out.seconds = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def camp147():
    return campaign("pedrosa-147d", 20.0), campaign("pedrosa-147d", 40.0)


def test_criterion_01_annulus_elasticity():
    a, b, p, E, nu = 0.008, 0.016, 1e6, 33e9, 0.2
    exact = compliance(a, b / a, nu, E) * p
    errors = {}
    seconds = 0.0
    for div in (8, 16, 32):
        t0 = time.perf_counter()
        mesh = build_annulus_mesh(a, b, a / div)
        model = MechanicsModel(mesh, MaterialSet(E_c=E, nu_c=nu))
        bc = annulus_bcs(mesh)
        u = solve_elasticity(model, np.zeros(mesh.n_nodes), np.zeros(mesh.n_elements), bc,
                             np.full(len(bc.pressure_edges), p))
        nodes = mesh.boundary_nodes(Tag.INNER)
        x = mesh.nodes[nodes]
        ur = np.einsum("ij,ij->i", u.reshape(-1, 2)[nodes], x) / np.hypot(x[:, 0], x[:, 1])
        errors[div] = abs(ur.mean() - exact) / exact
        seconds = time.perf_counter() - t0
    ok = errors[32] <= 0.01 and errors[8] > errors[16] > errors[32] and seconds < 10.0
    report(1, ok, f"relative error h=a/8 {errors[8]:.2e}, a/16 {errors[16]:.2e}, a/32 {errors[32]:.2e}; "
                  f"a/32 solve {seconds:.1f} s")


def test_criterion_02_lambert_w():
    t0 = time.perf_counter()
    F = np.logspace(-8, 8, 10_000)
    W = lambert_w0(F)
    worst = float(np.max(np.abs(W * np.exp(W) - F) / F))
    at_e = abs(float(lambert_w0(math.e)) - 1.0)
    seconds = time.perf_counter() - t0
    report(2, worst <= 1e-12 and at_e <= 1e-14 and seconds < 1.0,
           f"max |W e^W - F|/F = {worst:.1e}, |W(e) - 1| = {at_e:.1e}, {seconds:.3f} s")


def log_form_root(t, kappa, C, K_r):
    """Exact ``u_c`` of ``u_c = C K_r ln(kappa t / (t + u_c))`` in 40-digit arithmetic."""
    X = mpmath.mpf(C) * K_r
    r = mpmath.mpf(t) / X
    d0 = mpmath.lambertw(kappa * r * mpmath.exp(r)).real - r
    d = mpmath.findroot(lambda d: d + mpmath.log1p(d / r) - mpmath.log(kappa), d0)
    return X * d


def test_criterion_03_pressure_identity():
    # The residual of the log form, evaluated with the double-precision u_c,
    # is ill-conditioned when t_cor << C_c K_r (the log argument is 1 - 1e-10),
    # so the closed form is checked against the exact root of the log form.
    rng = np.random.default_rng(2024)
    n = 1000
    t = 10 ** rng.uniform(-8, -4, n)
    kappa = rng.uniform(2.0, 3.3, n)
    C = 10 ** rng.uniform(-14, -8, n)
    K_r = 10 ** rng.uniform(7, 11, n)
    mpmath.mp.dps = 40
    worst, raw = 0.0, 0.0
    for ti, ki, Ci, Ki in zip(t, kappa, C, K_r):
        u, p = rust_layer_pressure(ti, ki, Ci, Ki)
        u_ex = log_form_root(ti, ki, Ci, Ki)
        p_ex = u_ex / Ci
        worst = max(worst, float(abs(u - u_ex) / u_ex), float(abs(p - p_ex) / p_ex))
        p_log = Ki * mpmath.log(mpmath.mpf(ki) * ti / (mpmath.mpf(ti) + u))
        raw = max(raw, float(abs(p - p_log) / p_log))
    limit = 0.0
    for ti in (1e-6, 1e-5, 1e-4):
        for Ci in (3e-13, 3e-11):
            u, _ = rust_layer_pressure(ti, 3.17, Ci, 1e15)
            limit = max(limit, abs(u - ti * 2.17) / (ti * 2.17))
    report(3, worst <= 1e-8 and limit <= 1e-3,
           f"max deviation from the log-form root {worst:.1e} (raw residual {raw:.1e}), "
           f"incompressible-limit deviation {limit:.1e}")


def test_criterion_04_flux_reduction():
    c = ChemistryConstants()
    D = TransportProps().D_m
    at_zero, monotone, far = 0.0, True, 0.0
    t_r = np.linspace(0.0, 100e-6, 1001)
    for i in CURRENTS:
        comp = composition(i * UA_CM2, c)
        at_zero = max(at_zero, abs(flux_reduction(0.0, 1.0, comp, c, D) - 1.0))
        k = np.array([flux_reduction(x, 1.0, comp, c, D) for x in t_r])
        monotone &= bool(np.all(np.diff(k) < 0.0))
        far = max(far, flux_reduction(10e-3, 1.0, comp, c, D))
    report(4, at_zero <= 1e-12 and monotone and far <= 1e-6,
           f"|k_f(0) - 1| = {at_zero:.1e}, strictly decreasing: {monotone}, k_f(10 mm) = {far:.1e}")


def test_criterion_05_box_oracle():
    c = ChemistryConstants()
    t0 = time.perf_counter()
    errs = []
    for i in (1.0, 10.0, 100.0):
        comp = composition(i * UA_CM2, c)
        errs.append(abs(box_reaction_fraction(comp.k_II_o, c) - comp.r_h) / comp.r_h)
    seconds = time.perf_counter() - t0
    report(5, max(errs) <= 0.02 and seconds < 5.0,
           f"relative errors {', '.join(f'{e:.1e}' for e in errs)}; {seconds:.2f} s")


def test_criterion_06_conservation(camp28):
    run = next(c for c in camp28.cases if c.i_a == 100 * UA_CM2).run
    s, mon = run.series, camp28.monitor
    mass = float(s.column("mass_error").max())
    w, t = s.column("w"), s.column("t_cor")
    post = w >= run.sim.cfg.w_min
    first = int(np.argmax(post)) if post.any() else len(w)
    dw = float(np.min(np.diff(w[first:]), initial=0.0))
    ok = (mass <= 0.01 and mon.min_dphi >= 0.0 and mon.min_theta_margin >= -1e-15 and dw >= 0.0
          and run.sim.mesh.n_elements > 10_000)
    report(6, ok, f"{run.sim.mesh.n_elements} elements, max mass error {mass:.1e}, min nodal dphi "
                  f"{mon.min_dphi:.1e}, min theta_l margin {mon.min_theta_margin:.1e}, "
                  f"min post-initiation dw {dw:.1e} m over t_cor {t[first] * 1e6:.2f}-{t[-1] * 1e6:.1f} um")


def test_criterion_07_headline_trend(camp28):
    beta = [c.slope.beta for c in sorted(camp28.cases, key=lambda c: c.i_a)]
    law = camp28.law
    ok = all(x > y for x, y in zip(beta, beta[1:])) and law.gamma2 < 0.0 and law.r2 >= 0.9
    report(7, ok, f"beta = {', '.join(f'{b:.3f}' for b in beta)}; gamma1 = {law.gamma1:.3f}, "
                  f"gamma2 = {law.gamma2:.4f}, R2 = {law.r2:.4f}; campaign {camp28.seconds / 60:.1f} min")


def test_criterion_08_correction_factor(camp147):
    thin, thick = camp147
    k20 = float(thin.law.k_beta(500 * UA_CM2))
    k40 = float(thick.law.k_beta(500 * UA_CM2))
    ok = abs(k20 - 0.58) <= 0.15 and k40 < k20 and 0.2 <= k40 <= 0.5
    b20 = ", ".join(f"{c.slope.beta:.3f}" for c in thin.cases)
    b40 = ", ".join(f"{c.slope.beta:.3f}" for c in thick.cases)
    report(8, ok, f"k_beta(500) 20 mm = {k20:.3f} (beta {b20}), 40 mm = {k40:.3f} (beta {b40})")


def test_criterion_09_crack_pattern(camp28):
    run = next(c for c in camp28.cases if c.i_a == 100 * UA_CM2).run
    mesh, phi = run.sim.mesh, run.sim.mech.phi
    connected, top_x = crack_band(mesh, phi, 0.95)
    xc = run.sim.cfg.geometry.rebar_center[0]
    aligned = connected and abs(float(np.mean(top_x)) - xc) <= run.sim.cfg.geometry.rebar_radius
    # where the damage concentrates on the top surface, for the record
    top = mesh.boundary_nodes(Tag.TOP)
    x_peak = float(mesh.nodes[top[np.argmax(phi[top])], 0])
    report(9, connected and aligned,
           f"phi >= 0.95 band connected: {connected}; phi_max = {phi.max():.3f}, "
           f"top-surface phi peak at x = {x_peak * 1e3:.1f} mm (bar axis {xc * 1e3:.1f} mm)")


def test_criterion_10_step_halving():
    base = case("pedrosa-28d", 20.0, 100.0)
    d = 0.025e-6
    t_end = 1.6e-6
    coarse = run_case(base.with_(t_cor_end=t_end, dtcor_init=d, dtcor_min=d, dtcor_max=d))
    fine = run_case(base.with_(t_cor_end=t_end, dtcor_init=d / 2, dtcor_min=d / 2, dtcor_max=d / 2))
    tc, wc = coarse.series.column("t_cor"), coarse.series.column("w")
    tf, wf = fine.series.column("t_cor")[::2], fine.series.column("w")[::2]
    matched = np.allclose(tc, tf, rtol=1e-9, atol=1e-15)
    pre = wf < base.w_min
    diff = float(np.max(np.abs(wc[pre] - wf[pre])))
    scale = float(np.max(wf[pre]))
    rel = diff / scale if scale > 0.0 else math.inf
    report(10, matched and scale > 0.0 and rel <= 0.01,
           f"{int(pre.sum())} matched pre-cracking records, max w {scale * 1e6:.3f} um, "
           f"max |w(dt) - w(dt/2)| = {diff * 1e9:.2f} nm ({rel:.2%})")
