"""Runnable verification commands shared by the CLI and the test suites.

Each command takes a resolved RunConfig plus a Lab (lazily built pipeline
pieces for the scenario) and returns CheckRecords and optional artifacts.
Checks that do not apply to a scenario are reported as skipped with a
reason; nothing is silently dropped.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .complexify import (
    ComplexificationMap,
    CutoffSpec,
    c_sphere_samples,
    critical_values_f0r,
    nu_bar_dot_upsilon,
    sample_tube,
    scan_delta,
    verify_h0_critical,
)
from .config import RunConfig
from .fibration import (
    BasePath,
    assembled_fibration,
    control_probe,
    h0_fibration,
    incompleteness_probe,
    morse_smale_check,
    parallel_transport,
    quadric_model_fibration,
    quadric_monodromy,
    quadric_ode_plane_transport,
    trace_thimble,
    weinstein_fiber_report,
)
from .geometry import DomainError, PhasePoint
from .heegaard import (
    build_handle_diagram,
    double_check,
    euler_check,
    intersect_curves,
    standard_system,
)
from .ode import OdeConfig, flow
from .quadric import (
    AnnulusCoord,
    PlaneFrame,
    SharpConfig,
    annulus_twist,
    hsq_field_plane,
    psi_w,
    quadric_h,
    sharp_residuals,
    sharp_solution,
    sharp_system_check,
    surgery_compare,
    surgery_plane_frame,
    transport_plane_closed,
    vanishing_cycle_samples,
)
from .rearrange import blend, region_margins, search_constants, validate_slope
from .report import CheckRecord
from .scenarios import Scenario, build_scenario
from .system import check_adapted_gradient, upsilon


def check_rng(cfg: RunConfig, name: str):
    """Deterministic per-check generator, independent of execution order."""
    return np.random.default_rng([cfg.seed, zlib.crc32(name.encode())])


class Lab:
    """Lazily built pipeline for one scenario (shared across commands)."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.scenario: Scenario = build_scenario(cfg.scenario)
        self._cm = None
        self._scan = None
        self._constants = None
        self._al = None

    @property
    def ms(self):
        return self.scenario.ms

    @property
    def cm(self) -> ComplexificationMap:
        if self._cm is None:
            self._cm = ComplexificationMap(self.ms)
        return self._cm

    @property
    def scan(self):
        if self._scan is None:
            self._scan = scan_delta(
                self.cm, check_rng(self.cfg, "scan-delta"),
                n_interior=self.cfg.budget("scan.interior"),
                n_sphere=self.cfg.budget("scan.sphere"))
        return self._scan

    @property
    def constants(self):
        if self._constants is None:
            self._constants = search_constants(
                self.cm, self.scenario.slope, self.scan.delta,
                check_rng(self.cfg, "search-constants"),
                n_per_region=self.cfg.budget("region"))
        return self._constants

    @property
    def assembled(self):
        if self._al is None:
            self._al = blend(self.cm, self.scenario.slope, self.constants.cutoff)
        return self._al


def _rec(name, ok, margin=None, tol=None, detail="", t0=None):
    return CheckRecord(name=name, status="pass" if ok else "fail", margin=margin,
                       tolerance=tol, detail=detail,
                       runtime=(time.time() - t0) if t0 else 0.0)


def _skip(name, reason):
    return CheckRecord(name=name, status="skipped", detail=reason)


# ---------------------------------------------------------------------------
# lemma bundles
# ---------------------------------------------------------------------------


def cmd_verify_hnu(lab: Lab):
    """Fiber restriction of nu_tilde equals the negative transposed linearization."""
    cfg = lab.cfg
    ms = lab.ms
    if ms is None:
        return [_skip("hnu", "no Morse system in this scenario")], {}, {}
    from .system import hamiltonian_lift

    t0 = time.time()
    tol = cfg.tol("hnu.linearization")
    worst = 0.0
    h = 1e-6
    for k, c in enumerate(ms.crit):
        # L nu_a from finite differences of nu in the chart
        W0, _ = ms.to_chart(c.chart_id, c.location[None], np.zeros((1, ms.rep_dim)))
        L = np.zeros((ms.n, ms.n))
        for i in range(ms.n):
            e = np.zeros(ms.n)
            e[i] = h
            L[:, i] = (ms.nu_c(c.chart_id, W0 + e)[0] - ms.nu_c(c.chart_id, W0 - e)[0]) / (2 * h)
        # finite-difference linearization of nu_tilde restricted to the fiber
        A = np.zeros((ms.n, ms.n))
        for i in range(ms.n):
            e = np.zeros(ms.n)
            e[i] = h
            Qg, Pg_p = ms.crit_chart_to_global(k, np.zeros((1, ms.n)), e[None])
            _, Pg_m = ms.crit_chart_to_global(k, np.zeros((1, ms.n)), -e[None])
            _, _, pdot_p = hamiltonian_lift(PhasePoint(Qg[0], Pg_p[0]), ms)
            _, _, pdot_m = hamiltonian_lift(PhasePoint(Qg[0], Pg_m[0]), ms)
            A[:, i] = (pdot_p - pdot_m) / (2 * h)
        worst = max(worst, float(np.max(np.abs(A - (-L.T)))))
        # the singularity itself: nu_tilde vanishes at (a, 0)
        _, qdot, pdot = hamiltonian_lift(PhasePoint(c.location, np.zeros(ms.rep_dim)), ms)
        worst = max(worst, float(np.max(np.abs(qdot))), float(np.max(np.abs(pdot))))
    rec = _rec("hnu.fiber-linearization", worst < tol, margin=worst, tol=tol,
               detail="max entrywise |D(nu_tilde|fiber) + Lnu^T|", t0=t0)
    return [rec], {}, {}


def cmd_verify_cnu(lab: Lab):
    """C_a^+- are the zeros of nu_bar; tangency and upsilon values."""
    cfg = lab.cfg
    ms = lab.ms
    recs = []
    rng = check_rng(cfg, "cnu")
    t0 = time.time()
    from .system import contact_lift, nu_bar_batch

    # zeros on the critical spheres, upsilon = +-2 there
    worst_zero = 0.0
    worst_ups = 0.0
    any_sphere = False
    for k, c in enumerate(ms.crit):
        for sign in (+1, -1):
            pts = c_sphere_samples(ms, k, sign, 0.37, 16, rng)
            for x in pts:
                any_sphere = True
                _, qdot, pdot = contact_lift(x, ms)
                worst_zero = max(worst_zero, float(np.linalg.norm(qdot) + np.linalg.norm(pdot)))
                worst_ups = max(worst_ups, abs(upsilon(x, ms) - 2.0 * sign))
    if any_sphere:
        recs.append(_rec("cnu.sphere-zeros", worst_zero < 1e-10, margin=worst_zero,
                         tol=1e-10, detail="|nu_bar| on C_a^+-", t0=t0))
        recs.append(_rec("cnu.upsilon-values", worst_ups < cfg.tol("upsilon.sphere_value"),
                         margin=worst_ups, tol=cfg.tol("upsilon.sphere_value"),
                         detail="|upsilon -+ 2| on C_a^+-"))
    else:
        recs.append(_skip("cnu.sphere-zeros", "no nonempty critical spheres"))

    # tangency d rho(nu_bar) = 0 on random tube samples
    t0 = time.time()
    Q, cids, W, PW = sample_tube(ms, rng, 2000, r_max=1.0, r_min=0.05)
    worst = 0.0
    for cid in np.unique(cids):
        sel = cids == cid
        qdot, pdot = nu_bar_batch(ms, cid, W[sel], PW[sel])
        dw, dp = ms.drho_c(cid, W[sel], PW[sel])
        vals = np.einsum("ni,ni->n", dw, qdot) + np.einsum("ni,ni->n", dp, pdot)
        worst = max(worst, float(np.max(np.abs(vals))))
    recs.append(_rec("cnu.rho-tangency", worst < 1e-9, margin=worst, tol=1e-9,
                     detail="max |d rho(nu_bar)| over tube samples", t0=t0))

    # nu_bar . upsilon >= 0 on critical fibers, zero exactly on the spheres
    t0 = time.time()
    floor = -cfg.tol("upsilon.derivative_floor")
    res_tol = cfg.tol("upsilon.zero_residual")
    worst_floor = np.inf
    worst_res = 0.0
    nfib = cfg.budget("fiber_samples")
    for k, c in enumerate(ms.crit):
        dirs = rng.standard_normal((nfib // len(ms.crit), ms.n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        for d in dirs:
            Qg, Pg = ms.crit_chart_to_global(k, np.zeros((1, ms.n)), d[None])
            worst_floor = min(worst_floor, nu_bar_dot_upsilon(PhasePoint(Qg[0], Pg[0]), ms))
        for sign in (+1, -1):
            for x in c_sphere_samples(ms, k, sign, 1.0, 8, rng):
                worst_res = max(worst_res, abs(nu_bar_dot_upsilon(x, ms)))
    recs.append(_rec("cnu.upsilon-derivative-floor", worst_floor > floor,
                     margin=worst_floor, tol=floor,
                     detail="min nu_bar.upsilon over fiber samples", t0=t0))
    recs.append(_rec("cnu.upsilon-derivative-zeros", worst_res < res_tol,
                     margin=worst_res, tol=res_tol,
                     detail="|nu_bar.upsilon| on C_a^+-"))
    return recs, {}, {}


def cmd_verify_h0(lab: Lab):
    cfg = lab.cfg
    ms = lab.ms
    cm = lab.cm
    recs = []
    rng = check_rng(cfg, "h0")

    t0 = time.time()
    CutoffSpec(ms).validate(rng)
    rep = verify_h0_critical(cm, radius=0.4, seeds=120, rng=rng)
    recs.append(_rec("h0.critical-points", rep.matched and not rep.extra,
                     margin=rep.max_match_distance, tol=1e-5,
                     detail=f"{len(rep.found)} roots, Hessian err {rep.hessian_error:.1e}",
                     t0=t0))
    recs.append(_rec("h0.chart-hessian", rep.hessian_error < cfg.tol("h0.chart_identity"),
                     margin=rep.hessian_error, tol=cfg.tol("h0.chart_identity"),
                     detail="h0 = phi(a) + sum eps z^2 in chart balls"))

    # (nu_tilde . f0) = 4 sum |z|^2 inside chart balls
    t0 = time.time()
    tol = cfg.tol("h0.chart_identity")
    worst = 0.0
    for k, c in enumerate(ms.crit):
        r = 0.55 * c.ball_radius
        w = rng.uniform(-r, r, size=(100, ms.n))
        pw = rng.uniform(-r, r, size=(100, ms.n))
        Qg, Pg = ms.crit_chart_to_global(k, w, pw)
        W, PW = ms.to_chart(c.chart_id, Qg, Pg)
        vals = cm.nu_tilde_f0_batch(c.chart_id, W, PW)
        model = 4.0 * (np.einsum("nj,nj->n", w, w) + np.einsum("nj,nj->n", pw, pw))
        worst = max(worst, float(np.max(np.abs(vals - model))))
    recs.append(_rec("h0.lyapunov-identity", worst < tol, margin=worst, tol=tol,
                     detail="(nu_tilde.f0) = 4 sum |z_j|^2 in chart balls", t0=t0))

    # critical values of f_r^0: formula phi(a) +- r^2 vs direct evaluation
    t0 = time.time()
    tol_v = cfg.tol("h0.critical_values")
    worst_f = 0.0
    worst_d = 0.0
    for r in (0.5 * min(c.ball_radius for c in ms.crit), 0.2):
        for rec_v in critical_values_f0r(ms, r):
            if rec_v.sphere_dim < 0:
                continue
            pts = c_sphere_samples(ms, rec_v.crit_index, rec_v.sign, r, 8, rng)
            direct = [cm.f0(x) for x in pts]
            worst_d = max(worst_d, max(abs(d - rec_v.value) for d in direct))
            c = ms.crit[rec_v.crit_index]
            worst_f = max(worst_f, abs(rec_v.value - (c.value + rec_v.sign * r * r)))
    recs.append(_rec("h0.critical-values", max(worst_f, worst_d) < tol_v,
                     margin=max(worst_f, worst_d), tol=tol_v,
                     detail="f_r^0(C_a^+-) = phi(a) +- r^2 (= phi(a) +- 2 rho)", t0=t0))

    # delta scan
    t0 = time.time()
    ds = lab.scan
    recs.append(_rec("h0.delta-scan", ds.delta > 0 and ds.min_margin_interior > 0,
                     margin=ds.min_margin_interior, tol=0.0,
                     detail=str(ds), t0=t0))
    return recs, {}, {}


def cmd_verify_slope(lab: Lab):
    cfg = lab.cfg
    t0 = time.time()
    if lab.scenario.slope is None:
        return [_skip("slope.validation", "scenario has no slope candidate")], {}, {}
    rep = validate_slope(lab.scenario.slope, lab.ms, check_rng(cfg, "slope"),
                         n_samples=cfg.budget("slope_samples"))
    rec = _rec("slope.validation", rep.passed, margin=rep.lyapunov_margin, tol=0.0,
               detail=str(rep), t0=t0)
    return [rec], {}, {}


def cmd_verify_pf(lab: Lab):
    cfg = lab.cfg
    ms = lab.ms
    recs = []
    rng = check_rng(cfg, "pf")

    t0 = time.time()
    try:
        cr = lab.constants
    except DomainError as e:
        return [_rec("pf.search-constants", False, detail=str(e), t0=t0)], {}, {}
    al = lab.assembled
    worst_region = min(cr.margins.values())
    recs.append(_rec("pf.search-constants", worst_region > 0, margin=worst_region,
                     tol=0.0, detail=str(cr), t0=t0))

    # cutoff invariants (incl. disjoint derivative supports)
    t0 = time.time()
    checks = cr.cutoff.validate()
    recs.append(_rec("pf.cutoff-invariants", True, margin=max(checks.values()),
                     tol=1e-12, detail="profile plateaus, slopes, disjoint supports",
                     t0=t0))

    # evenness/oddness and homogeneity
    t0 = time.time()
    Q, cids, W, PW = sample_tube(ms, rng, cfg.budget("fiber_samples"),
                                 r_max=3 * cr.cutoff.delta, r_min=1e-3)
    even = odd = hom = spread = 0.0
    for cid in np.unique(cids):
        sel = cids == cid
        f1 = al.f_batch(cid, W[sel], PW[sel])
        even = max(even, float(np.max(np.abs(al.f_batch(cid, W[sel], -PW[sel]) - f1))))
        g1 = lab.cm.g_batch(cid, W[sel], PW[sel])
        odd = max(odd, float(np.max(np.abs(lab.cm.g_batch(cid, W[sel], -PW[sel]) + g1))))
    recs.append(_rec("pf.antipodal-symmetry", max(even, odd) < 1e-13,
                     margin=max(even, odd), tol=1e-13,
                     detail="f even and g odd in p", t0=t0))

    t0 = time.time()
    Q, cids, W, PW = sample_tube(ms, rng, 4000, r_max=2 * cr.cutoff.delta,
                                 r_min=cr.cutoff.delta)
    for cid in np.unique(cids):
        sel = cids == cid
        f1 = al.f_batch(cid, W[sel], PW[sel])
        for tfac in (1.5, 2.0, 4.0):
            ft = al.f_batch(cid, W[sel], tfac * PW[sel])
            hom = max(hom, float(np.max(np.abs(ft - tfac * f1))))
        r = np.sqrt(2.0 * ms.rho_c(cid, W[sel], PW[sel]))
        d = cr.cutoff.delta
        spread = max(spread, float(np.max(np.abs(
            al.f_batch(cid, W[sel], (2.6 * d / r)[:, None] * PW[sel]) / (2.6 * d) -
            al.f_batch(cid, W[sel], (1.2 * d / r)[:, None] * PW[sel]) / (1.2 * d)))))
    tol_h = cfg.tol("pf.homogeneity")
    recs.append(_rec("pf.homogeneity", hom < tol_h, margin=hom, tol=tol_h,
                     detail="|f(tp) - t f(p)| for r >= delta", t0=t0))
    recs.append(_rec("pf.far-field-normalization", spread < tol_h, margin=spread,
                     tol=tol_h, detail="f_r/r independent of r beyond delta"))

    # +-d_r f_r > 0 on the critical spheres
    t0 = time.time()
    worst = np.inf
    hr = 1e-6
    for k, c in enumerate(ms.crit):
        for sign in (+1, -1):
            ind = int(np.sum(c.signature < 0))
            dim = (ind - 1) if sign > 0 else (ms.n - ind - 1)
            if dim < 0:
                continue
            for r in (0.3 * cr.cutoff.delta, 0.8 * cr.cutoff.delta, 1.5 * cr.cutoff.delta):
                d = (al.f_on_c_sphere(k, sign, r + hr) -
                     al.f_on_c_sphere(k, sign, r - hr)) / (2 * hr)
                worst = min(worst, sign * d)
    recs.append(_rec("pf.radial-monotonicity", worst > 0, margin=worst, tol=0.0,
                     detail="+-d_r f_r(C_a^+-) > 0", t0=t0))

    # assembly spot checks: df(nu_tilde) > 0, symplectic fibers, critical values
    t0 = time.time()
    Q, cids, W, PW = sample_tube(ms, rng, cfg.budget("region"),
                                 r_max=3 * cr.cutoff.delta, r_min=1e-4)
    from .complexify import _away_from_crit
    keep = _away_from_crit(ms, Q, 1e-3 * cr.cutoff.delta)
    worst = np.inf
    for cid in np.unique(cids):
        sel = (cids == cid) & keep
        if np.any(sel):
            worst = min(worst, float(np.min(al.nu_tilde_f_batch(cid, W[sel], PW[sel]))))
    recs.append(_rec("pf.lyapunov-positivity", worst > 0, margin=worst, tol=0.0,
                     detail=f"df(nu_tilde) over {int(keep.sum())} samples", t0=t0))

    t0 = time.time()
    sym_ok = True
    worst_sym = np.inf
    from .fibration import fiber_tangent_frame, _omega_tstar
    for cid in np.unique(cids):
        fib = assembled_fibration(al, cid=cid)
        sel = np.nonzero((cids == cid) & keep)[0][:50]
        for i in sel:
            y = np.concatenate([W[i], PW[i]])
            try:
                basis = fiber_tangent_frame(fib.dfg(y))
            except DomainError:
                sym_ok = False
                continue
            if len(basis) == 2:
                worst_sym = min(worst_sym, abs(_omega_tstar(basis[0], basis[1], ms.n)))
    recs.append(_rec("pf.symplectic-fibers", sym_ok and worst_sym > 1e-6,
                     margin=worst_sym, tol=1e-6,
                     detail="|omega| on normalized ker dh frames", t0=t0))

    worst = 0.0
    for c in ms.crit:
        W0, _ = ms.to_chart(c.chart_id, c.location[None], np.zeros((1, ms.rep_dim)))
        dq, dp = al.df_batch(c.chart_id, W0, np.zeros((1, ms.n)))
        gq, gp = lab.cm.dg_batch(c.chart_id, W0, np.zeros((1, ms.n)))
        worst = max(worst, float(np.max(np.abs([dq, dp, gq, gp]))))
    recs.append(_rec("pf.critical-values", worst < 1e-10, margin=worst, tol=1e-10,
                     detail="dh = 0 exactly on Gamma_phi"))
    return recs, {}, {}


def cmd_surgery(lab: Lab):
    cfg = lab.cfg
    sc = lab.scenario
    if sc.kind != "quadric":
        return [_skip("surgery.compare", "surgery lemma runs on quadric scenarios")], {}, {}
    ms = lab.ms
    k = int(np.sum(ms.eps < 0))
    n = ms.n
    if not 1 <= k <= n - 1:
        return [_skip("surgery.compare",
                      f"plane splitting needs 1 <= k <= n-1 (k={k})")], {}, {}
    rng = check_rng(cfg, "surgery")
    u = 0.8
    rvals = np.linspace(0.2, 5.0, 25)
    t0 = time.time()
    worst_closed = 0.0
    worst_ode = 0.0
    worst_cross = 0.0
    odecfg = OdeConfig(abs_tol=1e-12, rel_tol=1e-11)
    tables = {}
    rows = []
    for trial in range(10):
        frame = surgery_plane_frame(k, n, rng)
        rep_c = surgery_compare(k, u, frame, rvals)
        transport = quadric_ode_plane_transport(n, frame, odecfg, w0=-u)
        rep_o = surgery_compare(k, u, frame, np.linspace(0.2, 5.0, 9),
                                transport=transport, refine_crossing=False)
        worst_closed = max(worst_closed, rep_c.max_deviation)
        worst_ode = max(worst_ode, rep_o.max_deviation)
        if rep_c.crossing_radius is not None:
            worst_cross = max(worst_cross, abs(rep_c.crossing_radius - 1.0))
        if trial == 0:
            rows = [(float(r), float(m), float(t)) for r, m, t in
                    zip(rep_c.r_values, rep_c.theta_measured, rep_c.theta_template)]
            tables["surgery_curve"] = (("r", "theta_measured", "theta_template"), rows)
    recs = [
        _rec("surgery.closed-form", worst_closed < cfg.tol("surgery.deviation.closed"),
             margin=worst_closed, tol=cfg.tol("surgery.deviation.closed"),
             detail="template deviation, closed-form transport", t0=t0),
        _rec("surgery.ode", worst_ode < cfg.tol("surgery.deviation.ode"),
             margin=worst_ode, tol=cfg.tol("surgery.deviation.ode"),
             detail="template deviation, ODE transport, 10 random planes"),
        _rec("surgery.crossing-radius", worst_cross < 1e-6, margin=worst_cross,
             tol=1e-6, detail="image crosses Z_u where 1 + r^4 = 2"),
    ]
    return recs, tables, {}


def cmd_sharp(lab: Lab):
    cfg = lab.cfg
    rng = check_rng(cfg, "sharp")
    recs = []
    t0 = time.time()
    c1 = SharpConfig(delta=1.0, c=1.0)
    worst = 0.0
    worst_res = 0.0
    for n, k in ((2, 1), (3, 1), (3, 2), (4, 2)):
        for _ in range(8):
            xp = rng.standard_normal(k)
            yp = rng.standard_normal(n - k)
            z = sharp_solution(c1, k, n, xp, yp, sign=1.0)
            z *= 1.4 / np.linalg.norm(z)          # inside the shell E
            rep = sharp_system_check(c1, k, n, z)
            worst = max(worst, abs(rep.im_h - rep.im_h_model))
            worst_res = max(worst_res, rep.residuals["max"])
    model_22 = abs(2 * np.sqrt(2) / 3 - 2 * np.sqrt((1 + 1.0) / 1.0) / (1 + 2.0))
    recs.append(_rec("sharp.solution-imh", max(worst, worst_res, model_22) < cfg.tol("sharp.im_h"),
                     margin=max(worst, worst_res), tol=cfg.tol("sharp.im_h"),
                     detail="im h = 2 sqrt2/3 |z|^2 on constructed solutions (c=1)",
                     t0=t0))
    t0 = time.time()
    floor = cfg.tol("sharp.nonsolution_floor")
    worst_low = np.inf
    for _ in range(200):
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        z *= 1.4 / np.linalg.norm(z)
        r = sharp_residuals(c1, 1, z)["max"]
        worst_low = min(worst_low, r)
    recs.append(_rec("sharp.nonsolution-residuals", worst_low > floor,
                     margin=worst_low, tol=floor,
                     detail="random shell points violate the system", t0=t0))
    t0 = time.time()
    margin_default = SharpConfig().pseudoconvexity_margin()
    recs.append(_rec("sharp.pseudoconvexity", margin_default > 0,
                     margin=margin_default, tol=0.0,
                     detail=f"Levi margin at default c={SharpConfig().c}", t0=t0))
    return recs, {}, {}


def cmd_pw(lab: Lab):
    cfg = lab.cfg
    ms = lab.ms
    recs = []
    rng = check_rng(cfg, "pw")
    vals = sorted(c.value for c in ms.crit)
    umid = 0.5 * (vals[0] + vals[-1]) + 0.17 * (vals[-1] - vals[0]) / len(vals)
    while any(abs(umid - v) < 1e-3 for v in vals):
        umid += 1e-2
    t0 = time.time()
    al = lab.assembled
    rep = weinstein_fiber_report(al, umid, rng, n_slice=cfg.budget("slice_samples"))
    ok_counts = all(
        (r.sign > 0) == (ms.crit[r.crit_index].value < umid) for r in rep.records
    ) and len(rep.records) == len(ms.crit)
    worst_root = max((r.root_residual for r in rep.records if r.root_residual is not None),
                     default=0.0)
    worst_grad = max((r.gradient_residual for r in rep.records
                      if r.gradient_residual is not None), default=0.0)
    recs.append(_rec("pw.mid-range-records", ok_counts, margin=worst_root,
                     tol=cfg.tol("pw.root_residual"), detail=str(rep), t0=t0))
    recs.append(_rec("pw.contact-slice", rep.contact_slice_min > 0,
                     margin=rep.contact_slice_min, tol=0.0,
                     detail=f"d rho(fiber-Liouville) over {rep.contact_slice_samples} samples"))
    recs.append(_rec("pw.q-u-minimum", rep.q_u_is_minimum, detail="rho > 0 off the zero section"))

    t0 = time.time()
    worst_root = worst_grad = 0.0
    n_located = 0
    span = max(vals[-1] - vals[0], 1.0)
    for u in (vals[-1] + span, vals[0] - span):
        rep = weinstein_fiber_report(al, u, rng, n_slice=40)
        for r in rep.records:
            ok_sign = (r.sign > 0) == (ms.crit[r.crit_index].value < u)
            ok_counts = ok_counts and ok_sign
            if r.radius is not None:
                n_located += 1
                worst_root = max(worst_root, r.root_residual)
                worst_grad = max(worst_grad, r.gradient_residual)
    recs.append(_rec("pw.located-spheres",
                     ok_counts and n_located >= 2
                     and worst_root < cfg.tol("pw.root_residual")
                     and worst_grad < cfg.tol("pw.gradient_residual"),
                     margin=max(worst_root, worst_grad),
                     tol=cfg.tol("pw.gradient_residual"),
                     detail=f"{n_located} nonempty spheres located at u = 2 min/max phi",
                     t0=t0))
    return recs, {}, {}


# ---------------------------------------------------------------------------
# transport-family commands
# ---------------------------------------------------------------------------


def cmd_transport(lab: Lab):
    cfg = lab.cfg
    sc = lab.scenario
    recs = []
    tables = {}
    rng = check_rng(cfg, "transport")
    if sc.kind == "quadric":
        # closed form vs the |h|^2-flow oracle
        t0 = time.time()
        odecfg = OdeConfig(abs_tol=1e-13, rel_tol=1e-12)
        worst = 0.0
        for _ in range(100):
            z1 = complex(*rng.standard_normal(2))
            z2 = complex(*rng.standard_normal(2))
            alpha = rng.uniform(0.0, 2.0 * np.pi)
            c1, c2 = transport_plane_closed(z1, z2, alpha)
            tgt = alpha / (2.0 * (abs(z1) ** 2 + abs(z2) ** 2))
            y0 = np.array([z1.real, z1.imag, z2.real, z2.imag])
            res = flow(lambda t, y: hsq_field_plane(y), y0, tgt, odecfg)
            o1, o2 = complex(res.final[0], res.final[1]), complex(res.final[2], res.final[3])
            worst = max(worst, abs(c1 - o1), abs(c2 - o2))
        recs.append(_rec("transport.oracle-equivalence",
                         worst < cfg.tol("transport.oracle"), margin=worst,
                         tol=cfg.tol("transport.oracle"),
                         detail="closed-form tau vs |h|^2-flow, 100 random inputs",
                         t0=t0))

        # identity on constant paths; fiber tracking on a circle
        t0 = time.time()
        n = lab.ms.n
        fib = quadric_model_fibration(n)
        frame = PlaneFrame(np.eye(n)[0], np.eye(n)[1])
        z1, z2 = psi_w(1.0, 1.3, 0.5)
        z = frame.point_from_special(z1, z2)
        y0 = np.concatenate([z.real, z.imag])
        res = parallel_transport(fib, y0, BasePath.segment(1.0, 1.0),
                                 OdeConfig(abs_tol=1e-15, rel_tol=1e-13))
        disp = float(np.linalg.norm(res.final - y0))
        recs.append(_rec("transport.constant-path", disp < 1e-12, margin=disp,
                         tol=1e-12, detail="identity on a constant path", t0=t0))

        t0 = time.time()
        res = parallel_transport(fib, y0, BasePath.arc(0.0, 1.0, 0.0, 2 * np.pi),
                                 OdeConfig(abs_tol=1e-12, rel_tol=1e-11), n_samples=65)
        recs.append(_rec("transport.fiber-tracking",
                         res.fiber_error < cfg.tol("transport.fiber_error"),
                         margin=res.fiber_error, tol=cfg.tol("transport.fiber_error"),
                         detail=f"completeness ratio {res.completeness_ratio:.2f}",
                         t0=t0))
        rows = [(float(t), float(y[0]), float(y[n]),
                 float(np.linalg.norm(y[n:])), float(abs(fib.h(y) - np.exp(2j * np.pi * t))))
                for t, y in res.path]
        tables["transport_trace"] = (("t", "x1", "y1", "p_norm", "fiber_error"), rows)

        # action of a fiber loop is preserved (exact symplectomorphisms)
        t0 = time.time()
        loop = []
        for th in np.linspace(0, 2 * np.pi, 33):
            z1, z2 = psi_w(1.0, 1.2, th)
            zz = frame.point_from_special(z1, z2)
            loop.append(np.concatenate([zz.real, zz.imag]))
        act0 = _loop_action(loop, n)
        moved = []
        for y0 in loop:
            res = parallel_transport(fib, y0, BasePath.arc(0.0, 1.0, 0.0, np.pi),
                                     OdeConfig(abs_tol=1e-12, rel_tol=1e-11))
            moved.append(res.final)
        act1 = _loop_action(moved, n)
        err = abs(act0 - act1)
        recs.append(_rec("transport.action-preservation", err < 1e-5, margin=err,
                         tol=1e-5, detail=f"loop action {act0:.6f} -> {act1:.6f}",
                         t0=t0))

        # small null-homotopic loop based at the fiber of y0: the holonomy
        # displacement scales with the enclosed area (the connection is
        # genuinely curved away from the critical value, so "flat" holds
        # only in the shrinking-loop limit)
        t0 = time.time()
        rad = 2e-3
        path = BasePath.arc(1.0 + rad, rad, np.pi, 3.0 * np.pi)
        res = parallel_transport(fib, y0, path, OdeConfig(abs_tol=1e-13, rel_tol=1e-12))
        disp = float(np.linalg.norm(res.final - y0))
        recs.append(_rec("transport.nullhomotopic-return", disp < 1e-5, margin=disp,
                         tol=1e-5, detail="small loop not enclosing the critical value",
                         t0=t0))
    else:
        # representative h^0 transport on a curved scenario
        t0 = time.time()
        ms = lab.ms
        cm = lab.cm
        c = ms.crit[0]
        fib = h0_fibration(cm, cid=c.chart_id)
        w = 0.3 * np.ones(ms.n) / np.sqrt(ms.n)
        pw = 0.1 * np.ones(ms.n) * np.array([1.0] + [-0.5] * (ms.n - 1))
        Qg, Pg = ms.crit_chart_to_global(0, w[None], pw[None])
        W0, PW0 = ms.to_chart(c.chart_id, Qg, Pg)
        y0 = np.concatenate([W0[0], PW0[0]])
        u = fib.fg(y0)[0]
        res = parallel_transport(fib, y0, BasePath.segment(u, u + 0.1),
                                 OdeConfig(abs_tol=1e-12, rel_tol=1e-11))
        recs.append(_rec("transport.fiber-tracking",
                         res.fiber_error < cfg.tol("transport.fiber_error"),
                         margin=res.fiber_error, tol=cfg.tol("transport.fiber_error"),
                         detail=f"h0 transport, completeness ratio {res.completeness_ratio:.2f}",
                         t0=t0))
    return recs, tables, {}


def _loop_action(points, n):
    """Discrete integral of lambda = (1/2) sum (x dy - y dx) around a loop."""
    act = 0.0
    pts = list(points) + [points[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        xm = 0.5 * (a[:n] + b[:n])
        ym = 0.5 * (a[n:] + b[n:])
        act += 0.5 * float(xm @ (b[n:] - a[n:]) - ym @ (b[:n] - a[:n]))
    return act


def cmd_monodromy(lab: Lab):
    cfg = lab.cfg
    if lab.scenario.kind != "quadric":
        return [_skip("monodromy.dehn-twist", "monodromy runs on quadric scenarios")], {}, {}
    n = lab.ms.n
    rng = check_rng(cfg, "monodromy")
    t0 = time.time()
    if n == 2:
        frame = PlaneFrame(np.eye(2)[0], np.eye(2)[1])
    else:
        from .util import random_orthogonal
        A = random_orthogonal(rng, n)
        frame = PlaneFrame(A[:, 0], A[:, 1])
    rvals = np.linspace(0.2, 4.0, 21)
    rep = quadric_monodromy(n, 1.0, rvals, frame,
                            OdeConfig(abs_tol=1e-12, rel_tol=1e-11))
    tol = cfg.tol("monodromy.deviation")
    recs = [
        _rec("monodromy.dehn-twist", rep.max_deviation < tol,
             margin=rep.max_deviation, tol=tol,
             detail=f"r-grid [0.2, 4], fiber error {rep.max_fiber_error:.1e}", t0=t0),
        _rec("monodromy.monotone", bool(np.all(np.diff(rep.twist_measured) < 0)),
             detail="twist decreasing in r"),
    ]
    t0 = time.time()
    rep8 = quadric_monodromy(n, 1.0, [8.0], frame,
                             OdeConfig(abs_tol=1e-12, rel_tol=1e-11))
    recs.append(_rec("monodromy.large-radius", abs(rep8.twist_measured[0]) < 1e-2,
                     margin=float(abs(rep8.twist_measured[0])), tol=1e-2,
                     detail="net twist at r = 8", t0=t0))
    tables = {"monodromy": (("r", "twist_measured", "twist_model"), rep.rows())}
    curve_m = np.stack([rep.r_values, rep.twist_measured], axis=1)
    curve_t = np.stack([rep.r_values, rep.twist_model], axis=1)
    svgs = {"monodromy": [("measured", "#b13", curve_m), ("model", "#36b", curve_t)]}
    return recs, tables, svgs


def cmd_thimble(lab: Lab):
    cfg = lab.cfg
    sc = lab.scenario
    rng = check_rng(cfg, "thimble")
    recs = []
    if sc.kind == "quadric":
        t0 = time.time()
        n = lab.ms.n
        fib = quadric_model_fibration(n)
        seeds = []
        for z in vanishing_cycle_samples(1.0, n, 12, rng):
            seeds.append(np.concatenate([z.real, z.imag]))
        tr = trace_thimble(fib, seeds, 1.0, 0.0, stop_fraction=0.02,
                           cfg=OdeConfig(abs_tol=1e-12, rel_tol=1e-11),
                           crit_location=np.zeros(2 * n))
        worst = max(float(np.max(np.abs(states[:, n:]))) for states in tr.traces)
        tol = cfg.tol("thimble.imag")
        recs.append(_rec("thimble.real-ball", worst < tol, margin=worst, tol=tol,
                         detail="|Im z| along the traced thimble over [0, 1]", t0=t0))
        mono = bool(np.all(np.diff(tr.parameters) < 0))
        recs.append(_rec("thimble.monotone-parameters", mono,
                         detail="parameters strictly monotone toward the critical value"))
    elif sc.kind == "torus":
        t0 = time.time()
        ms = lab.ms
        cm = lab.cm
        # index-1 point: trace toward phi(a) from below; E^-(a) is a coordinate circle
        k = next(i for i, c in enumerate(ms.crit) if int(np.sum(c.signature < 0)) == 1)
        c = ms.crit[k]
        stable_axis = int(np.argmax(c.signature < 0))
        u0 = c.value - 0.04
        fib = h0_fibration(cm, cid=0)
        seeds = []
        for th in np.linspace(0, 2 * np.pi, 9)[:-1]:
            s = np.zeros(ms.n)
            pw = np.zeros(ms.n)
            s[stable_axis] = 0.2 * np.cos(th)
            pw[(stable_axis + 1) % 2] = 0.2 * np.sin(th)
            if abs(np.sin(th)) < 1e-9 and abs(np.cos(th)) < 1e-9:
                continue
            Qg, Pg = ms.crit_chart_to_global(k, s[None], pw[None])
            y = np.concatenate([ms.reduce_q(Qg[0]), Pg[0]])
            val = fib.fg(y)[0]
            # normalize the seed onto the fiber u0 by radial scaling in (s, pw)
            lam = np.sqrt(abs((u0 - c.value) / (val - c.value)))
            s, pw = lam * s, lam * pw
            Qg, Pg = ms.crit_chart_to_global(k, s[None], pw[None])
            seeds.append(np.concatenate([ms.reduce_q(Qg[0]), Pg[0]]))
        tr = trace_thimble(fib, seeds, u0, c.value, stop_fraction=0.05,
                           cfg=OdeConfig(abs_tol=1e-12, rel_tol=1e-11),
                           crit_location=c.location)
        # pairing residual of traced covectors against T E^-(a)
        tangent = np.zeros(ms.n)
        tangent[stable_axis] = 1.0
        worst = 0.0
        for states in tr.traces:
            for y in states:
                p = y[ms.n:]
                nrm = np.linalg.norm(p)
                if nrm > 1e-10:
                    worst = max(worst, abs(p @ tangent) / nrm)
        tol = cfg.tol("thimble.pairing")
        recs.append(_rec("thimble.conormal-pairing", worst < tol, margin=worst,
                         tol=tol, detail="<p, T E^-(a)> residual on traced samples",
                         t0=t0))
    else:
        # sphere: the thimble of the minimum from below is the cotangent fiber
        t0 = time.time()
        ms = lab.ms
        cm = lab.cm
        k = 0
        c = ms.crit[k]
        r0 = 0.25
        u0 = c.value - r0 ** 2
        fib = h0_fibration(cm, cid=c.chart_id)
        seeds = []
        for th in np.linspace(0, 2 * np.pi, 9)[:-1]:
            pw = r0 * np.array([np.cos(th), np.sin(th)])
            seeds.append(np.concatenate([np.zeros(ms.n), pw]))
        tr = trace_thimble(fib, seeds, u0, c.value, stop_fraction=0.05,
                           cfg=OdeConfig(abs_tol=1e-12, rel_tol=1e-11))
        worst = max(float(np.max(np.linalg.norm(states[:, :ms.n], axis=1)))
                    for states in tr.traces)
        recs.append(_rec("thimble.cotangent-fiber", worst < 1e-4, margin=worst,
                         tol=1e-4, detail="base distance to the minimum along the trace",
                         t0=t0))
    return recs, {}, {}


def cmd_morse_smale(lab: Lab):
    cfg = lab.cfg
    sc = lab.scenario
    if sc.kind != "torus":
        t0 = time.time()
        rep = check_adapted_gradient(lab.ms, check_rng(cfg, "ms"))
        return [_rec("ms.no-saddles", rep.passed,
                     margin=rep.min_margin, tol=0.0,
                     detail="no saddle pairs; adaptedness certified", t0=t0)], {}, {}
    t0 = time.time()
    rep = morse_smale_check(lab.ms)
    angle_tol = cfg.tol("ms.connection_angle")
    detected = [c for c in rep.connections if c.angle < angle_tol]
    rec = _rec("ms.morse-smale-condition", rep.passed and not detected,
               margin=rep.conormal_margin, tol=0.0, detail=str(rep), t0=t0)
    return [rec], {}, {}


def cmd_probe(lab: Lab):
    cfg = lab.cfg
    sc = lab.scenario
    if sc.kind != "torus" or sc.probe_pair is None:
        return [_skip("probe.incompleteness", "probe runs on torus scenarios")], {}, {}
    t0 = time.time()
    if sc.name == "torus-upright":
        rep = incompleteness_probe(lab.cm, *sc.probe_pair)
        floor = cfg.tol("probe.blowup_min")
        rec = _rec("probe.blow-up", rep.blow_up_factor > floor,
                   margin=rep.blow_up_factor, tol=floor, detail=str(rep), t0=t0)
    else:
        rep = control_probe(lab.cm, q0=[1.6, 0.4], p_dir=[0.6, 0.8], span=1.75)
        cap = cfg.tol("probe.control_max")
        rec = _rec("probe.control", rep.blow_up_factor < cap and
                   rep.parameter_reached > 0.999,
                   margin=rep.blow_up_factor, tol=cap, detail=str(rep), t0=t0)
    return [rec], {}, {}


def cmd_heegaard(lab: Lab):
    cfg = lab.cfg
    sc = lab.scenario
    if sc.kind != "heegaard":
        return [_skip("heegaard.export", "not a heegaard scenario")], {}, {}
    t0 = time.time()
    g = sc.genus
    sysg = standard_system(g)
    inter = intersect_curves(sysg)
    diagram = build_handle_diagram(sysg)
    euler = euler_check(diagram)
    ok = euler.passed and (len(sysg.alphas) == 0 or
                           np.array_equal(inter.counts, np.eye(g, dtype=int)))
    recs = [
        _rec("heegaard.intersections", ok, margin=float(np.sum(inter.counts)),
             detail=f"counts {inter.counts.tolist()}", t0=t0),
        _rec("heegaard.euler", euler.passed,
             margin=float(euler.chi_TM_consistency), tol=0.0, detail=str(euler)),
        _rec("heegaard.handle-partition",
             sum(len(r.handles) for r in diagram.records) == diagram.handle_count(),
             detail="each handle appears in exactly one vanishing-cycle record"),
    ]
    rows = []
    for h in diagram.handles:
        rows.append((h.label, h.base_curve, h.side, h.framing))
    tables = {"handles": (("label", "base_curve", "side", "framing"), rows)}
    svgs = {}
    if g >= 1:
        sets = []
        palette = ["#b13", "#36b", "#183", "#a60", "#808", "#066"]
        for i, cset in enumerate(sysg.alphas + sysg.betas):
            pts = cset.points
            if sysg.model == "square":
                pts = np.vstack([pts, pts[:1] + (pts[-1] - pts[0])])
            sets.append((cset.label, palette[i % len(palette)], pts))
        svgs["heegaard_curves"] = sets
    return recs, tables, svgs


def cmd_double_check(lab: Lab):
    cfg = lab.cfg
    sc = lab.scenario
    if sc.kind not in ("sphere", "torus"):
        return [_skip("double.projection", "double-check needs a closed scenario")], {}, {}
    try:
        al = lab.assembled
    except DomainError as e:
        return [_skip("double.projection", f"no assembled fibration: {e}")], {}, {}
    t0 = time.time()
    u = 2.0 * max(c.value for c in lab.ms.crit)
    rep = double_check(al, u, check_rng(cfg, "double"),
                       n_rays=cfg.budget("double_rays"))
    tol = cfg.tol("double.g_over_p")
    ok = (rep.max_g_over_p < tol and rep.single_signed
          and rep.multi_root_rays == 0)
    rec = _rec("double.projection", ok, margin=rep.max_g_over_p, tol=tol,
               detail=str(rep), t0=t0)
    return [rec], {}, {}


def cmd_scan_delta(lab: Lab):
    t0 = time.time()
    ds = lab.scan
    rec = _rec("scan.delta", ds.delta > 0 and ds.min_margin_interior > 0,
               margin=ds.min_margin_interior, tol=0.0, detail=str(ds), t0=t0)
    return [rec], {}, {}


def cmd_adapted(lab: Lab):
    t0 = time.time()
    rep = check_adapted_gradient(lab.ms, check_rng(lab.cfg, "adapted"))
    rec = _rec("geometry.adapted-gradient", rep.passed, margin=rep.min_margin,
               tol=0.0, detail=str(rep), t0=t0)
    return [rec], {}, {}


LEMMA_COMMANDS = {
    "hnu": cmd_verify_hnu,
    "cnu": cmd_verify_cnu,
    "h0": cmd_verify_h0,
    "slope": cmd_verify_slope,
    "pf": cmd_verify_pf,
    "surgery": cmd_surgery,
    "sharp": cmd_sharp,
    "pw": cmd_pw,
}

TOP_COMMANDS = {
    "transport": cmd_transport,
    "monodromy": cmd_monodromy,
    "thimble": cmd_thimble,
    "morse-smale": cmd_morse_smale,
    "probe-incompleteness": cmd_probe,
    "heegaard-export": cmd_heegaard,
    "double-check": cmd_double_check,
    "scan-delta": cmd_scan_delta,
    "adapted-gradient": cmd_adapted,
}


def run_command(cfg: RunConfig):
    """Dispatch a command; returns (records, tables, svgs)."""
    lab = Lab(cfg)
    name = cfg.command
    if name.startswith("verify-lemma"):
        parts = name.split()
        if len(parts) != 2 or parts[1] not in LEMMA_COMMANDS:
            raise KeyError(f"unknown lemma: {name}")
        if lab.scenario.kind == "heegaard" and parts[1] != "sharp":
            return [_skip(f"{parts[1]}", "heegaard scenarios are combinatorial")], {}, {}
        return LEMMA_COMMANDS[parts[1]](lab)
    if name in TOP_COMMANDS:
        if lab.scenario.kind == "heegaard" and name not in ("heegaard-export",):
            return [_skip(name, "heegaard scenarios are combinatorial")], {}, {}
        return TOP_COMMANDS[name](lab)
    if name == "report-all":
        records, tables, svgs = [], {}, {}
        order = (["adapted-gradient"] if lab.scenario.kind != "heegaard" else []) + [
            "verify-lemma hnu", "verify-lemma cnu", "verify-lemma h0",
            "verify-lemma slope", "verify-lemma pf", "verify-lemma surgery",
            "verify-lemma sharp", "verify-lemma pw",
            "transport", "monodromy", "thimble", "morse-smale",
            "probe-incompleteness", "heegaard-export", "double-check",
        ]
        for sub in order:
            sub_cfg = RunConfig(command=sub, scenario=cfg.scenario, seed=cfg.seed,
                                out_dir=cfg.out_dir, tolerances=cfg.tolerances,
                                samples=cfg.samples)
            try:
                rs, ts, ss = run_command(sub_cfg)
            except DomainError as e:
                rs, ts, ss = [_skip(sub, f"not applicable: {e}")], {}, {}
            records += rs
            tables.update(ts)
            svgs.update(ss)
        return records, tables, svgs
    raise KeyError(f"unknown command: {name}")
