"""Symplectic connection of h = f + ig: lifts, transport, monodromy, thimbles.

The horizontal space at a regular point is the span of the Hamiltonian
fields X_f, X_g; the lift of a base velocity wdot solves the 2x2 system
dh(a X_f + b X_g) = wdot.  This characterization is independent of the sign
convention of the symplectic structure, but each fibration carries the
Hamiltonian convention of its coordinate system:

  * canonical cotangent charts (q, p): X_F = (dF/dp, -dF/dq);
  * the local-model C^n with z = x + iy:  X_F = (-dF/dy, dF/dx),
    anchored to the displayed rotation generator of |h|^2.

Transport integrates the lifted ODE with a fiber-projection feedback term
(the correction vanishes on the fiber, so the connection is unchanged) and
records the fiber-tracking error plus the completeness ratio
d rho(v) / (rho |dh(v)|).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .complexify import ComplexificationMap
from .geometry import DomainError, MorseSystem, PhasePoint
from .ode import COMPLETED, ESCAPED, FlowResult, OdeConfig, flow
from .system import flow_base


class NearCriticalError(DomainError):
    """Horizontal solve requested too close to a critical point."""


@dataclass
class FibrationMap:
    """A fibration h = f + ig over a fixed phase-coordinate system.

    State vectors y live in R^{2m}; fg/dfg evaluate the map and its two
    gradients; ham applies the coordinate system's symplectic structure to a
    gradient, returning the Hamiltonian field.
    """

    name: str
    dim: int
    fg: Callable                  # y -> (f, g)
    dfg: Callable                 # y -> (grad f, grad g)
    ham: Callable                 # grad -> Hamiltonian field
    crit_values: np.ndarray
    rho: Optional[Callable] = None
    drho: Optional[Callable] = None
    ms: Optional[MorseSystem] = None
    cid: int = 0

    def h(self, y) -> complex:
        f, g = self.fg(np.asarray(y, dtype=float))
        return complex(f, g)


def _ham_tstar(grad, n):
    return np.concatenate([grad[n:], -grad[:n]])


def _ham_cn(grad, n):
    return np.concatenate([-grad[n:], grad[:n]])


def quadric_model_fibration(n: int, offset: float = 0.0) -> FibrationMap:
    """The model h(z) = sum z_j^2 + offset on C^n, state y = (x, y)."""

    def fg(y):
        x, yy = y[:n], y[n:]
        return float(np.sum(x * x - yy * yy) + offset), float(2.0 * np.sum(x * yy))

    def dfg(y):
        x, yy = y[:n], y[n:]
        return (np.concatenate([2.0 * x, -2.0 * yy]),
                np.concatenate([2.0 * yy, 2.0 * x]))

    def rho(y):
        return 0.25 * float(np.sum(y * y))

    def drho(y):
        return 0.5 * np.asarray(y, dtype=float)

    return FibrationMap(
        name=f"quadric-model-n{n}", dim=2 * n, fg=fg, dfg=dfg,
        ham=lambda grad: _ham_cn(grad, n),
        crit_values=np.array([offset]), rho=rho, drho=drho,
    )


def h0_fibration(cm: ComplexificationMap, cid: int = 0) -> FibrationMap:
    """h^0 = f^0 + ig in a fixed working chart of the Morse system."""
    ms = cm.ms
    n = ms.n

    def fg(y):
        w, pw = y[None, :n], y[None, n:]
        return (float(cm.f0_batch(cid, w, pw)[0]), float(cm.g_batch(cid, w, pw)[0]))

    def dfg(y):
        w, pw = y[None, :n], y[None, n:]
        fq, fp = cm.df0_batch(cid, w, pw)
        gq, gp = cm.dg_batch(cid, w, pw)
        return (np.concatenate([fq[0], fp[0]]), np.concatenate([gq[0], gp[0]]))

    def rho(y):
        return float(ms.rho_c(cid, y[None, :n], y[None, n:])[0])

    def drho(y):
        dw, dp = ms.drho_c(cid, y[None, :n], y[None, n:])
        return np.concatenate([dw[0], dp[0]])

    return FibrationMap(
        name=f"{ms.name}-h0", dim=2 * n, fg=fg, dfg=dfg,
        ham=lambda grad: _ham_tstar(grad, n),
        crit_values=np.array([c.value for c in ms.crit]),
        rho=rho, drho=drho, ms=ms, cid=cid,
    )


def assembled_fibration(al, cid: int = 0) -> FibrationMap:
    """The full h = f + ig from an assembled Lyapunov function."""
    ms = al.ms
    n = ms.n
    cm = al.cm

    def fg(y):
        w, pw = y[None, :n], y[None, n:]
        return (float(al.f_batch(cid, w, pw)[0]), float(cm.g_batch(cid, w, pw)[0]))

    def dfg(y):
        w, pw = y[None, :n], y[None, n:]
        fq, fp = al.df_batch(cid, w, pw)
        gq, gp = cm.dg_batch(cid, w, pw)
        return (np.concatenate([fq[0], fp[0]]), np.concatenate([gq[0], gp[0]]))

    def rho(y):
        return float(ms.rho_c(cid, y[None, :n], y[None, n:])[0])

    def drho(y):
        dw, dp = ms.drho_c(cid, y[None, :n], y[None, n:])
        return np.concatenate([dw[0], dp[0]])

    return FibrationMap(
        name=f"{ms.name}-assembled", dim=2 * n, fg=fg, dfg=dfg,
        ham=lambda grad: _ham_tstar(grad, n),
        crit_values=np.array([c.value for c in ms.crit]),
        rho=rho, drho=drho, ms=ms, cid=cid,
    )


# ---------------------------------------------------------------------------
# horizontal lift and transport
# ---------------------------------------------------------------------------


def horizontal_lift(fib: FibrationMap, y, wdot: complex, cond_tol=1e-10):
    """The horizontal vector v in span(X_f, X_g) with dh(v) = wdot (2x2 solve)."""
    y = np.asarray(y, dtype=float)
    gf, gg = fib.dfg(y)
    Xf, Xg = fib.ham(gf), fib.ham(gg)
    M = np.array([[gf @ Xf, gf @ Xg], [gg @ Xf, gg @ Xg]])
    scale = (np.linalg.norm(gf) * np.linalg.norm(gg)) ** 2
    if scale <= 0 or abs(np.linalg.det(M)) < cond_tol * scale:
        raise NearCriticalError(
            f"horizontal solve ill-conditioned at |dh| scale {scale:.3e}")
    ab = np.linalg.solve(M, np.array([wdot.real, wdot.imag]))
    return ab[0] * Xf + ab[1] * Xg


@dataclass
class BasePath:
    """A parameterized path w(t), t in [0, 1], with derivative."""
    w: Callable
    wdot: Callable

    @staticmethod
    def segment(w0: complex, w1: complex):
        w0, w1 = complex(w0), complex(w1)
        return BasePath(w=lambda t: w0 + t * (w1 - w0), wdot=lambda t: (w1 - w0))

    @staticmethod
    def arc(center: complex, radius: float, a0: float, a1: float):
        def w(t):
            return center + radius * np.exp(1j * (a0 + t * (a1 - a0)))

        def wdot(t):
            return radius * 1j * (a1 - a0) * np.exp(1j * (a0 + t * (a1 - a0)))

        return BasePath(w=w, wdot=wdot)


@dataclass
class TransportResult:
    path: list                      # (t, state) samples
    fiber_error: float
    completeness_ratio: float
    terminal: str

    @property
    def final(self):
        return self.path[-1][1]


def parallel_transport(fib: FibrationMap, y0, path: BasePath, cfg: OdeConfig,
                       gain: float = 20.0, crit_margin: float = 1e-3,
                       n_samples: int = 129) -> TransportResult:
    """Integrate the horizontal lift of w(t) from y0 with fiber feedback.

    The right-hand side solves dh(v) = wdot + gain (w - h(y)), which keeps
    the trajectory on the moving fiber without altering the connection.
    Refuses paths that pass closer than crit_margin x (critical gap) to a
    critical value.
    """
    tgrid = np.linspace(0.0, 1.0, 64)
    gaps = [abs(path.w(t) - c) for t in tgrid for c in fib.crit_values]
    crit_gap = np.ptp(fib.crit_values) if len(fib.crit_values) > 1 else 1.0
    if min(gaps) < crit_margin * max(crit_gap, 1e-12):
        raise NearCriticalError("path passes too close to a critical value")

    def rhs(t, y):
        target = complex(path.wdot(t)) + gain * (complex(path.w(t)) - fib.h(y))
        return horizontal_lift(fib, y, target)

    def pnorm(y):
        return float(np.linalg.norm(y[fib.dim // 2:]))

    res = flow(rhs, np.asarray(y0, dtype=float), 1.0, cfg,
               escape_norm=pnorm, n_samples=n_samples)
    fiber_err = 0.0
    comp_ratio = 0.0
    for t, y in zip(res.times, res.states):
        fiber_err = max(fiber_err, abs(fib.h(y) - complex(path.w(t))))
        if fib.rho is not None:
            try:
                v = horizontal_lift(fib, y, complex(path.wdot(t)))
                denom = fib.rho(y) * abs(complex(path.wdot(t)))
                if denom > 1e-14:
                    comp_ratio = max(comp_ratio, abs(fib.drho(y) @ v) / denom)
            except NearCriticalError:
                pass
    return TransportResult(
        path=list(zip(res.times, res.states)),
        fiber_error=float(fiber_err),
        completeness_ratio=float(comp_ratio),
        terminal=res.terminal,
    )


# ---------------------------------------------------------------------------
# monodromy of the quadric model
# ---------------------------------------------------------------------------


@dataclass
class MonodromyReport:
    r_values: np.ndarray
    twist_measured: np.ndarray
    twist_model: np.ndarray
    max_deviation: float
    max_fiber_error: float

    def rows(self):
        return [(float(r), float(m), float(t)) for r, m, t in
                zip(self.r_values, self.twist_measured, self.twist_model)]


def quadric_monodromy(n: int, u: float, r_values, frame, cfg: OdeConfig,
                      theta0: float = 0.4) -> MonodromyReport:
    """ODE monodromy of h = sum z_j^2 around |w| = u versus the model twist.

    Start points psi_u(r, theta0) embedded in the plane CP; the annulus
    angle is tracked continuously along the transport, so the measured twist
    is a real number directly comparable with 2 pi/(1 + r^4).
    """
    from .quadric import psi_w, psi_w_inverse

    fib = quadric_model_fibration(n)
    path = BasePath.arc(0.0, u, 0.0, 2.0 * np.pi)
    measured = []
    fiber_err = 0.0
    for r in np.asarray(r_values, dtype=float):
        z1, z2 = psi_w(u, r, theta0)
        z = frame.point_from_special(z1, z2)
        y0 = np.concatenate([z.real, z.imag])
        res = parallel_transport(fib, y0, path, cfg, n_samples=257)
        if res.terminal != COMPLETED:
            raise DomainError(f"monodromy transport failed at r={r}: {res.terminal}")
        fiber_err = max(fiber_err, res.fiber_error)
        angles = []
        for t, y in res.path:
            zz = y[:n] + 1j * y[n:]
            s1, s2 = frame.special_from_point(zz)
            w_t = u * np.exp(2j * np.pi * t)
            ann = psi_w_inverse(w_t, s1, s2)
            angles.append(ann.theta)
        angles = np.unwrap(np.array(angles))
        measured.append(angles[-1] - angles[0])
    measured = np.array(measured)
    model = 2.0 * np.pi / (1.0 + np.asarray(r_values, dtype=float) ** 4)
    return MonodromyReport(
        r_values=np.asarray(r_values, dtype=float),
        twist_measured=measured,
        twist_model=model,
        max_deviation=float(np.max(np.abs(measured - model))),
        max_fiber_error=fiber_err,
    )


def quadric_ode_plane_transport(n: int, frame, cfg: OdeConfig, w0: complex):
    """Transport callable (points, alpha) -> points for surgery comparisons."""
    fib = quadric_model_fibration(n)

    def transport(points, alpha):
        out = []
        path = BasePath.arc(0.0, abs(w0), np.angle(w0), np.angle(w0) + alpha)
        for z in np.atleast_2d(points):
            y0 = np.concatenate([z.real, z.imag])
            res = parallel_transport(fib, y0, path, cfg)
            if res.terminal != COMPLETED:
                raise DomainError(f"plane transport failed: {res.terminal}")
            y = res.final
            out.append(y[:n] + 1j * y[n:])
        return np.array(out)

    return transport


# ---------------------------------------------------------------------------
# thimbles
# ---------------------------------------------------------------------------


@dataclass
class ThimbleTrace:
    parameters: np.ndarray            # fiber values along the real path
    traces: list                      # per seed: array of states at parameters
    terminal_distances: np.ndarray    # distance of final base point to a

    def max_terminal_distance(self):
        return float(np.max(self.terminal_distances))


def trace_thimble(fib: FibrationMap, seeds, u_start: float, u_crit: float,
                  stop_fraction: float, cfg: OdeConfig,
                  crit_location=None, n_checkpoints: int = 9) -> ThimbleTrace:
    """Transport cycle seeds along the real path from u_start toward u_crit.

    Stops at u_crit + stop_fraction (u_start - u_crit); records states at
    checkpoints with strictly monotone parameters.
    """
    if not 0.0 < stop_fraction < 1.0:
        raise DomainError("stop_fraction must be in (0, 1)")
    u_end = u_crit + stop_fraction * (u_start - u_crit)
    path = BasePath.segment(u_start, u_end)
    params = u_start + np.linspace(0.0, 1.0, n_checkpoints) * (u_end - u_start)
    traces = []
    dists = []
    for y0 in seeds:
        res = parallel_transport(fib, np.asarray(y0, dtype=float), path, cfg,
                                 crit_margin=0.5 * stop_fraction *
                                 abs(u_start - u_crit) / max(np.ptp(fib.crit_values), 1.0),
                                 n_samples=2 * n_checkpoints + 1)
        if res.terminal != COMPLETED:
            raise DomainError(f"thimble transport failed: {res.terminal}")
        ts = np.array([t for t, _ in res.path])
        ys = np.array([y for _, y in res.path])
        sel = np.searchsorted(ts, np.linspace(0.0, 1.0, n_checkpoints))
        sel = np.clip(sel, 0, len(ys) - 1)
        traces.append(ys[sel])
        if crit_location is not None:
            target = np.asarray(crit_location, dtype=float)
            if fib.ms is not None:
                qend = ys[-1][: fib.dim // 2]
                dists.append(float(fib.ms.base_distance(qend[None], target[None])[0]))
            else:
                dists.append(float(np.linalg.norm(ys[-1][: target.size] - target)))
        else:
            dists.append(np.nan)
    return ThimbleTrace(parameters=params, traces=traces,
                        terminal_distances=np.array(dists))


# ---------------------------------------------------------------------------
# Morse-Smale check
# ---------------------------------------------------------------------------


@dataclass
class MSConnection:
    from_index: int
    to_index: int
    min_distance: float
    angle: float


@dataclass
class MSReport:
    connections: list
    conormal_margin: float
    passed: bool

    def __str__(self):
        s = "pass" if self.passed else "VIOLATION"
        det = "; ".join(
            f"saddle {c.from_index}->{c.to_index}: dist {c.min_distance:.2e}, "
            f"angle {c.angle:.2e}" for c in self.connections) or "none"
        return (f"morse-smale: {s}; saddle connections: {det}; "
                f"conormal disjointness margin {self.conormal_margin:.3e}")


def _manifold_polyline(ms: MorseSystem, k: int, stable: bool, cfg: OdeConfig,
                       seed_scale=1e-4, T=12.0):
    """Polyline along the 1-d stable/unstable manifold of a torus saddle."""
    c = ms.crit[k]
    axis_mask = (c.signature < 0) if stable else (c.signature > 0)
    pts = []
    for direction in (+1.0, -1.0):
        s = np.zeros(ms.n)
        s[np.argmax(axis_mask)] = direction * seed_scale
        Qg, _ = ms.crit_chart_to_global(k, s[None], np.zeros((1, ms.n)))
        res = flow_base(ms, Qg[0], -T if stable else T, cfg, n_samples=600)
        pts.append(np.array([ms.reduce_q(y) for y in res.states]))
    return pts


def morse_smale_check(ms: MorseSystem, cfg: OdeConfig = None,
                      approach_tol=1e-2, angle_tol=1e-3, T=16.0) -> MSReport:
    """Detect saddle-saddle connections of nu and measure transversality.

    Unstable-sphere seeds of each saddle are flowed forward; a connection is
    flagged when the orbit approaches another saddle within approach_tol.
    For flagged pairs the angle between the incoming orbit direction and the
    tangent of the target's stable manifold is estimated; conormal
    disjointness of SN*E^+(a) and SN*E^-(b) is sampled directly.
    """
    cfg = cfg or OdeConfig(abs_tol=1e-11, rel_tol=1e-10)
    saddles = [k for k, c in enumerate(ms.crit)
               if 0 < int(np.sum(c.signature < 0)) < ms.n]
    connections = []
    margin = np.inf
    for ka in saddles:
        unstable = _manifold_polyline(ms, ka, stable=False, cfg=cfg, T=T)
        for kb in saddles:
            if kb == ka:
                continue
            b = ms.crit[kb]
            best = np.inf
            best_pt = None
            for branch in unstable:
                d = ms.base_distance(branch, b.location[None, :])
                i = int(np.argmin(d))
                if d[i] < best:
                    best = float(d[i])
                    best_pt = branch[i]
            if best < approach_tol:
                stable_branches = _manifold_polyline(ms, kb, stable=True, cfg=cfg, T=T)
                spts = np.vstack(stable_branches)
                d = ms.base_distance(spts, best_pt[None, :])
                j = int(np.argmin(d))
                jn = min(j + 1, len(spts) - 1)
                tangent = spts[jn] - spts[j - 1 if j > 0 else j]
                if np.linalg.norm(tangent) < 1e-14:
                    angle = 0.0
                else:
                    W = ms.reduce_q(best_pt)[None, :]
                    v1 = ms.nu_c(0, W)[0] if ms.rep_dim == ms.n else None
                    if v1 is None:
                        cid = ms.chart_of(best_pt)
                        Wc, _ = ms.to_chart(cid, best_pt[None], np.zeros((1, ms.rep_dim)))
                        v1 = ms.nu_c(cid, Wc)[0]
                    cosang = abs(v1 @ tangent) / (np.linalg.norm(v1) * np.linalg.norm(tangent))
                    angle = float(np.arccos(np.clip(cosang, -1.0, 1.0)))
                connections.append(MSConnection(ka, kb, best, angle))

            # conormal disjointness of SN*E^+(a) and SN*E^-(b)
            upts = np.vstack(unstable)
            spts = np.vstack(_manifold_polyline(ms, kb, stable=True, cfg=cfg, T=T))
            for sgn in (1.0,):
                ucn = _curve_conormals(ms, upts)
                scn = _curve_conormals(ms, spts)
                dd = _phase_set_distance(ms, ucn, scn)
                margin = min(margin, dd)
    passed = all(c.angle > angle_tol for c in connections)
    return MSReport(connections=connections,
                    conormal_margin=float(margin) if margin < np.inf else np.inf,
                    passed=passed)


def _curve_conormals(ms, pts, stride=6):
    """(q, unit conormal) samples along a base polyline (2-d base)."""
    out = []
    for i in range(1, len(pts) - 1, stride):
        t = pts[i + 1] - pts[i - 1]
        nt = np.linalg.norm(t)
        if nt < 1e-12:
            continue
        t = t / nt
        nrm = np.array([-t[1], t[0]])
        out.append(np.concatenate([ms.reduce_q(pts[i]), nrm]))
        out.append(np.concatenate([ms.reduce_q(pts[i]), -nrm]))
    return np.array(out)


def _phase_set_distance(ms, A, B):
    if len(A) == 0 or len(B) == 0:
        return np.inf
    best = np.inf
    for a in A[:: max(1, len(A) // 120)]:
        dq = ms.base_distance(B[:, :2], a[None, :2])
        dp = np.linalg.norm(B[:, 2:] - a[2:], axis=1)
        best = min(best, float(np.min(np.hypot(dq, dp))))
    return best


# ---------------------------------------------------------------------------
# incompleteness probe
# ---------------------------------------------------------------------------


@dataclass
class ProbeReport:
    blow_up_factor: float
    parameter_reached: float
    terminal: str
    seed_offset: float
    p_initial: float

    def __str__(self):
        return (f"incompleteness probe: |p| factor {self.blow_up_factor:.2f}, "
                f"parameter reached {self.parameter_reached:.3f}, "
                f"terminal {self.terminal}")


def incompleteness_probe(cm: ComplexificationMap, from_idx: int, to_idx: int,
                         cfg: OdeConfig = None, seed_offset=2e-3, p_scale=2e-3,
                         end_gap=0.01, factor_cap=200.0) -> ProbeReport:
    """Transport the real arc [u, phi(b) - end_gap] from a conormal-ray seed.

    The seed sits on the conormal ray over the connecting orbit, just off
    the critical point a; |p| growth along the attempted lift is reported as
    max |p| / |p_0|.
    """
    ms = cm.ms
    cfg = cfg or OdeConfig(abs_tol=1e-11, rel_tol=1e-10)
    a, b = ms.crit[from_idx], ms.crit[to_idx]
    unstable_axis = int(np.argmax(a.signature > 0))
    stable_axis = int(np.argmax(a.signature < 0))
    s = np.zeros(ms.n)
    s[unstable_axis] = seed_offset
    pw = np.zeros(ms.n)
    pw[stable_axis] = p_scale
    Qg, Pg = ms.crit_chart_to_global(from_idx, s[None], pw[None])
    fib = h0_fibration(cm, cid=0)
    y0 = np.concatenate([ms.reduce_q(Qg[0]), Pg[0]])
    u = fib.fg(y0)[0]
    w_end = b.value - end_gap
    path = BasePath.segment(u, w_end)
    cfg_probe = OdeConfig(abs_tol=cfg.abs_tol, rel_tol=cfg.rel_tol,
                          escape_radius=factor_cap * p_scale, seed=cfg.seed)
    res = parallel_transport(fib, y0, path, cfg_probe, crit_margin=0.0,
                             n_samples=257)
    pmax = max(float(np.linalg.norm(y[ms.n:])) for _, y in res.path)
    return ProbeReport(
        blow_up_factor=pmax / p_scale,
        parameter_reached=float(res.path[-1][0]),
        terminal=res.terminal,
        seed_offset=seed_offset,
        p_initial=p_scale,
    )


def control_probe(cm: ComplexificationMap, q0, p_dir, span: float,
                  cfg: OdeConfig = None, p_scale=2e-3) -> ProbeReport:
    """Transport a regular real arc from a generic seed (the control run)."""
    ms = cm.ms
    cfg = cfg or OdeConfig(abs_tol=1e-11, rel_tol=1e-10)
    fib = h0_fibration(cm, cid=0)
    p = np.asarray(p_dir, dtype=float)
    p = p_scale * p / np.linalg.norm(p)
    y0 = np.concatenate([ms.reduce_q(np.asarray(q0, dtype=float)), p])
    u = fib.fg(y0)[0]
    path = BasePath.segment(u, u + span)
    res = parallel_transport(fib, y0, path, cfg, crit_margin=1e-3, n_samples=257)
    pmax = max(float(np.linalg.norm(y[ms.n:])) for _, y in res.path)
    return ProbeReport(
        blow_up_factor=pmax / p_scale,
        parameter_reached=float(res.path[-1][0]),
        terminal=res.terminal,
        seed_offset=0.0,
        p_initial=p_scale,
    )

# ---------------------------------------------------------------------------
# Weinstein structure of real fibers
# ---------------------------------------------------------------------------


def fiber_tangent_frame(dfg_grads):
    """Orthonormal basis of ker df cap ker dg from the two gradients."""
    gf, gg = dfg_grads
    m = gf.size
    normals = []
    for nvec in (gf, gg):
        v = nvec.astype(float).copy()
        for b in normals:
            v -= (v @ b) * b
        nv = np.linalg.norm(v)
        if nv < 1e-14:
            raise NearCriticalError("degenerate dh while building fiber frame")
        normals.append(v / nv)
    basis = []
    for i in range(m):
        v = np.zeros(m)
        v[i] = 1.0
        for b in normals + basis:
            v -= (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == m - 2:
            break
    return np.array(basis)


def _omega_tstar(v, u, n):
    """omega = sum dp_j ^ dq_j on chart vectors (q, p)."""
    return float(v[n:] @ u[:n] - v[:n] @ u[n:])


def fiber_liouville_vector(fib: FibrationMap, y):
    """The Liouville field of lambda restricted to the fiber through y.

    Solves iota_eta (omega|_fiber) = lambda|_fiber on the 2-dimensional
    fiber tangent space (surface fibers).
    """
    n = fib.dim // 2
    basis = fiber_tangent_frame(fib.dfg(y))
    if len(basis) != 2:
        raise DomainError("fiber-Liouville solve implemented for surface fibers")
    v1, v2 = basis
    om = _omega_tstar(v1, v2, n)
    if abs(om) < 1e-12:
        raise NearCriticalError("fiber tangent space is not symplectic here")
    lam1 = float(y[n:] @ v1[:n])
    lam2 = float(y[n:] @ v2[:n])
    # omega(eta, v1) = lam1 and omega(eta, v2) = lam2 with eta = c1 v1 + c2 v2
    c1, c2 = lam2 / om, -lam1 / om
    return c1 * v1 + c2 * v2


def rho_fiber_gradient_residual(fib: FibrationMap, y):
    """Norm of the projection of grad rho onto the fiber tangent space."""
    basis = fiber_tangent_frame(fib.dfg(y))
    g = fib.drho(np.asarray(y, dtype=float))
    return float(np.linalg.norm(basis @ g))


def fiber_ray_root(fib: FibrationMap, w, pw_dir, u: float, r_max: float,
                   r_min=1e-9, grid=160):
    """Radial roots of f(w, r pw_dir) = u along a fiber ray (list of radii)."""
    from scipy.optimize import brentq

    def fval(r):
        return fib.fg(np.concatenate([w, r * pw_dir]))[0] - u

    rs = np.linspace(r_min, r_max, grid)
    vals = np.array([fval(r) for r in rs])
    roots = []
    for i in range(len(rs) - 1):
        if vals[i] == 0.0:
            roots.append(float(rs[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(float(brentq(fval, rs[i], rs[i + 1], xtol=1e-14)))
    return roots


def fiber_ray_roots_batch(al, cid, W, dirs, u: float, r_max: float,
                          r_min=1e-9, grid=160):
    """Vectorized radial root scan along many rays of one chart.

    Returns a list (per ray) of lists of radii where f(w, r dir) = u; the
    coarse bracket scan is one batched evaluation, refined by brentq.
    """
    from scipy.optimize import brentq

    W = np.atleast_2d(W)
    dirs = np.atleast_2d(dirs)
    nray = W.shape[0]
    rs = np.linspace(r_min, r_max, grid)
    Wrep = np.repeat(W, grid, axis=0)
    PW = np.repeat(dirs, grid, axis=0) * np.tile(rs, nray)[:, None]
    vals = al.f_batch(cid, Wrep, PW).reshape(nray, grid) - u
    out = []
    for i in range(nray):
        roots = []
        v = vals[i]
        for j in range(grid - 1):
            if v[j] == 0.0:
                roots.append(float(rs[j]))
            elif v[j] * v[j + 1] < 0:
                fval = lambda r: float(
                    al.f_batch(cid, W[i][None], (r * dirs[i])[None])[0]) - u
                roots.append(float(brentq(fval, rs[j], rs[j + 1], xtol=1e-14)))
        out.append(roots)
    return out


@dataclass
class CriticalSphereRecord:
    crit_index: int
    sign: int
    sphere_dim: int               # -1: empty sphere, no geometric locus
    radius: float | None
    root_residual: float | None
    gradient_residual: float | None


@dataclass
class WeinsteinFiberReport:
    u: float
    records: list
    q_u_is_minimum: bool
    contact_slice_min: float
    contact_slice_samples: int

    def __str__(self):
        rows = "; ".join(
            f"a{r.crit_index}{'+' if r.sign > 0 else '-'} dim {r.sphere_dim}"
            + (f" at r={r.radius:.4f} (res {r.root_residual:.1e}, grad {r.gradient_residual:.1e})"
               if r.radius is not None else " (empty)")
            for r in self.records)
        return (f"weinstein fiber u={self.u}: {rows}; Q_u minimum: "
                f"{self.q_u_is_minimum}; contact-slice min drho(eta) = "
                f"{self.contact_slice_min:.3e} over {self.contact_slice_samples} samples")


def weinstein_fiber_report(al, u: float, rng=None, n_slice=200,
                           r_cap_factor=8.0) -> WeinsteinFiberReport:
    """Critical-submanifold report of rho_u = rho|_{F_u} for real regular u.

    Per critical point a: the unique critical sphere is C_a^+ (phi(a) < u)
    or C_a^- (phi(a) > u), located by monotone root-finding on
    r -> f_r(C_a^{+-}); spheres of dimension -1 are empty and carry no
    geometric locus.  Verifies the fiberwise gradient of rho_u vanishes on
    located spheres, that Q_u is the minimum locus, and the contact-slice
    positivity d rho(fiber-Liouville) > 0 at regular F_u samples.
    """
    from scipy.optimize import brentq

    ms = al.ms
    rng = rng or np.random.default_rng(23)
    if any(abs(u - c.value) < 1e-9 for c in ms.crit):
        raise DomainError("u must be a regular value")
    records = []
    for k, c in enumerate(ms.crit):
        sign = +1 if c.value < u else -1
        ind = int(np.sum(c.signature < 0))
        dim = (ind - 1) if sign > 0 else (ms.n - ind - 1)
        if dim < 0:
            records.append(CriticalSphereRecord(k, sign, dim, None, None, None))
            continue
        fr = lambda r: al.f_on_c_sphere(k, sign, r) - u
        r_hi = al.cp.delta
        while fr(r_hi) * fr(1e-9) > 0 and r_hi < r_cap_factor * al.cp.delta:
            r_hi *= 2.0
        if fr(1e-9) * fr(r_hi) > 0:
            raise DomainError(f"no radius with f_r(C_a^{sign}) = {u} for crit {k}")
        rstar = float(brentq(fr, 1e-9, r_hi, xtol=1e-15))
        residual = abs(fr(rstar))
        from .complexify import c_sphere_samples
        fib = assembled_fibration(al, cid=c.chart_id)
        grad_res = 0.0
        for x in c_sphere_samples(ms, k, sign, rstar, 16, rng):
            Wc, PWc = ms.to_chart(c.chart_id, x.q[None], x.p[None])
            y = np.concatenate([Wc[0], PWc[0]])
            grad_res = max(grad_res, rho_fiber_gradient_residual(fib, y))
        records.append(CriticalSphereRecord(k, sign, dim, rstar, residual, grad_res))

    # contact-slice positivity and Q_u minimality over F_u ray samples
    slice_min = np.inf
    count = 0
    rho_min = np.inf
    Q = ms.sample_base(rng, 2 * n_slice)
    keep = np.ones(len(Q), dtype=bool)
    for c in ms.crit:
        keep &= ms.base_distance(Q, c.location[None, :]) > 0.3
    Q = Q[keep]
    cids = np.array([ms.chart_of(q) for q in Q])
    fibs = {}
    for cid in np.unique(cids):
        fibs[cid] = assembled_fibration(al, cid=cid)
        sel = cids == cid
        Wc, _ = ms.to_chart(cid, Q[sel], np.zeros((int(sel.sum()), ms.rep_dim)))
        nu = ms.nu_c(cid, Wc)
        perp = np.stack([-nu[:, 1], nu[:, 0]], axis=1)
        G = ms.ginv_c(cid, Wc)
        perp /= np.sqrt(np.einsum("ni,nij,nj->n", perp, G, perp))[:, None]
        for sgn in (1.0, -1.0):
            rootlists = fiber_ray_roots_batch(al, cid, Wc, sgn * perp, u,
                                              r_max=r_cap_factor * al.cp.delta)
            for i, roots in enumerate(rootlists):
                for r in roots:
                    y = np.concatenate([Wc[i], r * sgn * perp[i]])
                    try:
                        eta = fiber_liouville_vector(fibs[cid], y)
                    except (NearCriticalError, DomainError):
                        continue
                    slice_min = min(slice_min, float(fibs[cid].drho(y) @ eta))
                    rho_min = min(rho_min, fibs[cid].rho(y))
                    count += 1
    return WeinsteinFiberReport(
        u=u, records=records,
        q_u_is_minimum=bool(rho_min > 0.0),
        contact_slice_min=float(slice_min) if count else np.nan,
        contact_slice_samples=count,
    )
