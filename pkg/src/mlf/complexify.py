"""Coarse complexification h^0 = f^0 + i g and its certified properties.

f^0(p, q) = phi(q) - (1/2) chi(q) Hess phi_q(p, p).  In Morse-chart complex
coordinates z_j = q_j + i p_j (the convention that makes both the real and
imaginary parts of the chart display h^0 = phi(a) + sum eps_j z_j^2 come out
right) one has, inside each chart ball,

    f^0 = phi(a) + sum eps_j (q_j^2 - p_j^2),     g = 2 sum eps_j p_j q_j,
    (nu_tilde . f^0)(z) = 4 sum |z_j|^2,
    f^0 on the critical spheres C_a^+- at radius r:  phi(a) +- r^2,

equivalently phi(a) +- 2 rho.  The last identity is forced by
upsilon|_{C_a^+-} = +-2 through f^0 - phi(a) = upsilon rho on the fiber.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError, MorseSystem, PhasePoint
from .system import eval_g_batch, nu_bar_batch, nu_tilde_batch, upsilon_batch


# ---------------------------------------------------------------------------
# evaluators
# ---------------------------------------------------------------------------


@dataclass
class CutoffSpec:
    """Descriptor of the base cutoff chi used by h^0 (owned by the scenario).

    chi is identically 1 on each Morse ball and vanishes outside the
    chi_radius of each critical point (or is identically 1 on model
    scenarios with a single global chart).
    """

    ms: MorseSystem

    def validate(self, rng=None, tol=1e-12):
        rng = rng or np.random.default_rng(0)
        worst = 0.0
        for k, c in enumerate(self.ms.crit):
            s = rng.uniform(-1, 1, size=(64, self.ms.n)) * 0.9 * c.ball_radius
            s = s[np.linalg.norm(s, axis=1) < 0.95 * c.ball_radius]
            Qg, _ = self.ms.crit_chart_to_global(k, s, np.zeros_like(s))
            W, _ = self.ms.to_chart(c.chart_id, Qg, np.zeros((len(Qg), self.ms.rep_dim)))
            chi = self.ms.chi_c(c.chart_id, W)
            worst = max(worst, float(np.max(np.abs(chi - 1.0))))
        if worst > tol:
            raise DomainError(f"chi is not identically 1 near the critical set ({worst:.2e})")
        return worst


class ComplexificationMap:
    """Evaluators for f^0, g and h^0 = f^0 + i g on T*M."""

    def __init__(self, ms: MorseSystem):
        self.ms = ms

    # batched chart-coordinate forms
    def f0_batch(self, cid, W, PW):
        return self.ms.phi_c(cid, W) - self.ms.h0_quad_c(cid, W, PW)

    def df0_batch(self, cid, W, PW):
        dq_quad, dp_quad = self.ms.dh0_quad_c(cid, W, PW)
        return self.ms.dphi_c(cid, W) - dq_quad, -dp_quad

    def g_batch(self, cid, W, PW):
        return eval_g_batch(self.ms, cid, W, PW)

    def dg_batch(self, cid, W, PW):
        nu = self.ms.nu_c(cid, W)
        dn = self.ms.dnu_c(cid, W)
        return np.einsum("nij,ni->nj", dn, PW), nu

    def nu_tilde_f0_batch(self, cid, W, PW):
        dq, dp = self.df0_batch(cid, W, PW)
        qdot, pdot = nu_tilde_batch(self.ms, cid, W, PW)
        return np.einsum("ni,ni->n", dq, qdot) + np.einsum("ni,ni->n", dp, pdot)

    def nu_bar_f0_batch(self, cid, W, PW):
        dq, dp = self.df0_batch(cid, W, PW)
        qdot, pdot = nu_bar_batch(self.ms, cid, W, PW)
        return np.einsum("ni,ni->n", dq, qdot) + np.einsum("ni,ni->n", dp, pdot)

    # PhasePoint wrappers
    def f0(self, x: PhasePoint) -> float:
        cid, w, pw = self.ms.phase_to_working(x)
        return float(self.f0_batch(cid, w[None], pw[None])[0])

    def g(self, x: PhasePoint) -> float:
        cid, w, pw = self.ms.phase_to_working(x)
        return float(self.g_batch(cid, w[None], pw[None])[0])


def eval_h0(x: PhasePoint, cm: ComplexificationMap) -> complex:
    """h^0(p, q) = f^0 + i g."""
    cid, w, pw = cm.ms.phase_to_working(x)
    f = cm.f0_batch(cid, w[None], pw[None])[0]
    g = cm.g_batch(cid, w[None], pw[None])[0]
    return complex(f, g)


# ---------------------------------------------------------------------------
# critical points of h^0
# ---------------------------------------------------------------------------


@dataclass
class H0CriticalReport:
    found: list                   # (chart id, w, pw) clusters
    matched: bool
    max_match_distance: float
    extra: list
    hessian_error: float

    def __str__(self):
        s = "pass" if self.matched and not self.extra else "FAIL"
        return (f"h0 critical points: {s}, {len(self.found)} found, "
                f"match distance {self.max_match_distance:.2e}, "
                f"chart Hessian error {self.hessian_error:.2e}")


def verify_h0_critical(cm: ComplexificationMap, radius: float, seeds: int = 200,
                       rng=None, tol=1e-8) -> H0CriticalReport:
    """Newton root-finding on dh^0 from random seeds in W_radius.

    Roots must coincide with the critical set of phi (on the zero section);
    the chart Hessian of h^0 in complex Morse coordinates must be
    2 diag(eps).
    """
    ms = cm.ms
    rng = rng or np.random.default_rng(7)
    n = ms.n

    def grad(cid, y):
        w, pw = y[:n][None], y[n:][None]
        dfq, dfp = cm.df0_batch(cid, w, pw)
        dgq, dgp = cm.dg_batch(cid, w, pw)
        return np.concatenate([dfq[0], dfp[0], dgq[0], dgp[0]])

    def jac(cid, y, h=1e-6):
        m = y.size
        J = np.zeros((2 * m, m))
        for i in range(m):
            e = np.zeros(m)
            e[i] = h
            J[:, i] = (grad(cid, y + e) - grad(cid, y - e)) / (2 * h)
        return J

    Q = ms.sample_base(rng, seeds)
    roots = []
    for q in Q:
        cid = ms.chart_of(q)
        w0, _ = ms.to_chart(cid, q[None], np.zeros((1, ms.rep_dim)))
        pw0 = rng.uniform(-radius, radius, size=n) * 0.5
        y = np.concatenate([w0[0], pw0])
        ok = False
        for _ in range(60):
            gvec = grad(cid, y)
            if np.linalg.norm(gvec) < 1e-12:
                ok = True
                break
            J = jac(cid, y)
            try:
                step, *_ = np.linalg.lstsq(J, -gvec, rcond=None)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 1.0:
                step = step / np.linalg.norm(step)
            y = y + step
            if not np.all(np.isfinite(y)):
                break
        if not ok:
            continue
        roots.append((cid, y[:n].copy(), y[n:].copy()))

    # cluster and match against Gamma_phi
    clusters = []
    for cid, w, pw in roots:
        Qg, Pg = ms.from_chart(cid, w[None], pw[None])
        merged = False
        for cl in clusters:
            if ms.base_distance(Qg, cl[0][None])[0] < 1e-6 and np.linalg.norm(Pg[0] - cl[1]) < 1e-6:
                merged = True
                break
        if not merged:
            clusters.append((Qg[0], Pg[0]))

    max_d = 0.0
    extra = []
    hit = np.zeros(len(ms.crit), dtype=bool)
    for (qg, pg) in clusters:
        dists = [float(ms.base_distance(qg[None], c.location[None])[0]) for c in ms.crit]
        kbest = int(np.argmin(dists))
        d = max(dists[kbest], float(np.linalg.norm(pg)))
        if d > 1e-5:
            extra.append((qg, pg))
        else:
            hit[kbest] = True
            max_d = max(max_d, d)
    matched = bool(np.all(hit))

    # chart Hessian of h^0 in z = q + i p is 2 diag(eps): check by sampling
    hess_err = 0.0
    for k, c in enumerate(ms.crit):
        r = 0.3 * c.ball_radius
        for _ in range(8):
            s = rng.uniform(-r, r, size=n)
            ppw = rng.uniform(-r, r, size=n)
            Qg, Pg = ms.crit_chart_to_global(k, s[None], ppw[None])
            x = PhasePoint(Qg[0], Pg[0])
            z = s + 1j * ppw
            model = c.value + np.sum(c.signature * z * z)
            hess_err = max(hess_err, abs(eval_h0(x, cm) - model))
    return H0CriticalReport(
        found=clusters, matched=matched,
        max_match_distance=max_d, extra=extra, hessian_error=float(hess_err),
    )


# ---------------------------------------------------------------------------
# delta scan (Lyapunov domain of f^0)
# ---------------------------------------------------------------------------


@dataclass
class DeltaScanReport:
    delta: float
    min_margin_interior: float
    min_margin_sphere: float
    samples: dict
    ladder: list = field(default_factory=list)

    def __str__(self):
        return (f"delta-scan: delta={self.delta:.4g}, interior margin "
                f"{self.min_margin_interior:.3e} ({self.samples.get('interior', 0)} samples), "
                f"sphere-bundle margin {self.min_margin_sphere:.3e} "
                f"({self.samples.get('sphere', 0)} samples)")


def sample_tube(ms: MorseSystem, rng, count, r_max, r_min=0.0, fixed_r=None):
    """Phase samples with metric covector norm in [r_min, r_max] (or = fixed_r)."""
    Q = ms.sample_base(rng, count)
    cids = np.array([ms.chart_of(q) for q in Q])
    W = np.zeros((count, ms.n))
    PW = np.zeros((count, ms.n))
    for cid in np.unique(cids):
        sel = cids == cid
        Wc, _ = ms.to_chart(cid, Q[sel], np.zeros((int(sel.sum()), ms.rep_dim)))
        dirs = rng.standard_normal((int(sel.sum()), ms.n))
        G = ms.ginv_c(cid, Wc)
        norms = np.sqrt(np.einsum("ni,nij,nj->n", dirs, G, dirs))
        dirs /= norms[:, None]
        if fixed_r is None:
            r = rng.uniform(r_min, r_max, size=int(sel.sum()))
        else:
            r = np.full(int(sel.sum()), float(fixed_r))
        W[sel] = Wc
        PW[sel] = dirs * r[:, None]
    return Q, cids, W, PW


def _away_from_crit(ms, Q, exclusion):
    keep = np.ones(len(Q), dtype=bool)
    for c in ms.crit:
        keep &= ms.base_distance(Q, c.location[None, :]) > exclusion
    return keep


def _away_from_c_spheres(ms, Q, cids, W, PW, tol):
    """Mask of samples not lying near any critical sphere C_a^+-.

    A sample is near C_a^+- when its base point is near a and the covector is
    within angle tol of the pure-signature subspace.
    """
    keep = np.ones(len(W), dtype=bool)
    for k, c in enumerate(ms.crit):
        sel = cids == c.chart_id
        if not np.any(sel):
            continue
        dist_base = ms.base_distance(Q[sel], c.location[None, :])
        p = PW[sel]
        norm2 = np.einsum("nj,nj->n", p, p)
        plus = np.einsum("nj,nj->n", p * (c.signature < 0), p) / np.maximum(norm2, 1e-30)
        frac = np.minimum(plus, 1.0 - plus)   # angular distance^2 to either sphere
        near = (dist_base < 10 * tol) & (frac < tol)
        tmp = keep[sel]
        tmp[near] = False
        keep[sel] = tmp
    return keep


def scan_delta(cm: ComplexificationMap, rng=None, n_interior=20000, n_sphere=8000,
               levels=12, exclusion_factor=1e-3, sphere_zero_tol=1e-10) -> DeltaScanReport:
    """Bisection on the tube radius: largest dyadic delta with certified margins.

    Interior check: nu_tilde . f^0 > 0 on W_delta minus small balls around the
    critical set.  Sphere check: nu_bar . f^0 >= 0 on V_r samples (r <= delta)
    with equality only near the spheres C_a^+-.
    """
    ms = cm.ms
    rng = rng or np.random.default_rng(11)
    delta0 = min(c.ball_radius for c in ms.crit)
    exclusion = exclusion_factor * delta0
    ladder = []
    accepted = None
    for lev in range(levels):
        delta = delta0 / 2.0 ** lev
        Q, cids, W, PW = sample_tube(ms, rng, n_interior, r_max=delta, r_min=0.0)
        keep = _away_from_crit(ms, Q, exclusion)
        margin_int = np.inf
        for cid in np.unique(cids):
            sel = (cids == cid) & keep
            if not np.any(sel):
                continue
            vals = cm.nu_tilde_f0_batch(cid, W[sel], PW[sel])
            margin_int = min(margin_int, float(vals.min()))

        margin_sph = np.inf
        nsph = 0
        for frac in (1.0, 0.5, 0.25):
            Q, cids, W, PW = sample_tube(ms, rng, n_sphere // 3, r_max=delta,
                                         fixed_r=frac * delta)
            keep = _away_from_c_spheres(ms, Q, cids, W, PW, tol=1e-2)
            nsph += int(keep.sum())
            for cid in np.unique(cids):
                sel = (cids == cid) & keep
                if not np.any(sel):
                    continue
                vals = cm.nu_bar_f0_batch(cid, W[sel], PW[sel])
                margin_sph = min(margin_sph, float(vals.min()))
        ladder.append((delta, margin_int, margin_sph))
        if margin_int > 0.0 and margin_sph > -sphere_zero_tol:
            accepted = (delta, margin_int, margin_sph, nsph)
            break
    if accepted is None:
        raise DomainError("no admissible delta found on the dyadic ladder")
    delta, m_int, m_sph, nsph = accepted
    return DeltaScanReport(
        delta=delta,
        min_margin_interior=m_int,
        min_margin_sphere=m_sph,
        samples={"interior": n_interior, "sphere": nsph},
        ladder=ladder,
    )


# ---------------------------------------------------------------------------
# critical values of f_r^0 and the upsilon derivative
# ---------------------------------------------------------------------------


@dataclass
class CriticalSphereValue:
    crit_index: int
    sign: int                 # +1 for C_a^+, -1 for C_a^-
    sphere_dim: int           # -1 means the sphere is empty
    value: float


def critical_values_f0r(ms: MorseSystem, r: float) -> list[CriticalSphereValue]:
    """Values of f_r^0 on the critical spheres: phi(a) +- r^2 (= phi(a) +- 2 rho).

    C_a^+ has dimension ind(a) - 1 and carries phi(a) + r^2; C_a^- has
    dimension n - ind(a) - 1 and carries phi(a) - r^2.  Empty spheres
    (dimension -1) are still reported, with the formula value they would
    carry.
    """
    if r <= 0:
        raise DomainError("radius must be positive")
    out = []
    for k, c in enumerate(ms.crit):
        ind = int(np.sum(c.signature < 0))
        out.append(CriticalSphereValue(k, +1, ind - 1, c.value + r * r))
        out.append(CriticalSphereValue(k, -1, ms.n - ind - 1, c.value - r * r))
    return out


def c_sphere_samples(ms: MorseSystem, k: int, sign: int, r: float, count, rng=None):
    """Phase points on C_a^{sign} at covector radius r (empty array if none)."""
    rng = rng or np.random.default_rng(0)
    c = ms.crit[k]
    mask = (c.signature < 0) if sign > 0 else (c.signature > 0)
    dim = int(mask.sum())
    if dim == 0:
        return []
    dirs = rng.standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    PW = np.zeros((count, ms.n))
    PW[:, mask] = r * dirs
    W = np.zeros((count, ms.n))
    Qg, Pg = ms.crit_chart_to_global(k, W, PW)
    return [PhasePoint(Qg[i], Pg[i]) for i in range(count)]


def nu_bar_dot_upsilon(x: PhasePoint, ms: MorseSystem) -> float:
    """(nu_bar . upsilon) on a Morse-chart fiber: 8 (S^2 - S_eps^2)/S^2 >= 0.

    S = sum p_j^2 and S_eps = sum eps_j p_j^2 in the chart; zero exactly on
    C_a^- cup C_a^+.  Raises outside the chart fibers over the critical set.
    """
    for k, c in enumerate(ms.crit):
        if float(ms.base_distance(x.q[None], c.location[None])[0]) < 1e-8:
            W, PW = ms.crit_chart_coords(k, x.q[None], x.p[None])
            p = PW[0]
            S = float(np.sum(p * p))
            if S == 0.0:
                raise DomainError("upsilon derivative undefined at p = 0")
            Se = float(np.sum(c.signature * p * p))
            return 8.0 * (S * S - Se * Se) / (S * S)
    raise DomainError("point is not on a cotangent fiber over the critical set")
