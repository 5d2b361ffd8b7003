"""Heegaard curve systems, Weinstein handle diagrams, double-of-fiber check.

The genus-g splitting surface Q is modeled flat: the unit-square torus for
g = 1 (curves are straight loops) and the regular 4g-gon with edge word
a1 b1 a1' b1' ... for g >= 2 (standard curves are the chords joining the
midpoints of paired edges, which meet exactly once per handle block).

The fiber of the associated Lefschetz fibration is DT*Q with 4g Weinstein
handles attached along the components of the sphere conormal bundles
SN*alpha_j, SN*beta_l (two components each); framings are labeled by the
conormal framing (integer 0 in that trivialization).  Euler bookkeeping:
chi(F) = (2 - 2g) + 4g = 2 + 2g matches the count 2 + 2g of critical
points, so chi(T*M) = chi(F) - #crit = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError


# ---------------------------------------------------------------------------
# curves and intersections
# ---------------------------------------------------------------------------


@dataclass
class Curve:
    label: str
    points: np.ndarray           # (N, 2) vertices of the closed polyline

    def segments(self, close=True):
        pts = self.points
        m = len(pts)
        rng = range(m) if close else range(m - 1)
        return [(pts[i], pts[(i + 1) % m]) for i in rng]


@dataclass
class SurfaceCurveSystem:
    genus: int
    alphas: list
    betas: list
    model: str                   # "square" (torus cover counting) or "polygon"


def torus_line_curve(label, homology, offset, n_sub=8):
    """Straight (p, q)-loop on the square torus through the given offset."""
    p, q = homology
    g = int(np.gcd(int(abs(p)), int(abs(q)))) or 1
    ts = np.linspace(0.0, 1.0, n_sub * max(abs(p), abs(q), 1) + 1)[:-1]
    pts = np.stack([offset[0] + ts * p, offset[1] + ts * q], axis=1)
    return Curve(label=label, points=pts)


def standard_system(genus: int) -> SurfaceCurveSystem:
    """The standard alpha/beta curves on the flat model of the genus-g surface."""
    if genus < 0:
        raise DomainError("genus must be non-negative")
    if genus == 0:
        return SurfaceCurveSystem(genus=0, alphas=[], betas=[], model="polygon")
    if genus == 1:
        return SurfaceCurveSystem(
            genus=1,
            alphas=[torus_line_curve("alpha1", (1, 0), (0.0, 0.25))],
            betas=[torus_line_curve("beta1", (0, 1), (0.25, 0.0))],
            model="square",
        )
    m = 4 * genus
    verts = np.stack([np.cos(2 * np.pi * (np.arange(m) + 0.5) / m),
                      np.sin(2 * np.pi * (np.arange(m) + 0.5) / m)], axis=1)
    mids = 0.5 * (verts + np.roll(verts, -1, axis=0))
    alphas, betas = [], []
    for j in range(genus):
        base = 4 * j
        alphas.append(Curve(f"alpha{j+1}", np.stack([mids[base], mids[base + 2]])))
        betas.append(Curve(f"beta{j+1}", np.stack([mids[base + 1], mids[base + 3]])))
    return SurfaceCurveSystem(genus=genus, alphas=alphas, betas=betas, model="polygon")


def _seg_intersect(p0, p1, q0, q1, tol=1e-12):
    """Proper crossing of two segments: (+-1 sign) or 0; None on tangency."""
    d1 = p1 - p0
    d2 = q1 - q0
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    rhs = q0 - p0
    if abs(denom) < tol * (np.linalg.norm(d1) * np.linalg.norm(d2) + tol):
        # parallel: tangency only if collinear and overlapping
        cross = rhs[0] * d1[1] - rhs[1] * d1[0]
        if abs(cross) < tol:
            t0 = (rhs @ d1) / (d1 @ d1)
            t1 = ((q1 - p0) @ d1) / (d1 @ d1)
            lo, hi = min(t0, t1), max(t0, t1)
            if hi > tol and lo < 1.0 - tol:
                return None
        return 0
    t = (rhs[0] * d2[1] - rhs[1] * d2[0]) / denom
    s = (rhs[0] * d1[1] - rhs[1] * d1[0]) / denom
    if tol < t < 1.0 - tol and tol < s < 1.0 - tol:
        return 1 if denom > 0 else -1
    if -tol <= t <= 1.0 + tol and -tol <= s <= 1.0 + tol:
        if min(abs(t), abs(1 - t), abs(s), abs(1 - s)) < tol:
            return None      # crossing at a vertex: reposition needed
    return 0


class TangencyError(DomainError):
    pass


def _curve_crossings(a: Curve, b: Curve, model: str):
    count = 0
    sign = 0
    parallel_overlap = False
    close = model == "square"
    translates = ([np.array([i, j]) for i in (-1, 0, 1) for j in (-1, 0, 1)]
                  if model == "square" else [np.zeros(2)])
    for p0, p1 in a.segments(close=close):
        for q0, q1 in b.segments(close=close):
            for tr in translates:
                r = _seg_intersect(p0, p1, q0 + tr, q1 + tr)
                if r is None:
                    parallel_overlap = True
                elif r != 0:
                    count += 1
                    sign += r
    return count, sign, parallel_overlap


@dataclass
class IntersectionReport:
    counts: np.ndarray
    signs: np.ndarray
    warnings: list


def intersect_curves(sys: SurfaceCurveSystem) -> IntersectionReport:
    """Pairwise |alpha_i cap beta_j| with crossing signs.

    Parallel overlapping pairs are reported as 0 crossings with a warning
    (degenerate Heegaard data); vertex tangencies raise TangencyError.
    """
    g = max(len(sys.alphas), len(sys.betas))
    counts = np.zeros((len(sys.alphas), len(sys.betas)), dtype=int)
    signs = np.zeros_like(counts)
    warnings = []
    for i, a in enumerate(sys.alphas):
        for j, b in enumerate(sys.betas):
            c, s, par = _curve_crossings(a, b, sys.model)
            counts[i, j], signs[i, j] = c, s
            if par:
                warnings.append(f"{a.label} and {b.label} overlap in parallel; "
                                "count reported as crossings only")
    # alpha family must be mutually disjoint, same for beta
    for fam in (sys.alphas, sys.betas):
        for i in range(len(fam)):
            for j in range(i + 1, len(fam)):
                c, _, par = _curve_crossings(fam[i], fam[j], sys.model)
                if c > 0:
                    raise TangencyError(
                        f"{fam[i].label} meets {fam[j].label}: family not disjoint")
    return IntersectionReport(counts=counts, signs=signs, warnings=warnings)


# ---------------------------------------------------------------------------
# handle diagram
# ---------------------------------------------------------------------------


@dataclass
class FramedHandle:
    label: str
    base_curve: str
    side: int                    # +1 / -1 conormal component
    framing: int = 0             # conormal framing convention


@dataclass
class VanishingCycleRecord:
    label: str
    index: int
    conormal_piece: str
    handles: list


@dataclass
class HandleDiagram:
    genus: int
    handles: list
    records: list
    extremal_records: list

    def handle_count(self):
        return len(self.handles)


def build_handle_diagram(sys: SurfaceCurveSystem) -> HandleDiagram:
    """Emit the 4g framed attaching curves and the vanishing-cycle assembly."""
    intersect_curves(sys)
    handles = []
    records = []
    for j, a in enumerate(sys.alphas):
        pair = [FramedHandle(f"SN*{a.label}{s:+d}", a.label, s) for s in (+1, -1)]
        handles += pair
        records.append(VanishingCycleRecord(
            label=f"cycle[{a.label}]", index=1,
            conormal_piece=f"N*{a.label}", handles=[h.label for h in pair]))
    for l, b in enumerate(sys.betas):
        pair = [FramedHandle(f"SN*{b.label}{s:+d}", b.label, s) for s in (+1, -1)]
        handles += pair
        records.append(VanishingCycleRecord(
            label=f"cycle[{b.label}]", index=2,
            conormal_piece=f"N*{b.label}", handles=[h.label for h in pair]))
    extremal = [
        VanishingCycleRecord(
            label="cycle[min]", index=0,
            conormal_piece="Q surgered along the alpha cycles", handles=[]),
        VanishingCycleRecord(
            label="cycle[max]", index=3,
            conormal_piece="Q surgered along the beta cycles", handles=[]),
    ]
    return HandleDiagram(genus=sys.genus, handles=handles, records=records,
                         extremal_records=extremal)


@dataclass
class EulerReport:
    chi_Q: int
    chi_F: int
    crit_count: int
    chi_TM_consistency: int
    passed: bool

    def __str__(self):
        return (f"euler: chi(Q)={self.chi_Q}, chi(F)={self.chi_F}, "
                f"#crit={self.crit_count}, chi(F)-#crit={self.chi_TM_consistency} "
                f"({'pass' if self.passed else 'FAIL'})")


def euler_check(d: HandleDiagram) -> EulerReport:
    """chi(F) = chi(Q) + #handles = 2 + 2g; consistency chi(F) - #crit = 0."""
    g = d.genus
    chi_q = 2 - 2 * g
    chi_f = chi_q + d.handle_count()
    crit = 2 + 2 * g
    consistency = chi_f - crit
    expected = 2 + 2 * g
    passed = (chi_f == expected) and (consistency == 0) \
        and (d.handle_count() == 4 * g)
    return EulerReport(chi_Q=chi_q, chi_F=chi_f, crit_count=crit,
                       chi_TM_consistency=consistency, passed=passed)


# ---------------------------------------------------------------------------
# double-of-fiber projection check
# ---------------------------------------------------------------------------


@dataclass
class DoubleCheckReport:
    u: float
    n_rays: int
    max_g_over_p: float
    f_inf_min: float
    f_inf_max: float
    single_signed: bool
    unique_root_rays: int
    multi_root_rays: int
    min_root_radius: float
    homogeneous_fraction: float

    def __str__(self):
        return (f"double-check u={self.u}: |g|/|p| <= {self.max_g_over_p:.2e}, "
                f"f_inf in [{self.f_inf_min:.3f}, {self.f_inf_max:.3f}] "
                f"({'single-signed' if self.single_signed else 'MIXED SIGN'}), "
                f"unique-root rays {self.unique_root_rays}/{self.n_rays}, "
                f"min root radius {self.min_root_radius:.3f} "
                f"(fraction with root >= delta: {self.homogeneous_fraction:.2f})")


def double_check(al, u: float, rng=None, n_rays=300) -> DoubleCheckReport:
    """Project F_u along fiber rays to the sphere bundle and check membership.

    Samples rays (q, p-direction) with g = 0 and f_inf on the side of u,
    solves the radial equation f(r p) = u on (0, R], and verifies: g vanishes
    at the found points (so projections lie on SN*(nu)), f_inf is
    single-signed matching the side of u, and the radial root is unique per
    ray (monotonicity in the homogeneous range makes it unique on
    [delta, R]).
    """
    from .fibration import assembled_fibration, fiber_ray_roots_batch

    ms = al.ms
    rng = rng or np.random.default_rng(31)
    if abs(u) <= max(abs(c.value) for c in ms.crit):
        raise DomainError("double-check needs |u| beyond the critical range")
    side = 1.0 if u > 0 else -1.0
    delta = al.cp.delta
    r_cap = 4.0 * abs(u) / al.cp.C + 4.0 * delta
    max_g = 0.0
    fmin, fmax = np.inf, -np.inf
    unique = multi = 0
    min_root = np.inf
    n_homog = 0
    count = 0
    Q = ms.sample_base(rng, 2 * n_rays)
    cids = np.array([ms.chart_of(q) for q in Q])
    for cid in np.unique(cids):
        sel = cids == cid
        Wc, _ = ms.to_chart(cid, Q[sel], np.zeros((int(sel.sum()), ms.rep_dim)))
        nu = ms.nu_c(cid, Wc)
        ok = np.linalg.norm(nu, axis=1) > 1e-10
        Wc, nu = Wc[ok], nu[ok]
        perp = np.stack([-nu[:, 1], nu[:, 0]], axis=1)
        G = ms.ginv_c(cid, Wc)
        perp /= np.sqrt(np.einsum("ni,nij,nj->n", perp, G, perp))[:, None]
        finf = al.sf.value(ms, cid, Wc, perp)
        keep = side * finf > 1e-6
        Wc, perp, finf = Wc[keep], perp[keep], finf[keep]
        fib = assembled_fibration(al, cid=cid)
        rootlists = fiber_ray_roots_batch(al, cid, Wc, perp, u, r_max=r_cap)
        for i, roots in enumerate(rootlists):
            if len(roots) == 0 or count >= n_rays:
                continue
            count += 1
            if len(roots) == 1:
                unique += 1
            else:
                multi += 1
            r = roots[0]
            min_root = min(min_root, r)
            if r >= delta:
                n_homog += 1
            y = np.concatenate([Wc[i], r * perp[i]])
            gval = abs(fib.fg(y)[1])
            max_g = max(max_g, gval / max(r, 1e-30))
            fmin, fmax = min(fmin, finf[i]), max(fmax, finf[i])
    if count == 0:
        raise DomainError("no F_u ray samples found")
    single = (fmin > 0) if side > 0 else (fmax < 0)
    return DoubleCheckReport(
        u=u, n_rays=count, max_g_over_p=max_g,
        f_inf_min=fmin, f_inf_max=fmax, single_signed=bool(single),
        unique_root_rays=unique, multi_root_rays=multi,
        min_root_radius=float(min_root),
        homogeneous_fraction=n_homog / count,
    )
