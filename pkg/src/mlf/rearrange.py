"""Rearrangement of critical values: slope validation, blending, constants.

The assembled Lyapunov function takes the two-cutoff shape

    f|_{V_r} = tau0(r) f_r^0 + tau1(r) r f_inf,      f|_M = phi,

with tau0 = 1 on [0, delta/2], 0 beyond delta, |tau0'| <= 3/delta, and
tau1 = 0 on [0, eps/2], C beyond eps, |tau1'| < 3C/eps.  Along nu_tilde,

    nu_tilde . f = tau0 (nu_tilde . f^0) + tau1 r ((nu_bar . f_inf)
                   + upsilon f_inf) + r tau0' upsilon f_r^0
                   + r^2 tau1' upsilon f_inf,

which is certified positive by sampling the three regions {r >= delta},
{delta/2 <= r <= delta} and {r <= delta/2} while doubling C and halving eps.

Cutoff ramps use a shouldered profile (quintic shoulders around a linear
middle) whose peak slope is 1/(1 - shoulder) per unit width; with shoulder
0.3 over the half-width ramps this gives |tau0'| <= 2.86/delta, inside the
stated bounds, with exact plateaus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .complexify import ComplexificationMap, c_sphere_samples
from .geometry import DomainError, MorseSystem, PhasePoint
from .system import nu_bar_batch, nu_tilde_batch, upsilon_batch


def _sint(t):
    """Antiderivative of the quintic smoothstep, zero at 0 (value 1/2 at 1)."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (t * (t - 3.0) + 2.5)


class SmoothRamp:
    """Monotone C^2 ramp with exact plateaus and controlled peak slope.

    value = lo for r <= r0 and hi for r >= r1; the slope profile is a
    linear plateau with quintic shoulders of relative width `shoulder`,
    so max |value'| = |hi - lo| / ((1 - shoulder) (r1 - r0)).
    """

    def __init__(self, r0, r1, lo, hi, shoulder=0.3):
        if not r1 > r0:
            raise ValueError("ramp needs r1 > r0")
        if not 0.0 < shoulder < 0.5:
            raise ValueError("shoulder must be in (0, 1/2)")
        self.r0, self.r1, self.lo, self.hi = float(r0), float(r1), float(lo), float(hi)
        self.a = float(shoulder)

    def _unit(self, t):
        a = self.a
        t = np.asarray(t, dtype=float)
        norm = 1.0 - a
        lowpart = a * _sint(t / a)
        midpart = a / 2.0 + (t - a)
        highpart = (1.0 - a) - a * _sint((1.0 - t) / a)
        out = np.where(t <= a, lowpart, np.where(t < 1.0 - a, midpart, highpart))
        out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, norm, out))
        return out / norm

    def _unit_d(self, t):
        from .util import smoothstep
        a = self.a
        t = np.asarray(t, dtype=float)
        v = smoothstep(t / a) * smoothstep((1.0 - t) / a)
        v = np.where((t <= 0.0) | (t >= 1.0), 0.0, v)
        return v / (1.0 - a)

    def __call__(self, r):
        t = (np.asarray(r, dtype=float) - self.r0) / (self.r1 - self.r0)
        return self.lo + (self.hi - self.lo) * self._unit(t)

    def deriv(self, r):
        t = (np.asarray(r, dtype=float) - self.r0) / (self.r1 - self.r0)
        return (self.hi - self.lo) * self._unit_d(t) / (self.r1 - self.r0)

    def max_abs_slope(self):
        return abs(self.hi - self.lo) / ((1.0 - self.a) * (self.r1 - self.r0))


# ---------------------------------------------------------------------------
# slope functions
# ---------------------------------------------------------------------------


@dataclass
class SlopeFunction:
    """A candidate f_inf on the sphere bundle (0-homogeneous in p).

    value/grad are batched chart-coordinate evaluators; the A^+/A^- samplers
    produce phase points on the attractor/repeller cores (sphere conormal
    bundles of the unstable/stable manifolds).
    """

    name: str
    value: Callable            # (ms, cid, W, PW) -> (N,)
    grad: Callable             # (ms, cid, W, PW) -> (dW, dPW)
    a_plus: Callable           # (ms, rng, count) -> list[PhasePoint]
    a_minus: Callable
    zero_set: str = ""


def slope_base_function(phi_like=None) -> SlopeFunction:
    """Slope candidate f_inf = zeta(phi(q)) pulled back from the base.

    With zeta = id this is the library slope for the height scenarios: the
    Lyapunov combination is nu.phi + upsilon phi, positive because upsilon
    matches the sign of phi away from the equator band.
    """

    def value(ms, cid, W, PW):
        return ms.phi_c(cid, W)

    def grad(ms, cid, W, PW):
        return ms.dphi_c(cid, W), np.zeros_like(PW)

    def a_plus(ms, rng, count):
        out = []
        for k, c in enumerate(ms.crit):
            ind = int(np.sum(c.signature < 0))
            if ind == ms.n:      # E^+(a) = {a}: SN* is the full fiber sphere
                out += c_sphere_samples(ms, k, +1, 1.0, count, rng)
        return out

    def a_minus(ms, rng, count):
        out = []
        for k, c in enumerate(ms.crit):
            ind = int(np.sum(c.signature < 0))
            if ind == 0:
                out += c_sphere_samples(ms, k, -1, 1.0, count, rng)
        return out

    return SlopeFunction(
        name="base-height",
        value=value, grad=grad, a_plus=a_plus, a_minus=a_minus,
        zero_set="fiber circles over the phi = 0 level",
    )


def slope_upsilon_half() -> SlopeFunction:
    """The local-model candidate f_inf = upsilon / 2 (valid on quadric scenarios)."""

    def value(ms, cid, W, PW):
        return 0.5 * upsilon_batch(ms, cid, W, PW)

    def grad(ms, cid, W, PW, h=1e-6):
        # 0-homogeneity in p: differentiate at the normalized covector and
        # rescale, which keeps the finite-difference stencil off p = 0
        nrm = np.linalg.norm(PW, axis=1)
        Pn = PW / np.maximum(nrm, 1e-300)[:, None]
        dW = np.zeros_like(W)
        dP = np.zeros_like(PW)
        for i in range(ms.n):
            e = np.zeros(ms.n)
            e[i] = h
            dW[:, i] = (value(ms, cid, W + e, Pn) - value(ms, cid, W - e, Pn)) / (2 * h)
            dP[:, i] = (value(ms, cid, W, Pn + e) - value(ms, cid, W, Pn - e)) / (2 * h)
        return dW, dP / np.maximum(nrm, 1e-300)[:, None]

    def a_plus(ms, rng, count):
        out = []
        for k in range(len(ms.crit)):
            out += c_sphere_samples(ms, k, +1, 1.0, count, rng)
        return out

    def a_minus(ms, rng, count):
        out = []
        for k in range(len(ms.crit)):
            out += c_sphere_samples(ms, k, -1, 1.0, count, rng)
        return out

    return SlopeFunction(
        name="upsilon-half",
        value=value, grad=grad, a_plus=a_plus, a_minus=a_minus,
        zero_set="the dividing set {upsilon = 0}",
    )


# ---------------------------------------------------------------------------
# slope validation
# ---------------------------------------------------------------------------


@dataclass
class SlopeReport:
    passed: bool
    a_plus_min: float
    a_minus_max: float
    lyapunov_margin: float
    near_crit_min: float
    worst_sample: tuple | None

    def __str__(self):
        s = "pass" if self.passed else "FAIL"
        return (f"slope validation: {s}; f_inf on A^+ >= {self.a_plus_min:.3e}, "
                f"on A^- <= {self.a_minus_max:.3e}; min (nu_bar.f + ups f) = "
                f"{self.lyapunov_margin:.3e}; min ups*f over ST*U = {self.near_crit_min:.3e}")


def _slope_combination(ms, sf, cid, W, PW):
    """(nu_bar . f_inf) + upsilon f_inf, the positivity certificate integrand."""
    dW, dP = sf.grad(ms, cid, W, PW)
    qdot, pdot = nu_bar_batch(ms, cid, W, PW)
    nubar_f = np.einsum("ni,ni->n", dW, qdot) + np.einsum("ni,ni->n", dP, pdot)
    ups = upsilon_batch(ms, cid, W, PW)
    return nubar_f + ups * sf.value(ms, cid, W, PW)


def validate_slope(sf: SlopeFunction, ms: MorseSystem, rng=None,
                   n_samples=20000) -> SlopeReport:
    """Check the three slope conditions by sampling the unit sphere bundle."""
    from .complexify import sample_tube

    rng = rng or np.random.default_rng(13)

    def fval(x: PhasePoint):
        cid, w, pw = ms.phase_to_working(x)
        return float(sf.value(ms, cid, w[None], pw[None])[0])

    plus = [fval(x) for x in sf.a_plus(ms, rng, 64)]
    minus = [fval(x) for x in sf.a_minus(ms, rng, 64)]
    a_plus_min = min(plus) if plus else np.inf
    a_minus_max = max(minus) if minus else -np.inf

    Q, cids, W, PW = sample_tube(ms, rng, n_samples, r_max=1.0, fixed_r=1.0)
    margin = np.inf
    worst = None
    for cid in np.unique(cids):
        sel = cids == cid
        vals = _slope_combination(ms, sf, cid, W[sel], PW[sel])
        i = int(np.argmin(vals))
        if vals[i] < margin:
            margin = float(vals[i])
            worst = (cid, W[sel][i], PW[sel][i])

    near = np.inf
    for k, c in enumerate(ms.crit):
        dist = ms.base_distance(Q, c.location[None, :])
        sel = (dist < 0.9 * c.chi_radius) & (cids == c.chart_id)
        if not np.any(sel):
            continue
        ups = upsilon_batch(ms, c.chart_id, W[sel], PW[sel])
        vals = ups * sf.value(ms, c.chart_id, W[sel], PW[sel])
        near = min(near, float(vals.min()))

    passed = (a_plus_min > 0.0) and (a_minus_max < 0.0) and (margin > 0.0) \
        and (near > -1e-12)
    return SlopeReport(passed=passed, a_plus_min=a_plus_min, a_minus_max=a_minus_max,
                       lyapunov_margin=margin, near_crit_min=near, worst_sample=worst)


# ---------------------------------------------------------------------------
# cutoff pair and blending
# ---------------------------------------------------------------------------


@dataclass
class CutoffPair:
    delta: float
    epsilon: float
    C: float
    shoulder: float = 0.3
    tau0: SmoothRamp = field(init=False)
    tau1: SmoothRamp = field(init=False)

    def __post_init__(self):
        if not (self.delta > 0 and self.epsilon > 0 and self.C > 0):
            raise DomainError("cutoff parameters must be positive")
        if not self.epsilon <= self.delta / 4.0:
            raise DomainError("epsilon must be well below delta/2")
        self.tau0 = SmoothRamp(self.delta / 2.0, self.delta, 1.0, 0.0, self.shoulder)
        self.tau1 = SmoothRamp(self.epsilon / 2.0, self.epsilon, 0.0, self.C, self.shoulder)

    def validate(self, n_grid=2001):
        """Numerical certification of the stated profile invariants."""
        r = np.linspace(1e-9, 1.5 * self.delta, n_grid)
        t0, t1 = self.tau0(r), self.tau1(r)
        d0, d1 = self.tau0.deriv(r), self.tau1.deriv(r)
        checks = {
            "tau0 plateau 1": float(np.max(np.abs(t0[r <= self.delta / 2] - 1.0))),
            "tau0 plateau 0": float(np.max(np.abs(t0[r >= self.delta]))),
            "tau0 monotone": float(np.max(d0)),
            "tau0 slope bound": float(np.max(np.abs(d0)) - 3.0 / self.delta),
            "tau1 plateau 0": float(np.max(np.abs(t1[r <= self.epsilon / 2]))),
            "tau1 plateau C": float(np.max(np.abs(t1[r >= self.epsilon] - self.C))),
            "tau1 monotone": float(-np.min(d1)),
            "tau1 slope bound": float(np.max(np.abs(d1)) - 3.0 * self.C / self.epsilon),
            "disjoint supports": float(np.max(np.abs(d0 * d1))),
        }
        ok = all(v <= 1e-12 for v in checks.values())
        if not ok:
            raise DomainError(f"cutoff invariants violated: {checks}")
        return checks


class AssembledLyapunov:
    """f = tau0(r) f^0 + tau1(r) r f_inf with analytic phase gradients."""

    def __init__(self, cm: ComplexificationMap, sf: SlopeFunction, cp: CutoffPair):
        self.cm = cm
        self.sf = sf
        self.cp = cp
        self.ms = cm.ms

    def _radius(self, cid, W, PW):
        rho = self.ms.rho_c(cid, W, PW)
        return np.sqrt(np.maximum(2.0 * rho, 0.0))

    def f_batch(self, cid, W, PW):
        r = self._radius(cid, W, PW)
        out = self.cp.tau0(r) * self.cm.f0_batch(cid, W, PW)
        t1 = self.cp.tau1(r)
        live = t1 != 0.0
        if np.any(live):
            out[live] += t1[live] * r[live] * self.sf.value(self.ms, cid, W[live], PW[live])
        return out

    def df_batch(self, cid, W, PW):
        ms = self.ms
        r = self._radius(cid, W, PW)
        rho_w, rho_p = ms.drho_c(cid, W, PW)
        rsafe = np.maximum(r, 1e-300)
        dr_w, dr_p = rho_w / rsafe[:, None], rho_p / rsafe[:, None]
        f0 = self.cm.f0_batch(cid, W, PW)
        df0_w, df0_p = self.cm.df0_batch(cid, W, PW)
        t0, dt0 = self.cp.tau0(r), self.cp.tau0.deriv(r)
        t1, dt1 = self.cp.tau1(r), self.cp.tau1.deriv(r)
        dw = t0[:, None] * df0_w + (dt0 * f0)[:, None] * dr_w
        dp = t0[:, None] * df0_p + (dt0 * f0)[:, None] * dr_p
        live = (t1 != 0.0) | (dt1 != 0.0)
        if np.any(live):
            finf = self.sf.value(ms, cid, W[live], PW[live])
            dfinf_w, dfinf_p = self.sf.grad(ms, cid, W[live], PW[live])
            radial = (dt1[live] * r[live] + t1[live]) * finf
            dw[live] += radial[:, None] * dr_w[live] + (t1[live] * r[live])[:, None] * dfinf_w
            dp[live] += radial[:, None] * dr_p[live] + (t1[live] * r[live])[:, None] * dfinf_p
        return dw, dp

    def nu_tilde_f_batch(self, cid, W, PW):
        dw, dp = self.df_batch(cid, W, PW)
        qdot, pdot = nu_tilde_batch(self.ms, cid, W, PW)
        return np.einsum("ni,ni->n", dw, qdot) + np.einsum("ni,ni->n", dp, pdot)

    def f(self, x: PhasePoint) -> float:
        cid, w, pw = self.ms.phase_to_working(x)
        return float(self.f_batch(cid, w[None], pw[None])[0])

    def f_on_c_sphere(self, k: int, sign: int, r: float) -> float:
        """Value of f_r on the critical sphere C_a^{sign} (formula profile).

        Defined for every r > 0 via the characteristic directions even when
        the sphere is empty; equals tau0 (phi(a) + sign r^2) + tau1 r
        f_inf(C_a^{sign}).
        """
        c = self.ms.crit[k]
        mask = (c.signature < 0) if sign > 0 else (c.signature > 0)
        if int(mask.sum()) > 0:
            pw = np.zeros((1, self.ms.n))
            pw[0, np.argmax(mask)] = r
            w = np.zeros((1, self.ms.n))
            return float(self.f_batch(c.chart_id, w, pw)[0])
        # empty sphere: the formula value with f_inf evaluated at the point
        w = np.zeros((1, self.ms.n))
        pw = np.zeros((1, self.ms.n))
        pw[0, 0] = r
        finf = float(self.sf.value(self.ms, c.chart_id, w, pw)[0])
        t0, t1 = float(self.cp.tau0(r)), float(self.cp.tau1(r))
        return t0 * (c.value + sign * r * r) + t1 * r * finf


def blend(cm: ComplexificationMap, sf: SlopeFunction, cp: CutoffPair) -> AssembledLyapunov:
    """Assemble f after certifying the cutoff invariants."""
    cp.validate()
    return AssembledLyapunov(cm, sf, cp)


# ---------------------------------------------------------------------------
# the (epsilon, C) search
# ---------------------------------------------------------------------------


@dataclass
class ConstantsReport:
    cutoff: CutoffPair
    margins: dict
    iterations: list
    samples_per_region: int

    def __str__(self):
        m = ", ".join(f"{k}: {v:.3e}" for k, v in self.margins.items())
        return (f"constants: C={self.cutoff.C:g}, eps={self.cutoff.epsilon:g}, "
                f"delta={self.cutoff.delta:g}; margins {m}")


def region_margins(al: AssembledLyapunov, rng, n_per_region=20000,
                   exclusion_factor=1e-3):
    """Sampled min of nu_tilde . f in the three cutoff regions."""
    from .complexify import sample_tube, _away_from_crit

    ms = al.ms
    d = al.cp.delta
    out = {}
    for name, (rlo, rhi) in (("far", (d, 4.0 * d)),
                             ("middle", (d / 2.0, d)),
                             ("inner", (1e-6, d / 2.0))):
        Q, cids, W, PW = sample_tube(ms, rng, n_per_region, r_max=rhi, r_min=rlo)
        if name == "inner":
            keep = _away_from_crit(ms, Q, exclusion_factor * d)
        else:
            keep = np.ones(len(Q), dtype=bool)
        vals = np.full(len(Q), np.inf)
        for cid in np.unique(cids):
            sel = (cids == cid) & keep
            if np.any(sel):
                vals[sel] = al.nu_tilde_f_batch(cid, W[sel], PW[sel])
        out[name] = float(np.min(vals[keep]))
    return out


def search_constants(cm: ComplexificationMap, sf: SlopeFunction, delta: float,
                     rng=None, n_per_region=20000, budget=20,
                     C0=1.0, eps_frac=8.0) -> ConstantsReport:
    """Doubling search over (eps, C) until all three region margins are positive."""
    rng = rng or np.random.default_rng(17)
    C = float(C0)
    eps = delta / eps_frac
    iterations = []
    for it in range(budget):
        cp = CutoffPair(delta=delta, epsilon=eps, C=C)
        al = blend(cm, sf, cp)
        margins = region_margins(al, rng, n_per_region)
        iterations.append({"C": C, "eps": eps, **margins})
        if all(v > 0.0 for v in margins.values()):
            return ConstantsReport(cutoff=cp, margins=margins,
                                   iterations=iterations,
                                   samples_per_region=n_per_region)
        if margins["middle"] <= 0.0 or margins["far"] <= 0.0:
            C *= 2.0
        elif margins["inner"] <= 0.0:
            eps /= 2.0
    raise DomainError(f"constant search exhausted its budget: {iterations[-1]}")
