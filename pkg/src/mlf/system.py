"""The two lifts of the adapted gradient and basic phase-space fields.

g(p, q) = <p, nu(q)> is the metric-free pairing; its Hamiltonian field (with
the package convention X_F = (dF/dp, -dF/dq)) is the Liouville-form
preserving lift

    nu_tilde = (nu(q), -Dnu(q)^T p),

equal to 2 sum_j eps_j (q_j d/dq_j - p_j d/dp_j) in every Morse chart.  The
contact lift on the sphere bundle is nu_bar = nu_tilde - upsilon Z with Z the
fiberwise radial field and

    upsilon = (nu_tilde . rho) / (Z . rho),

which is 0-homogeneous in p and equals -2 sum eps_j p_j^2 / sum p_j^2 in a
Morse chart (so +2 on C_a^+ and -2 on C_a^-).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainError, MorseSystem, PhasePoint
from .ode import FlowResult, OdeConfig, flow


# ---------------------------------------------------------------------------
# pointwise fields (batched chart-coordinate versions + PhasePoint wrappers)
# ---------------------------------------------------------------------------


def eval_g_batch(ms: MorseSystem, cid, W, PW):
    return np.einsum("nj,nj->n", PW, ms.nu_c(cid, W))


def eval_g(x: PhasePoint, ms: MorseSystem) -> float:
    """g(p, q) = <p, nu(q)>, evaluated in the working chart."""
    cid, w, pw = ms.phase_to_working(x)
    return float(eval_g_batch(ms, cid, w[None], pw[None])[0])


def nu_tilde_batch(ms: MorseSystem, cid, W, PW):
    """Chart components of the Hamiltonian lift: (nu, -Dnu^T p)."""
    nu = ms.nu_c(cid, W)
    dn = ms.dnu_c(cid, W)
    return nu, -np.einsum("nji,nj->ni", dn, PW)


def upsilon_batch(ms: MorseSystem, cid, W, PW):
    rho = ms.rho_c(cid, W, PW)
    if np.any(rho <= 0):
        raise DomainError("upsilon undefined on the zero section (p = 0)")
    dw, dp = ms.drho_c(cid, W, PW)
    qdot, pdot = nu_tilde_batch(ms, cid, W, PW)
    nurho = np.einsum("ni,ni->n", dw, qdot) + np.einsum("ni,ni->n", dp, pdot)
    return nurho / (2.0 * rho)


def upsilon(x: PhasePoint, ms: MorseSystem) -> float:
    """upsilon = (nu_tilde . rho)/(Z . rho); r-independent along fiber rays."""
    cid, w, pw = ms.phase_to_working(x)
    return float(upsilon_batch(ms, cid, w[None], pw[None])[0])


def nu_bar_batch(ms: MorseSystem, cid, W, PW):
    """Chart components of the contact lift nu_bar = nu_tilde - upsilon Z."""
    qdot, pdot = nu_tilde_batch(ms, cid, W, PW)
    ups = upsilon_batch(ms, cid, W, PW)
    return qdot, pdot - ups[:, None] * PW


def hamiltonian_lift(x: PhasePoint, ms: MorseSystem):
    """Value of nu_tilde at x, as chart components (cid, qdot, pdot)."""
    cid, w, pw = ms.phase_to_working(x)
    qdot, pdot = nu_tilde_batch(ms, cid, w[None], pw[None])
    return cid, qdot[0], pdot[0]


def contact_lift(x: PhasePoint, ms: MorseSystem):
    """Value of nu_bar at x (tangent to the sphere bundle V_r through x)."""
    cid, w, pw = ms.phase_to_working(x)
    qdot, pdot = nu_bar_batch(ms, cid, w[None], pw[None])
    return cid, qdot[0], pdot[0]


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------


def _pack(x: PhasePoint):
    return np.concatenate([x.q, x.p])


def _unpack(ms, y):
    d = ms.rep_dim
    return PhasePoint(q=ms.reduce_q(y[:d]), p=y[d:])


def flow_nu_tilde(ms: MorseSystem, x0: PhasePoint, T: float, cfg: OdeConfig) -> FlowResult:
    """Flow of the Hamiltonian lift; g is the monitored first integral."""
    d = ms.rep_dim

    def rhs(t, y):
        return ms.nu_tilde_rhs(y)

    def g_of(y):
        return eval_g(_unpack(ms, y), ms)

    invariants = {"g": g_of, "constraints": ms.constraint_drift}
    res = flow(rhs, _pack(x0), T, cfg, invariants=invariants,
               escape_norm=lambda y: float(np.linalg.norm(y[d:])))
    return res


def flow_nu_bar(ms: MorseSystem, x0: PhasePoint, T: float, cfg: OdeConfig) -> FlowResult:
    """Flow of the contact lift; rho is the monitored first integral."""
    d = ms.rep_dim

    def rhs(t, y):
        x = _unpack(ms, y)
        cid, w, pw = ms.phase_to_working(x)
        ups = upsilon_batch(ms, cid, w[None], pw[None])[0]
        nt = ms.nu_tilde_rhs(y)
        return nt - ups * np.concatenate([np.zeros(d), y[d:]])

    def rho_of(y):
        x = _unpack(ms, y)
        cid, w, pw = ms.phase_to_working(x)
        return float(ms.rho_c(cid, w[None], pw[None])[0])

    invariants = {"rho": rho_of, "constraints": ms.constraint_drift}
    return flow(rhs, _pack(x0), T, cfg, invariants=invariants,
                escape_norm=lambda y: float(np.linalg.norm(y[d:])))


def flow_base(ms: MorseSystem, q0, T: float, cfg: OdeConfig, n_samples=257) -> FlowResult:
    """Flow of nu on the base manifold (used by the Morse-Smale detector)."""
    if hasattr(ms, "nu_ambient"):
        rhs = lambda t, q: ms.nu_ambient(q)
    else:
        rhs = lambda t, q: ms.nu_c(0, ms.reduce_q(np.asarray(q))[None, :])[0]
    return flow(rhs, np.asarray(q0, dtype=float), T, cfg,
                escape_norm=lambda y: float(np.linalg.norm(y)), n_samples=n_samples)


# ---------------------------------------------------------------------------
# adapted-gradient certification
# ---------------------------------------------------------------------------


@dataclass
class AdaptedGradientReport:
    passed: bool
    min_margin: float
    n_samples: int
    normal_form_error: float
    offenders: list

    def __str__(self):
        s = "pass" if self.passed else "FAIL"
        return (f"adapted-gradient: {s}, min nu.phi margin {self.min_margin:.3e} "
                f"over {self.n_samples} samples, chart normal-form error "
                f"{self.normal_form_error:.2e}")


def check_adapted_gradient(ms: MorseSystem, rng=None, n_samples=4000,
                           margin_tol=0.0, nf_tol=1e-10) -> AdaptedGradientReport:
    """Certify nu . phi > 0 away from chart balls and exact chart normal forms.

    The normal-form check evaluates phi and nu at samples inside each chart
    ball and compares with phi(a) + sum eps q^2 and 2 sum eps q d/dq.
    """
    rng = rng or np.random.default_rng(0)
    Q = ms.sample_base(rng, n_samples)
    keep = np.ones(len(Q), dtype=bool)
    for k, c in enumerate(ms.crit):
        keep &= ms.base_distance(Q, c.location[None, :]) > 0.75 * c.ball_radius
    Q = Q[keep]
    cids = np.array([ms.chart_of(q) for q in Q])
    margins = np.empty(len(Q))
    for cid in np.unique(cids):
        sel = cids == cid
        W, _ = ms.to_chart(cid, Q[sel], np.zeros_like(Q[sel]))
        margins[sel] = np.einsum("ni,ni->n", ms.nu_c(cid, W), ms.dphi_c(cid, W))
    offenders = [Q[i] for i in np.nonzero(margins <= margin_tol)[0][:10]]

    nf_err = 0.0
    for k, c in enumerate(ms.crit):
        s = rng.uniform(-1.0, 1.0, size=(200, ms.n)) * c.ball_radius
        s = s[np.linalg.norm(s, axis=1) < c.ball_radius]
        Qg, _ = ms.crit_chart_to_global(k, s, np.zeros_like(s))
        W, _ = ms.to_chart(c.chart_id, Qg, np.zeros((len(Qg), ms.rep_dim)))
        phi = ms.phi_c(c.chart_id, W)
        model = c.value + np.einsum("j,nj->n", c.signature, s * s)
        nu = ms.nu_c(c.chart_id, W)
        nf_err = max(nf_err,
                     float(np.max(np.abs(phi - model))),
                     float(np.max(np.abs(nu - 2.0 * c.signature * s))))
    passed = (len(offenders) == 0) and (nf_err < nf_tol)
    return AdaptedGradientReport(
        passed=passed,
        min_margin=float(margins.min()) if len(margins) else np.nan,
        n_samples=int(len(Q)),
        normal_form_error=nf_err,
        offenders=offenders,
    )
