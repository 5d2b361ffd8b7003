"""Manifold backends and Morse data.

Three backends cover every scenario: a global Euclidean chart (the quadric
local models), a flat torus with periodic coordinates, and an embedded sphere
S^n in R^{n+1} handled through two exact hemisphere charts

    sigma_S(w) = (sqrt(2-|w|^2) w, |w|^2 - 1),
    sigma_N(w) = (sqrt(2-|w|^2) w, 1 - |w|^2),

in which the height function is *exactly* |w|^2 - 1 (resp. 1 - |w|^2), so the
Morse normal form holds globally in each chart.  The Riemannian metric on the
sphere blends the two chart-Euclidean metrics with a quintic weight in the
height, so it is exactly Euclidean in a ball around each pole; the downhill
chart gradient is then exactly 2 sum_j eps_j w_j d/dw_j there.

Conventions fixed once for the whole package (chart cotangent coordinates
(q, p), omega = sum dp_j ^ dq_j):

  * Hamiltonian field of F:  X_F = (dF/dp, -dF/dq).
  * Hamiltonian lift of nu:  nu_tilde = X_g = (nu(q), -Dnu(q)^T p) for
    g(p, q) = <p, nu(q)>; in a Morse chart this is
    2 sum_j eps_j (q_j d/dq_j - p_j d/dp_j).
  * Fiberwise radial (Liouville) field: Z = (0, p).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .util import (
    bump,
    bump_d,
    bump_dd,
    smoothstep,
    smoothstep_d,
    unit_sphere_samples,
)


class DomainError(ValueError):
    """Point outside the declared domain of an evaluator."""


@dataclass
class PhasePoint:
    """A point (q, p) of T*M in the backend's global representation.

    For the embedded sphere, q is a unit vector in R^{n+1} and p an ambient
    vector with p.q = 0 (the covector <p, .> restricted to the tangent plane).
    """

    q: np.ndarray
    p: np.ndarray
    chart_id: int = 0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise DomainError("non-finite phase point")


@dataclass
class CriticalPoint:
    index: int
    location: np.ndarray        # global representation
    signature: np.ndarray       # eps in {-1,+1}^n, chart-axis aligned
    value: float
    chart_id: int               # working chart containing the point
    ball_radius: float          # exact normal-form radius (chart coords)
    chi_radius: float           # outer support radius of the h^0 cutoff


class MorseSystem:
    """Base interface: chart-routed analytic evaluators plus flow plumbing.

    Batched methods take W (N, n) chart base coordinates and PW (N, n) chart
    covector coordinates; `cid` selects the working chart.
    """

    name: str = "?"
    n: int = 0
    rep_dim: int = 0
    crit: list[CriticalPoint] = []

    # -- routing ---------------------------------------------------------
    def chart_of(self, q: np.ndarray) -> int:
        return 0

    def to_chart(self, cid, Q, P):
        raise NotImplementedError

    def from_chart(self, cid, W, PW):
        raise NotImplementedError

    def phase_to_working(self, x: PhasePoint):
        cid = self.chart_of(x.q)
        W, PW = self.to_chart(cid, x.q[None, :], x.p[None, :])
        return cid, W[0], PW[0]

    # -- chart-coordinate fields -----------------------------------------
    def phi_c(self, cid, W):
        raise NotImplementedError

    def dphi_c(self, cid, W):
        raise NotImplementedError

    def d2phi_c(self, cid, W):
        raise NotImplementedError

    def nu_c(self, cid, W):
        raise NotImplementedError

    def dnu_c(self, cid, W):
        raise NotImplementedError

    def ginv_c(self, cid, W):
        raise NotImplementedError

    def rho_c(self, cid, W, PW):
        G = self.ginv_c(cid, W)
        return 0.5 * np.einsum("ni,nij,nj->n", PW, G, PW)

    def drho_c(self, cid, W, PW):
        """Returns (d rho/dW, d rho/dPW); default finite differences in W."""
        G = self.ginv_c(cid, W)
        dp = np.einsum("nij,nj->ni", G, PW)
        h = 1e-6
        dw = np.zeros_like(W)
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = h
            dw[:, i] = (self.rho_c(cid, W + e, PW) - self.rho_c(cid, W - e, PW)) / (2 * h)
        return dw, dp

    # -- h^0 cutoff pieces -------------------------------------------------
    def chi_c(self, cid, W):
        """Cutoff chi(q): 1 near each critical point, 0 outside chi_radius."""
        raise NotImplementedError

    def dchi_c(self, cid, W):
        raise NotImplementedError

    def h0_quad_c(self, cid, W, PW):
        """(1/2) chi(q) Hess phi(p, p), the quadratic part of f^0.

        Inside each Morse ball this is exactly sum_j eps_j p_j^2 (the chart
        Hessian is the constant 2 diag(eps) there and the metric Euclidean);
        the cutoff kills it before the chart data stops being exact.
        """
        raise NotImplementedError

    def dh0_quad_c(self, cid, W, PW):
        raise NotImplementedError

    # -- global plumbing ---------------------------------------------------
    def sample_base(self, rng, count):
        raise NotImplementedError

    def reduce_q(self, q):
        return q

    def crit_chart_coords(self, k, Q, P):
        """Phase coordinates centered on critical point k (axes = signature axes)."""
        raise NotImplementedError

    def crit_chart_to_global(self, k, W, PW):
        raise NotImplementedError

    def base_distance(self, Qa, Qb):
        """Coarse base-point distance used for approach detection."""
        return np.linalg.norm(Qa - Qb, axis=-1)

    # ambient right-hand side of the nu_tilde flow (y = concat(q, p))
    def nu_tilde_rhs(self, y):
        raise NotImplementedError

    def constraint_drift(self, y):
        """Diagnostics for representation constraints (zero where exact)."""
        return 0.0

    def chart_str(self) -> str:
        return f"{self.name}: n={self.n}, crit={[c.value for c in self.crit]}"


# ---------------------------------------------------------------------------
# Euclidean global chart (quadric local models)
# ---------------------------------------------------------------------------


class EuclideanMorseSystem(MorseSystem):
    """R^n with phi = offset + sum eps_j q_j^2 and nu = 2 sum eps_j q_j d_j.

    The whole space is one exact Morse chart; the metric is Euclidean.
    """

    def __init__(self, n, signature, offset=0.0, name=None, ball_radius=6.0):
        signature = np.asarray(signature, dtype=float)
        if signature.shape != (n,) or not np.all(np.abs(signature) == 1.0):
            raise ValueError("signature must be eps in {-1,+1}^n")
        self.n = n
        self.rep_dim = n
        self.eps = signature
        self.offset = float(offset)
        k = int(np.sum(signature < 0))
        self.name = name or f"quadric-n{n}-k{k}"
        self.crit = [
            CriticalPoint(
                index=0,
                location=np.zeros(n),
                signature=signature.copy(),
                value=self.offset,
                chart_id=0,
                ball_radius=ball_radius,
                chi_radius=2.0 * ball_radius,
            )
        ]

    def chart_of(self, q):
        return 0

    def to_chart(self, cid, Q, P):
        return np.array(Q, dtype=float), np.array(P, dtype=float)

    def from_chart(self, cid, W, PW):
        return np.array(W, dtype=float), np.array(PW, dtype=float)

    def phi_c(self, cid, W):
        return self.offset + np.einsum("j,nj->n", self.eps, W * W)

    def dphi_c(self, cid, W):
        return 2.0 * self.eps * W

    def d2phi_c(self, cid, W):
        return np.broadcast_to(2.0 * np.diag(self.eps), (W.shape[0], self.n, self.n)).copy()

    def nu_c(self, cid, W):
        return 2.0 * self.eps * W

    def dnu_c(self, cid, W):
        return np.broadcast_to(2.0 * np.diag(self.eps), (W.shape[0], self.n, self.n)).copy()

    def ginv_c(self, cid, W):
        return np.broadcast_to(np.eye(self.n), (W.shape[0], self.n, self.n)).copy()

    def rho_c(self, cid, W, PW):
        return 0.5 * np.einsum("nj,nj->n", PW, PW)

    def drho_c(self, cid, W, PW):
        return np.zeros_like(W), np.array(PW, dtype=float)

    def chi_c(self, cid, W):
        return np.ones(W.shape[0])

    def dchi_c(self, cid, W):
        return np.zeros_like(W)

    def h0_quad_c(self, cid, W, PW):
        return np.einsum("j,nj->n", self.eps, PW * PW)

    def dh0_quad_c(self, cid, W, PW):
        return np.zeros_like(W), 2.0 * self.eps * PW

    def sample_base(self, rng, count, radius=1.5):
        v = rng.standard_normal((count, self.n))
        r = rng.uniform(0.05, radius, size=count)
        return v / np.linalg.norm(v, axis=1, keepdims=True) * r[:, None]

    def crit_chart_coords(self, k, Q, P):
        return np.array(Q, dtype=float), np.array(P, dtype=float)

    def crit_chart_to_global(self, k, W, PW):
        return np.array(W, dtype=float), np.array(PW, dtype=float)

    def nu_tilde_rhs(self, y):
        q, p = y[: self.n], y[self.n:]
        return np.concatenate([2.0 * self.eps * q, -2.0 * self.eps * p])

    def constraint_drift(self, y):
        return 0.0


# ---------------------------------------------------------------------------
# Flat torus
# ---------------------------------------------------------------------------


def _wrap(x, period=2.0 * np.pi):
    """Wrap to [-period/2, period/2)."""
    return (np.asarray(x, dtype=float) + 0.5 * period) % period - 0.5 * period


class TorusPhi:
    """Scalar field on the flat torus with value/grad/hess closures."""

    def __init__(self, value, grad, hess):
        self.value, self.grad, self.hess = value, grad, hess


class TorusMorseSystem(MorseSystem):
    """Flat 2-torus (R/2piZ)^2 with the Euclidean metric.

    phi is supplied by the scenario library; the Morse charts are coordinate
    translations, so the flat metric is the chart-Euclidean metric and the
    normal forms are exact inside each ball by construction.
    """

    def __init__(self, phi_model: TorusPhi, crit: list[CriticalPoint], name="torus"):
        self.n = 2
        self.rep_dim = 2
        self.phi_model = phi_model
        self.crit = crit
        self.name = name
        self.period = 2.0 * np.pi

    def chart_of(self, q):
        return 0

    def reduce_q(self, q):
        return np.asarray(q, dtype=float) % self.period

    def to_chart(self, cid, Q, P):
        return self.reduce_q(Q), np.array(P, dtype=float)

    def from_chart(self, cid, W, PW):
        return self.reduce_q(W), np.array(PW, dtype=float)

    def phi_c(self, cid, W):
        return self.phi_model.value(W)

    def dphi_c(self, cid, W):
        return self.phi_model.grad(W)

    def d2phi_c(self, cid, W):
        return self.phi_model.hess(W)

    def nu_c(self, cid, W):
        return self.phi_model.grad(W)

    def dnu_c(self, cid, W):
        return self.phi_model.hess(W)

    def ginv_c(self, cid, W):
        return np.broadcast_to(np.eye(2), (W.shape[0], 2, 2)).copy()

    def rho_c(self, cid, W, PW):
        return 0.5 * np.einsum("nj,nj->n", PW, PW)

    def drho_c(self, cid, W, PW):
        return np.zeros_like(W), np.array(PW, dtype=float)

    def chi_c(self, cid, W):
        out = np.zeros(W.shape[0])
        for c in self.crit:
            d = np.linalg.norm(_wrap(W - c.location), axis=1)
            out = out + bump(d, c.ball_radius, c.chi_radius)
        return np.minimum(out, 1.0)

    def dchi_c(self, cid, W):
        out = np.zeros_like(W)
        for c in self.crit:
            s = _wrap(W - c.location)
            d = np.linalg.norm(s, axis=1)
            mask = (d > c.ball_radius) & (d < c.chi_radius) & (d > 1e-12)
            if np.any(mask):
                coef = bump_d(d[mask], c.ball_radius, c.chi_radius) / d[mask]
                out[mask] += coef[:, None] * s[mask]
        return out

    def h0_quad_c(self, cid, W, PW):
        out = np.zeros(W.shape[0])
        for c in self.crit:
            d = np.linalg.norm(_wrap(W - c.location), axis=1)
            quad = np.einsum("j,nj->n", c.signature, PW * PW)
            out += bump(d, c.ball_radius, c.chi_radius) * quad
        return out

    def dh0_quad_c(self, cid, W, PW):
        dq = np.zeros_like(W)
        dp = np.zeros_like(PW)
        for c in self.crit:
            s = _wrap(W - c.location)
            d = np.linalg.norm(s, axis=1)
            chi = bump(d, c.ball_radius, c.chi_radius)
            quad = np.einsum("j,nj->n", c.signature, PW * PW)
            mask = (d > c.ball_radius) & (d < c.chi_radius) & (d > 1e-12)
            if np.any(mask):
                coef = bump_d(d[mask], c.ball_radius, c.chi_radius) / d[mask]
                dq[mask] += (coef * quad[mask])[:, None] * s[mask]
            dp += (2.0 * chi)[:, None] * (c.signature * PW)
        return dq, dp

    def sample_base(self, rng, count):
        return rng.uniform(0.0, self.period, size=(count, 2))

    def crit_chart_coords(self, k, Q, P):
        return _wrap(np.asarray(Q, dtype=float) - self.crit[k].location), np.array(P, dtype=float)

    def crit_chart_to_global(self, k, W, PW):
        return self.reduce_q(np.asarray(W, dtype=float) + self.crit[k].location), np.array(PW, dtype=float)

    def base_distance(self, Qa, Qb):
        return np.linalg.norm(_wrap(np.asarray(Qa) - np.asarray(Qb)), axis=-1)

    def nu_tilde_rhs(self, y):
        q, p = y[:2][None, :], y[2:]
        nu = self.phi_model.grad(q)[0]
        dn = self.phi_model.hess(q)[0]
        return np.concatenate([nu, -dn.T @ p])

    def constraint_drift(self, y):
        return 0.0


# ---------------------------------------------------------------------------
# Embedded sphere S^n in R^{n+1}, two exact hemisphere charts
# ---------------------------------------------------------------------------

CHART_S, CHART_N = 0, 1


class SphereMorseSystem(MorseSystem):
    """S^n with phi = height, the blended chart-Euclidean metric, nu = grad phi.

    Chart S covers q_z < 1, chart N covers q_z > -1; the working chart is
    picked by hemisphere.  All pointwise evaluators are closed-form; the
    ambient nu_tilde flow uses the degree-one homogeneous extension
    nu_hat(x) = |x| nu(x/|x|), which preserves |q| = 1 and p.q = 0.
    """

    def __init__(self, n=2, ball_radius=0.6, blend_height=0.5, name=None):
        self.n = n
        self.rep_dim = n + 1
        self.name = name or f"sphere{n}-height"
        self.ball_radius = float(ball_radius)       # chart radius of exact region
        self.blend_height = float(blend_height)      # metric blends over |q_z| <= this
        self.chi_outer = 0.85
        # the exact normal-form balls must sit inside the pure-metric zone
        if 1.0 - self.ball_radius**2 < self.blend_height - 1e-12:
            raise ValueError("chart balls must stay inside the pure-metric zone")
        s_pole = np.zeros(n + 1)
        s_pole[-1] = -1.0
        n_pole = -s_pole
        ones = np.ones(n)
        self.crit = [
            CriticalPoint(0, s_pole, +ones, -1.0, CHART_S, self.ball_radius, self.chi_outer),
            CriticalPoint(n, n_pole, -ones, +1.0, CHART_N, self.ball_radius, self.chi_outer),
        ]

    # -- chart maps --------------------------------------------------------
    def chart_of(self, q):
        return CHART_N if q[-1] > 0.0 else CHART_S

    def _zsign(self, cid):
        return -1.0 if cid == CHART_S else 1.0

    def chart_point(self, cid, W):
        W = np.atleast_2d(W)
        u2 = np.einsum("nj,nj->n", W, W)
        h = np.sqrt(np.maximum(2.0 - u2, 1e-15))[:, None] * W
        z = self._zsign(cid) * (1.0 - u2)
        return np.concatenate([h, z[:, None]], axis=1)

    def chart_coords(self, cid, Q):
        Q = np.atleast_2d(Q)
        denom = np.sqrt(np.maximum(1.0 + self._zsign(cid) * Q[:, -1], 1e-15))
        return Q[:, :-1] / denom[:, None]

    def chart_jac(self, cid, W):
        """J_sigma(w): (N, n+1, n) Jacobian of the chart parameterization."""
        W = np.atleast_2d(W)
        N = W.shape[0]
        u2 = np.einsum("nj,nj->n", W, W)
        s = np.sqrt(np.maximum(2.0 - u2, 1e-15))
        J = np.zeros((N, self.n + 1, self.n))
        J[:, : self.n, :] = s[:, None, None] * np.eye(self.n)
        J[:, : self.n, :] -= np.einsum("ni,nj->nij", W, W) / s[:, None, None]
        J[:, self.n, :] = -2.0 * self._zsign(cid) * W
        return J

    def to_chart(self, cid, Q, P):
        Q = np.atleast_2d(Q)
        P = np.atleast_2d(P)
        W = self.chart_coords(cid, Q)
        J = self.chart_jac(cid, W)
        PW = np.einsum("nij,ni->nj", J, P)
        return W, PW

    def from_chart(self, cid, W, PW):
        W = np.atleast_2d(W)
        PW = np.atleast_2d(PW)
        Q = self.chart_point(cid, W)
        J = self.chart_jac(cid, W)
        gram = np.einsum("nik,nil->nkl", J, J)
        coef = np.linalg.solve(gram, PW[..., None])[..., 0]
        P = np.einsum("nij,nj->ni", J, coef)
        return Q, P

    # -- metric weights ----------------------------------------------------
    def _blend_m(self, z):
        """Weight of the N-chart-Euclidean metric as a function of height."""
        b = self.blend_height
        return smoothstep((np.asarray(z, dtype=float) + b) / (2.0 * b))

    def _blend_m_d(self, z):
        b = self.blend_height
        return smoothstep_d((np.asarray(z, dtype=float) + b) / (2.0 * b)) / (2.0 * b)

    def _pr_profiles(self, cid, W, with_deriv=False):
        """Tangential/radial co-metric weights P(u), R(u) (and derivatives)."""
        W = np.atleast_2d(W)
        u2 = np.einsum("nj,nj->n", W, W)
        u = np.sqrt(u2)
        z = self._zsign(cid) * (1.0 - u2)
        m = self._blend_m(z)
        if cid == CHART_S:
            a, b = 1.0 - m, m
        else:
            a, b = m, 1.0 - m
        safe = np.maximum(u2, 1e-14)
        kt = (2.0 - u2) / safe
        kr = u2 / np.maximum(2.0 - u2, 1e-14)
        P = a + b * kt
        R = a + b * kr
        if not with_deriv:
            return u, P, R
        dm = self._blend_m_d(z) * (-self._zsign(cid)) * 2.0 * u
        if cid == CHART_S:
            da, db = -dm, dm
        else:
            da, db = dm, -dm
        dkt = -4.0 / np.maximum(u * safe, 1e-14)
        dkr = 4.0 * u / np.maximum((2.0 - u2) ** 2, 1e-14)
        dP = da + db * kt + b * dkt
        dR = da + db * kr + b * dkr
        # inside the pure plateau everything is constant
        pure = b == 0.0
        dP = np.where(pure, 0.0, dP)
        dR = np.where(pure, 0.0, dR)
        return u, P, R, dP, dR

    def ginv_c(self, cid, W):
        W = np.atleast_2d(W)
        N = W.shape[0]
        u, P, R = self._pr_profiles(cid, W)
        out = np.zeros((N, self.n, self.n))
        eye = np.eye(self.n)
        small = u < 1e-8
        what = np.where(small[:, None], 0.0, W / np.maximum(u, 1e-14)[:, None])
        proj = np.einsum("ni,nj->nij", what, what)
        out = (1.0 / P)[:, None, None] * (eye[None, :, :] - proj) + (1.0 / R)[:, None, None] * proj
        out[small] = eye
        return out

    def phi_c(self, cid, W):
        W = np.atleast_2d(W)
        u2 = np.einsum("nj,nj->n", W, W)
        return self._zsign(cid) * (1.0 - u2)

    def dphi_c(self, cid, W):
        return -2.0 * self._zsign(cid) * np.atleast_2d(W)

    def d2phi_c(self, cid, W):
        W = np.atleast_2d(W)
        return np.broadcast_to(-2.0 * self._zsign(cid) * np.eye(self.n), (W.shape[0], self.n, self.n)).copy()

    def nu_c(self, cid, W):
        W = np.atleast_2d(W)
        u, P, R = self._pr_profiles(cid, W)
        sgn = -self._zsign(cid)  # +1 in S-chart (phi = |w|^2-1), -1 in N-chart
        return (2.0 * sgn / R)[:, None] * W

    def dnu_c(self, cid, W):
        W = np.atleast_2d(W)
        N = W.shape[0]
        u, P, R, dP, dR = self._pr_profiles(cid, W, with_deriv=True)
        sgn = -self._zsign(cid)
        eye = np.eye(self.n)
        small = u < 1e-8
        what = np.where(small[:, None], 0.0, W / np.maximum(u, 1e-14)[:, None])
        proj = np.einsum("ni,nj->nij", what, what)
        out = (2.0 * sgn / R)[:, None, None] * eye[None, :, :]
        out -= (2.0 * sgn * dR * u / (R * R))[:, None, None] * proj
        out[small] = 2.0 * sgn * eye
        return out

    def rho_c(self, cid, W, PW):
        W, PW = np.atleast_2d(W), np.atleast_2d(PW)
        u, P, R = self._pr_profiles(cid, W)
        S = np.einsum("nj,nj->n", PW, PW)
        c = np.where(u < 1e-8, 0.0, np.einsum("nj,nj->n", PW, W) / np.maximum(u, 1e-14))
        return 0.5 * ((S - c * c) / P + c * c / R)

    def drho_c(self, cid, W, PW):
        W, PW = np.atleast_2d(W), np.atleast_2d(PW)
        u, P, R, dP, dR = self._pr_profiles(cid, W, with_deriv=True)
        S = np.einsum("nj,nj->n", PW, PW)
        small = u < 1e-8
        usafe = np.maximum(u, 1e-14)
        what = np.where(small[:, None], 0.0, W / usafe[:, None])
        c = np.einsum("nj,nj->n", PW, what)
        pperp = PW - c[:, None] * what
        dw = (c * (1.0 / R - 1.0 / P) / usafe)[:, None] * pperp
        dw -= 0.5 * ((S - c * c) * dP / (P * P) + c * c * dR / (R * R))[:, None] * what
        dw[small] = 0.0
        dp = (1.0 / P)[:, None] * pperp + (c / R)[:, None] * what
        dp[small] = PW[small]
        return dw, dp

    def chi_c(self, cid, W):
        W = np.atleast_2d(W)
        u = np.linalg.norm(W, axis=1)
        return bump(u, self.ball_radius, self.chi_outer)

    def dchi_c(self, cid, W):
        W = np.atleast_2d(W)
        u = np.linalg.norm(W, axis=1)
        out = np.zeros_like(W)
        mask = (u > self.ball_radius) & (u < self.chi_outer)
        if np.any(mask):
            coef = bump_d(u[mask], self.ball_radius, self.chi_outer) / u[mask]
            out[mask] = coef[:, None] * W[mask]
        return out

    def h0_quad_c(self, cid, W, PW):
        # the pole of chart `cid` is the only critical point with chi-support here
        eps = 1.0 if cid == CHART_S else -1.0
        quad = eps * np.einsum("nj,nj->n", np.atleast_2d(PW), np.atleast_2d(PW))
        return self.chi_c(cid, W) * quad

    def dh0_quad_c(self, cid, W, PW):
        W, PW = np.atleast_2d(W), np.atleast_2d(PW)
        eps = 1.0 if cid == CHART_S else -1.0
        quad = eps * np.einsum("nj,nj->n", PW, PW)
        chi = self.chi_c(cid, W)
        dq = self.dchi_c(cid, W) * quad[:, None]
        dp = (2.0 * eps * chi)[:, None] * PW
        return dq, dp

    # -- global plumbing ----------------------------------------------------
    def sample_base(self, rng, count):
        v = rng.standard_normal((count, self.rep_dim))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def crit_chart_coords(self, k, Q, P):
        cid = self.crit[k].chart_id
        W, PW = self.to_chart(cid, Q, P)
        sgn = 1.0
        return sgn * W, sgn * PW

    def crit_chart_to_global(self, k, W, PW):
        cid = self.crit[k].chart_id
        return self.from_chart(cid, W, PW)

    def base_distance(self, Qa, Qb):
        return np.linalg.norm(np.asarray(Qa) - np.asarray(Qb), axis=-1)

    def _alpha_beta(self, e):
        """Profiles of nu on the unit sphere: nu = (alpha(e) q_h, beta(e)).

        e is the height coordinate; derived from the chart formula
        nu = +-(2/R) w pushed to ambient coordinates.  Returns
        (alpha, beta, alpha', beta'); exact on the metric plateaus.
        """
        e = float(e)
        if e <= 0.0:
            u = np.sqrt(max(1.0 + e, 0.0))
            _, P, R, dP, dR = self._pr_profiles(CHART_S, np.array([[u] + [0.0] * (self.n - 1)]),
                                                with_deriv=True)
            R, dR = float(R[0]), float(dR[0])
            uprime = 0.0 if dR == 0.0 else 1.0 / (2.0 * max(u, 1e-14))
            D = R * (1.0 - e)
            Dp = dR * uprime * (1.0 - e) - R
            alpha = -4.0 * e / D
            alphap = -4.0 * (D - e * Dp) / (D * D)
            beta = 4.0 * (1.0 + e) / R
            betap = 4.0 * (R - (1.0 + e) * dR * uprime) / (R * R)
        else:
            u = np.sqrt(max(1.0 - e, 0.0))
            _, P, R, dP, dR = self._pr_profiles(CHART_N, np.array([[u] + [0.0] * (self.n - 1)]),
                                                with_deriv=True)
            R, dR = float(R[0]), float(dR[0])
            uprime = 0.0 if dR == 0.0 else -1.0 / (2.0 * max(u, 1e-14))
            D = R * (1.0 + e)
            Dp = dR * uprime * (1.0 + e) + R
            alpha = -4.0 * e / D
            alphap = -4.0 * (D - e * Dp) / (D * D)
            beta = 4.0 * (1.0 - e) / R
            betap = 4.0 * (-R - (1.0 - e) * dR * uprime) / (R * R)
        return alpha, beta, alphap, betap

    def nu_ambient(self, x):
        """Degree-one homogeneous extension of nu near the unit sphere."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x)
        e = x[-1] / r
        alpha, beta, _, _ = self._alpha_beta(e)
        out = alpha * x
        out[-1] = r * beta
        return out

    def dnu_ambient(self, x):
        """Analytic Jacobian of nu_ambient (chain rule through e = x_z/|x|)."""
        x = np.asarray(x, dtype=float)
        d = self.rep_dim
        r = np.linalg.norm(x)
        xhat = x / r
        e = xhat[-1]
        alpha, beta, alphap, betap = self._alpha_beta(e)
        de = (np.eye(d)[-1] - e * xhat) / r
        J = np.zeros((d, d))
        J[: d - 1, : d - 1] = alpha * np.eye(d - 1)
        J[: d - 1, :] += np.outer(x[: d - 1], alphap * de)
        J[d - 1, :] = beta * xhat + r * betap * de
        return J

    def nu_tilde_rhs(self, y):
        d = self.rep_dim
        q, p = y[:d], y[d:]
        nu = self.nu_ambient(q)
        dn = self.dnu_ambient(q)
        return np.concatenate([nu, -dn.T @ p])

    def constraint_drift(self, y):
        d = self.rep_dim
        q, p = y[:d], y[d:]
        return float(abs(q @ q - 1.0) + abs(p @ q))
