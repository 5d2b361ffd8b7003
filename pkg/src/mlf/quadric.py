"""Closed-form laboratory for the quadric model h(z) = sum z_j^2 on C^n.

Complex coordinates z_j = x_j + i y_j, symplectic form omega = sum dx_j ^ dy_j,
Liouville form lambda = (1/2) sum (x_j dy_j - y_j dx_j).  The Hamiltonian
convention on this space is anchored to the rotation generator: the
Hamiltonian field of |h|^2 restricted to a plane where h = z1 z2 is

    2 |z2|^2 (x1 d/dy1 - y1 d/dx1) + 2 |z1|^2 (x2 d/dy2 - y2 d/dx2),

whose flow is (z1, z2) -> (e^{2i|z2|^2 t} z1, e^{2i|z1|^2 t} z2).  Parallel
transport over the arc of angle alpha is

    tau_alpha(z1, z2) = (e^{i s alpha} z1, e^{i(1-s) alpha} z2),
    s = |z2|^2 / (|z1|^2 + |z2|^2),

and conjugating with the annulus parameterization psi_w gives the model
Dehn-twist shift theta -> theta + alpha / (1 + r^4).

Note on psi_w: the normalization used here is

    psi_w(r e^{i theta}) = (sqrt|w| r e^{i theta}, (w / sqrt|w|) r^{-1} e^{-i theta}),

which takes the unit circle to the vanishing cycle Z_w intersected with the
plane and makes the conjugation formula exact for every w != 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainError
from .util import bump, bump_d, bump_dd


# ---------------------------------------------------------------------------
# transport in a plane, annulus model
# ---------------------------------------------------------------------------


def transport_plane_closed(z1: complex, z2: complex, alpha: float):
    """Parallel transport tau_alpha in special plane coordinates (h = z1 z2)."""
    a1, a2 = abs(z1) ** 2, abs(z2) ** 2
    if a1 + a2 == 0.0:
        raise DomainError("transport undefined at the node z = 0")
    s = a2 / (a1 + a2)
    return z1 * np.exp(1j * s * alpha), z2 * np.exp(1j * (1.0 - s) * alpha)


def hsq_field_plane(state: np.ndarray) -> np.ndarray:
    """Hamiltonian field of |h|^2 = |z1 z2|^2 in plane coordinates.

    state = (x1, y1, x2, y2); returns the displayed rotation generator.
    """
    x1, y1, x2, y2 = state
    a1 = x1 * x1 + y1 * y1
    a2 = x2 * x2 + y2 * y2
    return np.array([-2.0 * a2 * y1, 2.0 * a2 * x1, -2.0 * a1 * y2, 2.0 * a1 * x2])


@dataclass
class AnnulusCoord:
    r: float
    theta: float

    def __post_init__(self):
        if self.r <= 0:
            raise DomainError("annulus radius must be positive")


def annulus_twist(a: AnnulusCoord, alpha: float) -> AnnulusCoord:
    """The model twist (r, theta) -> (r, theta + alpha/(1 + r^4))."""
    return AnnulusCoord(r=a.r, theta=(a.theta + alpha / (1.0 + a.r ** 4)))


def psi_w(w: complex, r: float, theta: float):
    """Annulus parameterization of F_w in special plane coordinates."""
    if w == 0:
        raise DomainError("nodal fiber has no annulus parameterization")
    if r <= 0:
        raise DomainError("annulus radius must be positive")
    root = np.sqrt(abs(w))
    z = r * np.exp(1j * theta)
    return root * z, (w / root) / z


def psi_w_inverse(w: complex, z1: complex, z2: complex):
    """Annulus coordinates of a point of F_w given in special plane coordinates."""
    if w == 0:
        raise DomainError("nodal fiber has no annulus parameterization")
    zz = z1 / np.sqrt(abs(w))
    return AnnulusCoord(r=abs(zz), theta=float(np.angle(zz)))


# ---------------------------------------------------------------------------
# planes in R^n and their complexifications
# ---------------------------------------------------------------------------


class PlaneFrame:
    """An orthonormal plane P = span(e, f) in R^n with special coordinates.

    On the complexified plane CP the quadric map restricts to
    h(zeta1 e + zeta2 f) = zeta1^2 + zeta2^2, and the sqrt(2)-scaled unitary
    change z1 = zeta1 + i zeta2, z2 = zeta1 - i zeta2 turns it into z1 z2.
    """

    def __init__(self, e, f):
        e = np.asarray(e, dtype=float)
        f = np.asarray(f, dtype=float)
        e = e / np.linalg.norm(e)
        f = f - (f @ e) * e
        nf = np.linalg.norm(f)
        if nf < 1e-12:
            raise DomainError("plane frame vectors are linearly dependent")
        self.e, self.f = e, f / nf
        self.n = e.size

    def special_from_point(self, z: np.ndarray):
        """z in CP (complex n-vector) -> special coordinates (z1, z2)."""
        zeta1 = complex(np.dot(self.e, z))
        zeta2 = complex(np.dot(self.f, z))
        return zeta1 + 1j * zeta2, zeta1 - 1j * zeta2

    def point_from_special(self, z1: complex, z2: complex) -> np.ndarray:
        zeta1 = 0.5 * (z1 + z2)
        zeta2 = (z1 - z2) / 2j
        return zeta1 * self.e + zeta2 * self.f

    def contains(self, z: np.ndarray, tol=1e-10) -> bool:
        w = self.point_from_special(*self.special_from_point(z))
        return bool(np.max(np.abs(w - z)) < tol)


def quadric_h(z: np.ndarray) -> complex:
    return complex(np.sum(np.asarray(z) ** 2))


def vanishing_cycle_samples(w: complex, n: int, count: int, rng=None, block=None):
    """Samples of Z_w = e^{i arg(w)/2} sqrt(|w|) S^{n-1}, optionally block-restricted.

    block=(lo, hi) restricts the real sphere directions to coordinates
    lo..hi-1 (used for the critical components of rho_{k,w}).
    """
    if w == 0:
        raise DomainError("nodal fiber")
    rng = rng or np.random.default_rng(0)
    lo, hi = (0, n) if block is None else block
    dim = hi - lo
    if dim <= 0:
        return np.zeros((0, n), dtype=complex)
    dirs = rng.standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    x = np.zeros((count, n))
    x[:, lo:hi] = dirs
    return np.exp(0.5j * np.angle(w)) * np.sqrt(abs(w)) * x


# ---------------------------------------------------------------------------
# the symplectomorphism F_u -> T*S^{n-1}
# ---------------------------------------------------------------------------


def quadric_to_cotangent_sphere(z: np.ndarray, tol=1e-9):
    """(p, q) = (-|x| y, x/|x|) for z = x + i y on a fiber F_u with u > 0 real."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    h = quadric_h(z)
    if abs(h.imag) > tol or h.real <= 0:
        raise DomainError("point not on a positive real fiber")
    nx = np.linalg.norm(x)
    if nx < tol:
        raise DomainError("real part vanishes; point not on F_u with u > 0")
    return -nx * y, x / nx


# ---------------------------------------------------------------------------
# real forms
# ---------------------------------------------------------------------------


def real_form_phi(k: int, z: np.ndarray) -> float:
    """phi_k = h restricted to M_k = -|y'|^2 + |x''|^2 (blocks split at k)."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return float(-np.sum(y[:k] ** 2) + np.sum(x[k:] ** 2))


def real_form_rho(k: int, z: np.ndarray) -> float:
    """rho_k = (|x'|^2 + |y''|^2)/2, the kinetic energy of T*M_k."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return float(0.5 * (np.sum(x[:k] ** 2) + np.sum(y[k:] ** 2)))


def real_form_lambda(k: int, z: np.ndarray) -> np.ndarray:
    """Canonical 1-form lambda_k = sum_1^k x dy - sum_{k+1}^n y dx.

    Returned as a real 2n-vector of coefficients against (dx_1..dx_n,
    dy_1..dy_n).
    """
    z = np.asarray(z, dtype=complex)
    n = z.size
    x, y = z.real, z.imag
    coef = np.zeros(2 * n)
    coef[n: n + k] = x[:k]            # + x_j dy_j, j <= k
    coef[k:n] = -y[k:]                 # - y_j dx_j, j > k
    return coef


def on_M_k(k: int, z: np.ndarray, tol=1e-12) -> bool:
    z = np.asarray(z, dtype=complex)
    return bool(np.max(np.abs(z.real[:k]), initial=0.0) < tol
                and np.max(np.abs(z.imag[k:]), initial=0.0) < tol)


def fiber_tangent_basis(z: np.ndarray):
    """Real basis of T_z F_w = ker(v -> sum z_j v_j) as vectors in R^{2n}.

    Real representation: v = (a, b) for a + ib; the two normal directions are
    the real representations of conj(z) and i conj(z) (the connection line).
    """
    z = np.asarray(z, dtype=complex)
    n = z.size
    n1 = np.concatenate([z.real, -z.imag])
    n2 = np.concatenate([z.imag, z.real])
    basis = []
    for i in range(2 * n):
        v = np.zeros(2 * n)
        v[i] = 1.0
        for nn in (n1, n2):
            v -= (v @ nn) / (nn @ nn) * nn
        for b in basis:
            v -= (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
    return np.array(basis[: 2 * n - 2])


def rho_k_fiber_gradient_residual(k: int, z: np.ndarray) -> float:
    """Norm of the projection of grad rho_k onto T_z F_w (zero at critical points)."""
    z = np.asarray(z, dtype=complex)
    n = z.size
    g = np.zeros(2 * n)
    g[:k] = z.real[:k]
    g[n + k:] = z.imag[k:]
    basis = fiber_tangent_basis(z)
    return float(np.linalg.norm(basis @ g))


@dataclass
class CriticalComponent:
    label: str
    dim: int
    witnesses: np.ndarray         # complex points, possibly empty
    max_gradient_residual: float


def rho_kw_critical_classifier(k: int, n: int, w: complex, rng=None,
                               samples=24) -> list[CriticalComponent]:
    """Critical components of rho_{k,w} on the smooth fiber F_w.

    Three candidates: the (k-1)-sphere Z_w cap (C^k x 0), the (n-k-1)-sphere
    Z_w cap (0 x C^{n-k}), and F_w cap M_k (empty unless w is real).
    """
    if w == 0:
        raise DomainError("nodal fiber: rho_{k,w} classifier needs w != 0")
    rng = rng or np.random.default_rng(0)
    comps = []
    for label, block, dim in (
        ("Z_w ∩ (C^k x 0)", (0, k), k - 1),
        ("Z_w ∩ (0 x C^{n-k})", (k, n), n - k - 1),
    ):
        pts = vanishing_cycle_samples(w, n, samples, rng=rng, block=block)
        res = max((rho_k_fiber_gradient_residual(k, z) for z in pts), default=0.0)
        comps.append(CriticalComponent(label, dim, pts, res))

    if abs(w.imag) < 1e-12:
        u = w.real
        pts = []
        for _ in range(samples):
            yp = rng.standard_normal(k)
            xpp = rng.standard_normal(n - k)
            # solve -|y'|^2 + |x''|^2 = u on M_k by scaling one block
            if u >= 0 and n - k > 0:
                xpp = xpp / np.linalg.norm(xpp) * np.sqrt(u + np.sum(yp**2)) if np.linalg.norm(xpp) > 0 else xpp
            elif u < 0 and k > 0:
                yp = yp / np.linalg.norm(yp) * np.sqrt(-u + np.sum(xpp**2)) if np.linalg.norm(yp) > 0 else yp
            else:
                continue
            z = np.zeros(n, dtype=complex)
            z[:k] = 1j * yp
            z[k:] = xpp
            if abs(quadric_h(z) - w) < 1e-9:
                pts.append(z)
        pts = np.array(pts) if pts else np.zeros((0, n), dtype=complex)
        res = max((rho_k_fiber_gradient_residual(k, z) for z in pts), default=0.0)
        comps.append(CriticalComponent("F_w ∩ M_k", -1 if len(pts) == 0 else n - 1, pts, res))
    else:
        comps.append(CriticalComponent("F_w ∩ M_k", -1, np.zeros((0, n), dtype=complex), 0.0))
    return comps


# ---------------------------------------------------------------------------
# Lagrangian surgery comparison (Lemma on tau_pi images of level sets)
# ---------------------------------------------------------------------------


def surgery_plane_frame(k: int, n: int, rng=None) -> PlaneFrame:
    """A random plane P = P' + P'' meeting the level sets Q_{k,u}.

    Frame convention: first vector in the {0} x R^{n-k} block, second in
    R^k x {0}; then Q_{k,-u} cap CP is the pair of rays theta in {0, pi}.
    """
    if k < 1 or k > n - 1:
        raise DomainError("surgery plane needs 1 <= k <= n-1")
    rng = rng or np.random.default_rng(0)
    e = np.zeros(n)
    e[k:] = rng.standard_normal(n - k)
    f = np.zeros(n)
    f[:k] = rng.standard_normal(k)
    return PlaneFrame(e, f)


def q_level_ray_points(k: int, u: float, frame: PlaneFrame, r_values, theta0=0.0):
    """Points of Q_{k,-u} cap CP at prescribed annulus radii (theta0 in {0, pi})."""
    pts = []
    for r in r_values:
        z1, z2 = psi_w(-u, r, theta0)
        pts.append(frame.point_from_special(z1, z2))
    return np.array(pts)


@dataclass
class SurgeryReport:
    theta0: float
    r_values: np.ndarray
    theta_measured: np.ndarray
    theta_template: np.ndarray
    max_deviation: float
    crossing_radius: float | None


def surgery_compare(k: int, u: float, frame: PlaneFrame, r_values,
                    transport=None, theta0=0.0, refine_crossing=True) -> SurgeryReport:
    """Transport Q_{k,-u} cap CP through tau_pi and compare with the template.

    transport: callable (points (N,n) complex, alpha) -> points, defaulting
    to the closed-form plane transport.  The template curve is
    theta(r) = theta0 + pi/(1 + r^4); the report records the angular
    deviation and the radius at which the image crosses the vanishing cycle
    (shift = pi/2, model value r = 1).
    """
    if u <= 0:
        raise DomainError("surgery comparison needs u > 0")
    r_values = np.asarray(r_values, dtype=float)
    pts = q_level_ray_points(k, u, frame, r_values, theta0)

    if transport is None:
        moved = []
        for z in pts:
            z1, z2 = frame.special_from_point(z)
            moved.append(frame.point_from_special(*transport_plane_closed(z1, z2, np.pi)))
        moved = np.array(moved)
    else:
        moved = transport(pts, np.pi)

    theta_meas = np.empty_like(r_values)
    for i, z in enumerate(moved):
        z1, z2 = frame.special_from_point(z)
        ann = psi_w_inverse(u, z1, z2)
        theta_meas[i] = ann.theta
    template = theta0 + np.pi / (1.0 + r_values ** 4)
    dev = np.angle(np.exp(1j * (theta_meas - template)))

    # crossing of Z_u cap CP: radius where the measured shift reaches pi/2
    def shift_at(r):
        z = q_level_ray_points(k, u, frame, [r], theta0)
        if transport is None:
            z1, z2 = frame.special_from_point(z[0])
            img = frame.point_from_special(*transport_plane_closed(z1, z2, np.pi))
        else:
            img = transport(z, np.pi)[0]
        z1, z2 = frame.special_from_point(img)
        ann = psi_w_inverse(u, z1, z2)
        return float(np.angle(np.exp(1j * (ann.theta - theta0)))) - np.pi / 2

    cross = None
    shift = np.angle(np.exp(1j * (theta_meas - theta0)))
    for i in range(len(r_values) - 1):
        a, b = shift[i] - np.pi / 2, shift[i + 1] - np.pi / 2
        if a == 0.0 or a * b < 0:
            if refine_crossing:
                from scipy.optimize import brentq
                cross = float(brentq(shift_at, r_values[i], r_values[i + 1], xtol=1e-12))
            else:
                t = a / (a - b)
                cross = float(r_values[i] + t * (r_values[i + 1] - r_values[i]))
            break
    return SurgeryReport(
        theta0=theta0,
        r_values=r_values,
        theta_measured=theta_meas,
        theta_template=template,
        max_deviation=float(np.max(np.abs(dev))),
        crossing_radius=cross,
    )


# ---------------------------------------------------------------------------
# the sharp perturbation system
# ---------------------------------------------------------------------------


@dataclass
class SharpConfig:
    """Cutoff data for the perturbed potential rho#_k = rho_k + (c/2) sigma(|z|^2).

    sigma(t) = t for t <= 4 delta^2 and sigma = 0 for t >= 9 delta^2, realized
    as t times a quintic cutoff.  Pseudoconvexity of rho# holds for small c
    and is reported by :meth:`pseudoconvexity_margin` (the Levi form of rho_k
    is I/4 exactly; the perturbation adds c/2 (sigma' I + sigma'' zbar z^T)).
    With this sigma the radial Levi eigenvalue dips to about 0.25 - 5 c, so
    the default keeps c well below 0.05.
    """

    delta: float = 1.0
    c: float = 0.02

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        return t * bump(t, 4.0 * self.delta ** 2, 9.0 * self.delta ** 2)

    def sigma_d(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = 4.0 * self.delta ** 2, 9.0 * self.delta ** 2
        return bump(t, lo, hi) + t * bump_d(t, lo, hi)

    def sigma_dd(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = 4.0 * self.delta ** 2, 9.0 * self.delta ** 2
        return 2.0 * bump_d(t, lo, hi) + t * bump_dd(t, lo, hi)

    def pseudoconvexity_margin(self, n=2, samples=4000, rng=None) -> float:
        """Min Levi-form eigenvalue of rho# over the ball |z| <= 3 delta."""
        rng = rng or np.random.default_rng(0)
        t = rng.uniform(0.0, (3.0 * self.delta) ** 2, size=samples)
        sp, spp = self.sigma_d(t), self.sigma_dd(t)
        eig_iso = 0.25 + 0.5 * self.c * sp
        eig_rad = 0.25 + 0.5 * self.c * (sp + spp * t)
        return float(min(eig_iso.min(), eig_rad.min()))

    def is_pseudoconvex(self) -> bool:
        return self.pseudoconvexity_margin() > 0.0


def sharp_mu(c: float) -> float:
    """Slope of the constructed solution family: mu^2 = (1 + c)/c."""
    if c <= 0:
        raise DomainError("sharp system needs c > 0")
    return float(np.sqrt((1.0 + c) / c))


def sharp_residuals(cfg: SharpConfig, k: int, z: np.ndarray) -> dict:
    """Residuals of the tangency system (1)-(4) at z (normalized by |z|^2).

    (1) y_l x_j = x_l y_j for j < l <= k;
    (2) y_l x_j = x_l y_j for k < j < l;
    (3) x_l x_j = y_l y_j for j <= k < l;
    (4) (1 + c s') y_l x_j = c s' x_l y_j for j <= k < l, s' = sigma'(|z|^2).
    """
    z = np.asarray(z, dtype=complex)
    n = z.size
    x, y = z.real, z.imag
    nz2 = float(np.sum(x * x + y * y))
    sp = float(cfg.sigma_d(nz2))
    r1 = [y[l] * x[j] - x[l] * y[j] for j in range(k) for l in range(j + 1, k)]
    r2 = [y[l] * x[j] - x[l] * y[j] for j in range(k, n) for l in range(j + 1, n)]
    r3 = [x[l] * x[j] - y[l] * y[j] for j in range(k) for l in range(k, n)]
    r4 = [(1.0 + cfg.c * sp) * y[l] * x[j] - cfg.c * sp * x[l] * y[j]
          for j in range(k) for l in range(k, n)]
    scale = max(nz2, 1e-30)
    out = {}
    for name, vals in (("eq1", r1), ("eq2", r2), ("eq3", r3), ("eq4", r4)):
        out[name] = max((abs(v) for v in vals), default=0.0) / scale
    out["max"] = max(out.values())
    out["sigma_prime"] = sp
    return out


def sharp_solution(cfg: SharpConfig, k: int, n: int, x_prime, y_dprime,
                   sign: float = 1.0) -> np.ndarray:
    """Constructed solution of (1)-(4): y' = mu x', x'' = mu y''."""
    mu = sign * sharp_mu(cfg.c)
    x_prime = np.asarray(x_prime, dtype=float)
    y_dprime = np.asarray(y_dprime, dtype=float)
    if x_prime.size != k or y_dprime.size != n - k:
        raise DomainError("block sizes must be (k, n-k)")
    z = np.zeros(n, dtype=complex)
    z[:k] = x_prime + 1j * mu * x_prime
    z[k:] = mu * y_dprime + 1j * y_dprime
    return z


@dataclass
class SharpCheckReport:
    residuals: dict
    im_h: float
    im_h_model: float
    h: complex
    in_shell: bool


def sharp_system_check(cfg: SharpConfig, k: int, n: int, z: np.ndarray) -> SharpCheckReport:
    """Evaluate the tangency system at z and the im h identity for solutions.

    For points of the constructed family the model value is
    im h = 2 mu |z|^2 / (1 + mu^2) with mu^2 = (1+c)/c.
    """
    z = np.asarray(z, dtype=complex)
    nz = np.linalg.norm(z)
    res = sharp_residuals(cfg, k, z)
    h = quadric_h(z)
    mu = sharp_mu(cfg.c)
    model = 2.0 * mu * nz ** 2 / (1.0 + mu ** 2)
    return SharpCheckReport(
        residuals=res,
        im_h=float(h.imag),
        im_h_model=float(model),
        h=h,
        in_shell=bool(cfg.delta <= nz <= 2.0 * cfg.delta),
    )
