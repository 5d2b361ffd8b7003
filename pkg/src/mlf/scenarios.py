"""Built-in scenario registry.

Scenarios pair a Morse system with a library slope function and the chart
data needed by the verification suites:

  * sphere2-height / sphere3-height: embedded S^n, phi = height, exact
    hemisphere charts, slope f_inf = phi (validated; the Lyapunov
    combination nu.phi + upsilon phi has sampled margin ~2).
  * torus-upright: flat T^2 with the two saddles joined along the invariant
    circle {x1 = pi} (the height function of a vertically standing torus);
    violates Morse-Smale by construction.  The ambient function
    2 sin x2 + cos x1 (63 sin x2 + 7 sin 3x2)/64 + cos 3x1 (9 sin x2 + sin 3x2)/64
    has critical points exactly at (0|pi, -pi/2|pi/2) with Hessians
    2 diag(eps) and vanishing third-order terms, and is blended with the
    exact quadratic models over small balls; the x1 -> -x1 symmetry keeps
    {x1 = 0} and {x1 = pi} invariant, forcing the saddle-saddle connection.
  * torus-tilted: separable F(x1) + G(x2) with profile pair
    (-2 cos x, -(7/8) cos x - (1/8) cos 3x); Morse-Smale, same critical
    values (-3, -1, 1, 3), slope f_inf = upsilon/2.
  * quadric-n{n}[-k{k}]: the local model on R^n with signature k.
  * heegaard-genus-{g}: combinatorial Heegaard data (no Morse system).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    CriticalPoint,
    EuclideanMorseSystem,
    MorseSystem,
    SphereMorseSystem,
    TorusMorseSystem,
    TorusPhi,
    _wrap,
)
from .rearrange import SlopeFunction, slope_base_function, slope_upsilon_half
from .util import bump, bump_d, bump_dd


@dataclass
class Scenario:
    name: str
    kind: str                     # "sphere" | "torus" | "quadric" | "heegaard"
    ms: Optional[MorseSystem] = None
    slope: Optional[SlopeFunction] = None
    genus: int = 0
    description: str = ""
    # saddle indices for the Morse-Smale probes, when applicable
    probe_pair: Optional[tuple] = None


# ---------------------------------------------------------------------------
# torus builders
# ---------------------------------------------------------------------------

_UPRIGHT_CRIT = [
    # (location, value, signature)
    (np.array([0.0, -np.pi / 2]), -3.0, np.array([1.0, 1.0])),
    (np.array([np.pi, -np.pi / 2]), -1.0, np.array([-1.0, 1.0])),
    (np.array([np.pi, np.pi / 2]), 1.0, np.array([1.0, -1.0])),
    (np.array([0.0, np.pi / 2]), 3.0, np.array([-1.0, -1.0])),
]

_B1, _B3 = 63.0 / 64.0, 9.0 / 64.0
_C1, _C3 = 7.0 / 64.0, 1.0 / 64.0
_R1, _R2 = 0.35, 0.70


def _upright_amb(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (2.0 * np.sin(x2)
            + np.cos(x1) * (_B1 * np.sin(x2) + _C1 * np.sin(3 * x2))
            + np.cos(3 * x1) * (_B3 * np.sin(x2) + _C3 * np.sin(3 * x2)))


def _upright_amb_grad(X):
    x1, x2 = X[:, 0], X[:, 1]
    g1 = (-np.sin(x1) * (_B1 * np.sin(x2) + _C1 * np.sin(3 * x2))
          - 3.0 * np.sin(3 * x1) * (_B3 * np.sin(x2) + _C3 * np.sin(3 * x2)))
    g2 = (2.0 * np.cos(x2)
          + np.cos(x1) * (_B1 * np.cos(x2) + 3 * _C1 * np.cos(3 * x2))
          + np.cos(3 * x1) * (_B3 * np.cos(x2) + 3 * _C3 * np.cos(3 * x2)))
    return np.stack([g1, g2], axis=1)


def _upright_amb_hess(X):
    x1, x2 = X[:, 0], X[:, 1]
    s2, s6 = _B1 * np.sin(x2) + _C1 * np.sin(3 * x2), _B3 * np.sin(x2) + _C3 * np.sin(3 * x2)
    c2, c6 = _B1 * np.cos(x2) + 3 * _C1 * np.cos(3 * x2), _B3 * np.cos(x2) + 3 * _C3 * np.cos(3 * x2)
    h11 = -np.cos(x1) * s2 - 9.0 * np.cos(3 * x1) * s6
    h12 = -np.sin(x1) * c2 - 3.0 * np.sin(3 * x1) * c6
    h22 = (-2.0 * np.sin(x2)
           - np.cos(x1) * (_B1 * np.sin(x2) + 9 * _C1 * np.sin(3 * x2))
           - np.cos(3 * x1) * (_B3 * np.sin(x2) + 9 * _C3 * np.sin(3 * x2)))
    H = np.empty((X.shape[0], 2, 2))
    H[:, 0, 0], H[:, 0, 1], H[:, 1, 0], H[:, 1, 1] = h11, h12, h12, h22
    return H


def _blend_phi(amb, amb_grad, amb_hess, crit, r1=_R1, r2=_R2):
    """Blend exact quadratic models into an ambient function over balls."""

    def value(X):
        X = np.atleast_2d(X)
        out = amb(X)
        for loc, val, eps in crit:
            s = _wrap(X - loc)
            d = np.linalg.norm(s, axis=1)
            beta = bump(d, r1, r2)
            model = val + np.einsum("j,nj->n", eps, s * s)
            out = out + beta * (model - amb(X))
        return out

    def grad(X):
        X = np.atleast_2d(X)
        out = amb_grad(X)
        for loc, val, eps in crit:
            s = _wrap(X - loc)
            d = np.linalg.norm(s, axis=1)
            beta = bump(d, r1, r2)
            dbeta = bump_d(d, r1, r2)
            model = val + np.einsum("j,nj->n", eps, s * s)
            diff = model - amb(X)
            gdiff = 2.0 * eps * s - amb_grad(X)
            shat = np.where(d[:, None] > 1e-12, s / np.maximum(d, 1e-12)[:, None], 0.0)
            out = out + beta[:, None] * gdiff + (dbeta * diff)[:, None] * shat
        return out

    def hess(X):
        X = np.atleast_2d(X)
        out = amb_hess(X)
        eye = np.eye(2)
        for loc, val, eps in crit:
            s = _wrap(X - loc)
            d = np.linalg.norm(s, axis=1)
            beta = bump(d, r1, r2)
            db = bump_d(d, r1, r2)
            ddb = bump_dd(d, r1, r2)
            model = val + np.einsum("j,nj->n", eps, s * s)
            diff = model - amb(X)
            gdiff = 2.0 * eps * s - amb_grad(X)
            hdiff = 2.0 * np.diag(eps)[None, :, :] - amb_hess(X)
            dsafe = np.maximum(d, 1e-12)
            shat = np.where(d[:, None] > 1e-12, s / dsafe[:, None], 0.0)
            proj = np.einsum("ni,nj->nij", shat, shat)
            hbeta = (ddb[:, None, None] * proj
                     + (db / dsafe)[:, None, None] * (eye[None, :, :] - proj))
            cross = np.einsum("ni,nj->nij", shat, gdiff)
            out = out + beta[:, None, None] * hdiff \
                + (db * diff)[:, None, None] * 0.0 \
                + hbeta * diff[:, None, None] \
                + db[:, None, None] * (cross + np.swapaxes(cross, 1, 2))
        return out

    return TorusPhi(value=value, grad=grad, hess=hess)


def build_torus_upright() -> TorusMorseSystem:
    phi = _blend_phi(_upright_amb, _upright_amb_grad, _upright_amb_hess, _UPRIGHT_CRIT)
    crit = [
        CriticalPoint(index=i, location=loc.copy(), signature=eps.copy(), value=val,
                      chart_id=0, ball_radius=_R1, chi_radius=_R2)
        for i, (loc, val, eps) in enumerate(_UPRIGHT_CRIT)
    ]
    return TorusMorseSystem(phi, crit, name="torus-upright")


# separable profiles for the tilted torus
def _tilted_F(x):
    return -2.0 * np.cos(x)


def _tilted_F_d(x):
    return 2.0 * np.sin(x)


def _tilted_F_dd(x):
    return 2.0 * np.cos(x)


def _tilted_G(x):
    return -(7.0 / 8.0) * np.cos(x) - (1.0 / 8.0) * np.cos(3 * x)


def _tilted_G_d(x):
    return (7.0 / 8.0) * np.sin(x) + (3.0 / 8.0) * np.sin(3 * x)


def _tilted_G_dd(x):
    return (7.0 / 8.0) * np.cos(x) + (9.0 / 8.0) * np.cos(3 * x)


class _Blended1D:
    """1-d profile equal to v0 + eps0 x^2 near 0 and vpi - ... near pi."""

    def __init__(self, amb, amb_d, amb_dd, v0, e0, vpi, epi, r1=_R1, r2=_R2):
        self.amb, self.amb_d, self.amb_dd = amb, amb_d, amb_dd
        self.models = [(0.0, v0, e0), (np.pi, vpi, epi)]
        self.r1, self.r2 = r1, r2

    def _pieces(self, x):
        x = np.asarray(x, dtype=float)
        val, d1, d2 = self.amb(x), self.amb_d(x), self.amb_dd(x)
        for c, v, e in self.models:
            s = _wrap(x - c)
            d = np.abs(s)
            beta, db, ddb = bump(d, self.r1, self.r2), bump_d(d, self.r1, self.r2), \
                bump_dd(d, self.r1, self.r2)
            sg = np.sign(s)
            diff = v + e * s * s - self.amb(x)
            gd = 2.0 * e * s - self.amb_d(x)
            hd = 2.0 * e - self.amb_dd(x)
            val = val + beta * diff
            d1 = d1 + beta * gd + db * sg * diff
            d2 = d2 + beta * hd + 2.0 * db * sg * gd + ddb * diff
        return val, d1, d2

    def value(self, x):
        return self._pieces(x)[0]

    def d1(self, x):
        return self._pieces(x)[1]

    def d2(self, x):
        return self._pieces(x)[2]


def build_torus_tilted() -> TorusMorseSystem:
    F = _Blended1D(_tilted_F, _tilted_F_d, _tilted_F_dd, -2.0, 1.0, 2.0, -1.0)
    G = _Blended1D(_tilted_G, _tilted_G_d, _tilted_G_dd, -1.0, 1.0, 1.0, -1.0)

    def value(X):
        X = np.atleast_2d(X)
        return F.value(X[:, 0]) + G.value(X[:, 1])

    def grad(X):
        X = np.atleast_2d(X)
        return np.stack([F.d1(X[:, 0]), G.d1(X[:, 1])], axis=1)

    def hess(X):
        X = np.atleast_2d(X)
        H = np.zeros((X.shape[0], 2, 2))
        H[:, 0, 0] = F.d2(X[:, 0])
        H[:, 1, 1] = G.d2(X[:, 1])
        return H

    layout = [
        (np.array([0.0, 0.0]), -3.0, np.array([1.0, 1.0])),
        (np.array([0.0, np.pi]), -1.0, np.array([1.0, -1.0])),
        (np.array([np.pi, 0.0]), 1.0, np.array([-1.0, 1.0])),
        (np.array([np.pi, np.pi]), 3.0, np.array([-1.0, -1.0])),
    ]
    crit = [
        CriticalPoint(index=i, location=loc.copy(), signature=eps.copy(), value=val,
                      chart_id=0, ball_radius=_R1, chi_radius=_R2)
        for i, (loc, val, eps) in enumerate(layout)
    ]
    return TorusMorseSystem(TorusPhi(value, grad, hess), crit, name="torus-tilted")


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def build_scenario(name: str) -> Scenario:
    if name == "sphere2-height":
        return Scenario(name=name, kind="sphere", ms=SphereMorseSystem(2, name=name),
                        slope=slope_base_function(),
                        description="S^2 with the height function, exact pole charts")
    if name == "sphere3-height":
        return Scenario(name=name, kind="sphere", ms=SphereMorseSystem(3, name=name),
                        slope=slope_base_function(),
                        description="S^3 with the height function")
    if name == "torus-upright":
        return Scenario(name=name, kind="torus", ms=build_torus_upright(),
                        slope=slope_upsilon_half(), probe_pair=(1, 2),
                        description="flat T^2, saddle-saddle connection on {x1 = pi}")
    if name == "torus-tilted":
        return Scenario(name=name, kind="torus", ms=build_torus_tilted(),
                        slope=slope_upsilon_half(), probe_pair=(1, 2),
                        description="flat T^2, separable Morse-Smale system")
    m = re.fullmatch(r"quadric-n(\d+)(?:-k(\d+))?", name)
    if m:
        n = int(m.group(1))
        k = int(m.group(2) or 0)
        if not (1 <= n <= 6 and 0 <= k <= n):
            raise KeyError(f"unsupported quadric size: {name}")
        eps = np.array([-1.0] * k + [1.0] * (n - k))
        return Scenario(name=name, kind="quadric",
                        ms=EuclideanMorseSystem(n, eps, name=name),
                        slope=slope_upsilon_half(),
                        description=f"local model on R^{n}, index {k}")
    m = re.fullmatch(r"heegaard-genus-(\d+)", name)
    if m:
        return Scenario(name=name, kind="heegaard", genus=int(m.group(1)),
                        description=f"genus-{m.group(1)} Heegaard curve system")
    raise KeyError(f"unknown scenario: {name}")


CANONICAL_SCENARIOS = (
    "sphere2-height", "sphere3-height",
    "torus-upright", "torus-tilted",
    "quadric-n2", "quadric-n2-k1", "quadric-n3", "quadric-n3-k1", "quadric-n4-k2",
    "heegaard-genus-1", "heegaard-genus-2",
)
