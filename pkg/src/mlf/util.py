"""Shared numerical helpers: smooth profiles, finite differences, sampling."""

from __future__ import annotations

import numpy as np


def smoothstep(t):
    """Quintic smoothstep: 0 for t<=0, 1 for t>=1, C^2 at the junctions."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_d(t):
    """Derivative of :func:`smoothstep` (with respect to t)."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    d = 30.0 * tc * tc * (tc - 1.0) * (tc - 1.0)
    return np.where(inside, d, 0.0)


def smoothstep_dd(t):
    """Second derivative of :func:`smoothstep`."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    d = 60.0 * tc * (2.0 * tc - 1.0) * (tc - 1.0)
    return np.where(inside, d, 0.0)


class RampProfile:
    """Smooth monotone ramp between two plateaus.

    value = lo for r <= r0, hi for r >= r1, quintic in between.
    Exposes value and derivative; both vectorized.
    """

    def __init__(self, r0, r1, lo, hi):
        if not r1 > r0:
            raise ValueError("ramp needs r1 > r0")
        self.r0, self.r1, self.lo, self.hi = float(r0), float(r1), float(lo), float(hi)

    def __call__(self, r):
        t = (np.asarray(r, dtype=float) - self.r0) / (self.r1 - self.r0)
        return self.lo + (self.hi - self.lo) * smoothstep(t)

    def deriv(self, r):
        t = (np.asarray(r, dtype=float) - self.r0) / (self.r1 - self.r0)
        return (self.hi - self.lo) * smoothstep_d(t) / (self.r1 - self.r0)

    def max_abs_slope(self):
        # quintic smoothstep has peak slope 15/8 over the unit ramp
        return abs(self.hi - self.lo) * 1.875 / (self.r1 - self.r0)


def bump(r, r0, r1):
    """Radial cutoff: 1 for r <= r0, 0 for r >= r1, quintic in between."""
    t = (np.asarray(r, dtype=float) - r0) / (r1 - r0)
    return 1.0 - smoothstep(t)


def bump_d(r, r0, r1):
    t = (np.asarray(r, dtype=float) - r0) / (r1 - r0)
    return -smoothstep_d(t) / (r1 - r0)


def bump_dd(r, r0, r1):
    t = (np.asarray(r, dtype=float) - r0) / (r1 - r0)
    return -smoothstep_dd(t) / (r1 - r0) ** 2


def fd_gradient(f, x, h=None):
    """Central-difference gradient of a scalar function at x (1-D array)."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + np.linalg.norm(x))
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_jacobian(f, x, h=None):
    """Central-difference Jacobian of a vector function at x."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(x))
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def directional_derivative(f, x, v, h=1e-6):
    """Central-difference derivative of scalar f at x along direction v."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return (f(x + h * v) - f(x - h * v)) / (2.0 * h)


def unit_sphere_samples(rng, n, count):
    """Uniform samples on S^{n-1} (rows)."""
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_orthogonal(rng, n):
    """Haar-ish orthogonal matrix via QR of a Gaussian matrix."""
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))
