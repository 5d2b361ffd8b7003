"""Backend geometry: charts, metric consistency, normal forms, derivatives."""

import numpy as np
import pytest

from mlf.geometry import (
    DomainError,
    EuclideanMorseSystem,
    PhasePoint,
    SphereMorseSystem,
)
from mlf.util import fd_gradient, fd_jacobian


@pytest.fixture(scope="module")
def sp():
    return SphereMorseSystem(2)


def random_phase(ms, rng, count):
    Q = ms.sample_base(rng, count)
    P = rng.standard_normal((count, ms.rep_dim))
    if ms.rep_dim > ms.n:
        P -= np.einsum("ni,ni->n", P, Q)[:, None] * Q
    return Q, P


def test_sphere_chart_roundtrip(sp):
    rng = np.random.default_rng(0)
    Q, P = random_phase(sp, rng, 300)
    for cid in (0, 1):
        mask = (Q[:, -1] < 0.9) if cid == 0 else (Q[:, -1] > -0.9)
        W, PW = sp.to_chart(cid, Q[mask], P[mask])
        Q2, P2 = sp.from_chart(cid, W, PW)
        assert np.abs(Q2 - Q[mask]).max() < 1e-12
        assert np.abs(P2 - P[mask]).max() < 1e-12


def test_sphere_charts_agree_on_overlap(sp):
    rng = np.random.default_rng(1)
    Q, P = random_phase(sp, rng, 200)
    band = np.abs(Q[:, -1]) < 0.45
    vals = []
    for cid in (0, 1):
        W, PW = sp.to_chart(cid, Q[band], P[band])
        rho = sp.rho_c(cid, W, PW)
        g = np.einsum("nj,nj->n", PW, sp.nu_c(cid, W))
        phi = sp.phi_c(cid, W)
        vals.append((rho, g, phi))
    for a, b in zip(*vals):
        assert np.abs(a - b).max() < 1e-12


def test_sphere_normal_forms_exact(sp):
    rng = np.random.default_rng(2)
    for k, c in enumerate(sp.crit):
        s = rng.uniform(-0.4, 0.4, size=(100, 2))
        s = s[np.linalg.norm(s, axis=1) < c.ball_radius]
        phi = sp.phi_c(c.chart_id, s)
        model = c.value + np.einsum("j,nj->n", c.signature, s * s)
        assert np.abs(phi - model).max() == 0.0
        nu = sp.nu_c(c.chart_id, s)
        assert np.abs(nu - 2.0 * c.signature * s).max() == 0.0


def test_sphere_metric_spd(sp):
    rng = np.random.default_rng(3)
    Q, P = random_phase(sp, rng, 400)
    cids = np.array([sp.chart_of(q) for q in Q])
    for cid in (0, 1):
        sel = cids == cid
        W, _ = sp.to_chart(cid, Q[sel], P[sel])
        G = sp.ginv_c(cid, W)
        eig = np.linalg.eigvalsh(G)
        assert eig.min() > 0.0


def test_sphere_analytic_derivatives_vs_fd(sp):
    rng = np.random.default_rng(4)
    Q, P = random_phase(sp, rng, 30)
    for cid in (0, 1):
        sel = (Q[:, -1] < 0) if cid == 0 else (Q[:, -1] >= 0)
        W, PW = sp.to_chart(cid, Q[sel], P[sel])
        dn = sp.dnu_c(cid, W)
        dw, dp = sp.drho_c(cid, W, PW)
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (sp.nu_c(cid, W + e) - sp.nu_c(cid, W - e)) / (2 * h)
            assert np.abs(fd - dn[:, :, i]).max() < 1e-7
            fdr = (sp.rho_c(cid, W + e, PW) - sp.rho_c(cid, W - e, PW)) / (2 * h)
            assert np.abs(fdr - dw[:, i]).max() < 1e-7
            fdp = (sp.rho_c(cid, W, PW + e) - sp.rho_c(cid, W, PW - e)) / (2 * h)
            assert np.abs(fdp - dp[:, i]).max() < 1e-7


def test_sphere_ambient_field_and_jacobian(sp):
    rng = np.random.default_rng(5)
    for _ in range(12):
        q = rng.standard_normal(3)
        q /= np.linalg.norm(q)
        nu = sp.nu_ambient(q)
        # tangent to the sphere and consistent with the chart pushforward
        assert abs(nu @ q) < 1e-12
        cid = sp.chart_of(q)
        W = sp.chart_coords(cid, q[None])
        push = np.einsum("nij,nj->ni", sp.chart_jac(cid, W), sp.nu_c(cid, W))[0]
        assert np.abs(nu - push).max() < 1e-12
        J = sp.dnu_ambient(q)
        Jfd = fd_jacobian(sp.nu_ambient, q, h=1e-6)
        assert np.abs(J - Jfd).max() < 1e-8


def test_torus_phi_fields(torus_tilted, torus_upright):
    for sc in (torus_tilted, torus_upright):
        ms = sc.ms
        rng = np.random.default_rng(6)
        X = rng.uniform(0, 2 * np.pi, (25, 2))
        g = ms.phi_model.grad(X)
        H = ms.phi_model.hess(X)
        for i, x in enumerate(X):
            gf = fd_gradient(lambda y: ms.phi_model.value(y[None])[0], x, 1e-6)
            Hf = fd_jacobian(lambda y: ms.phi_model.grad(y[None])[0], x, 1e-5)
            assert np.abs(gf - g[i]).max() < 1e-8
            assert np.abs(Hf - H[i]).max() < 1e-6
        # no critical points outside the declared set
        Q = rng.uniform(0, 2 * np.pi, (30000, 2))
        keep = np.ones(len(Q), bool)
        for c in ms.crit:
            keep &= ms.base_distance(Q, c.location[None]) > 0.3
        assert np.linalg.norm(ms.phi_model.grad(Q[keep]), axis=1).min() > 0.2


def test_upright_connection_circle_invariant(torus_upright):
    ms = torus_upright.ms
    x2 = np.linspace(0, 2 * np.pi, 64)
    X = np.stack([np.full_like(x2, np.pi), x2], axis=1)
    assert np.abs(ms.phi_model.grad(X)[:, 0]).max() < 1e-14


def test_phase_point_validation():
    with pytest.raises(DomainError):
        PhasePoint(q=np.array([np.nan, 0.0]), p=np.zeros(2))


def test_scalar_field_gradient_matches_fd(sp, quadric21):
    # analytic base gradients match central differences (1000 random samples)
    rng = np.random.default_rng(7)
    for ms in (sp, quadric21.ms):
        Q = ms.sample_base(rng, 1000)
        cids = np.array([ms.chart_of(q) for q in Q])
        for cid in np.unique(cids):
            sel = cids == cid
            W, _ = ms.to_chart(cid, Q[sel], np.zeros((int(sel.sum()), ms.rep_dim)))
            dphi = ms.dphi_c(cid, W)
            h = 1e-6
            for i in range(ms.n):
                e = np.zeros(ms.n)
                e[i] = h
                fd = (ms.phi_c(cid, W + e) - ms.phi_c(cid, W - e)) / (2 * h)
                denom = np.maximum(np.abs(dphi[:, i]), 1.0)
                assert np.abs((fd - dphi[:, i]) / denom).max() < 1e-6
