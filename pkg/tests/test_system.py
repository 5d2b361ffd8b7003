"""The two lifts, upsilon, flows, and adapted-gradient certification."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlf.geometry import DomainError, EuclideanMorseSystem, PhasePoint
from mlf.ode import OdeConfig
from mlf.system import (
    check_adapted_gradient,
    contact_lift,
    eval_g,
    flow_nu_bar,
    flow_nu_tilde,
    hamiltonian_lift,
    upsilon,
)


@pytest.fixture(scope="module")
def ms21():
    return EuclideanMorseSystem(2, [-1.0, 1.0])


def test_eval_g_examples(ms21):
    assert eval_g(PhasePoint([0.3, -0.2], [0.0, 0.0]), ms21) == 0.0
    # eps = (-1, +1): g = 2 (eps1 p1 q1 + eps2 p2 q2)
    assert eval_g(PhasePoint([0.0, 1.0], [1.0, 0.0]), ms21) == 0.0
    ms1 = EuclideanMorseSystem(1, [1.0])
    assert eval_g(PhasePoint([1.0], [1.0]), ms1) == 2.0


def test_g_odd_in_p(ms21):
    rng = np.random.default_rng(0)
    for _ in range(50):
        q, p = rng.standard_normal(2), rng.standard_normal(2)
        assert eval_g(PhasePoint(q, -p), ms21) == -eval_g(PhasePoint(q, p), ms21)


def test_hamiltonian_lift_chart_display(ms21):
    # (p, q) = ((1, 2), (3, 4)) with eps = (-1, +1): (qdot, pdot) = ((-6, 8), (2, -4))
    _, qdot, pdot = hamiltonian_lift(PhasePoint(q=[3.0, 4.0], p=[1.0, 2.0]), ms21)
    assert np.allclose(qdot, [-6.0, 8.0], atol=1e-14)
    assert np.allclose(pdot, [2.0, -4.0], atol=1e-14)
    # equilibrium at the critical point with p = 0
    _, qdot, pdot = hamiltonian_lift(PhasePoint(q=[0.0, 0.0], p=[0.0, 0.0]), ms21)
    assert np.all(qdot == 0) and np.all(pdot == 0)


def test_upsilon_values_and_errors(ms21):
    assert upsilon(PhasePoint([0, 0], [1.0, 0.0]), ms21) == pytest.approx(2.0, abs=1e-15)
    assert upsilon(PhasePoint([0, 0], [0.0, 1.0]), ms21) == pytest.approx(-2.0, abs=1e-15)
    with pytest.raises(DomainError):
        upsilon(PhasePoint([0.5, 0.5], [0.0, 0.0]), ms21)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 20.0), st.integers(0, 10**6))
def test_upsilon_zero_homogeneous(t, seed):
    ms = EuclideanMorseSystem(2, [-1.0, 1.0])
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(2)
    p = rng.standard_normal(2)
    if np.linalg.norm(p) < 1e-6:
        return
    u1 = upsilon(PhasePoint(q, p), ms)
    u2 = upsilon(PhasePoint(q, t * p), ms)
    assert abs(u1 - u2) < 1e-10 * max(1.0, abs(u1))


def test_upsilon_range_in_charts(ms21):
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        assert -2.0 - 1e-12 <= upsilon(x, ms21) <= 2.0 + 1e-12


def test_contact_lift_tangency_and_zeros(sphere):
    ms = sphere.ms
    rng = np.random.default_rng(2)
    # d rho(nu_bar) = 0 at 100 random samples
    from mlf.complexify import sample_tube
    from mlf.system import nu_bar_batch

    Q, cids, W, PW = sample_tube(ms, rng, 100, r_max=1.2, r_min=0.1)
    for cid in np.unique(cids):
        sel = cids == cid
        qdot, pdot = nu_bar_batch(ms, cid, W[sel], PW[sel])
        dw, dp = ms.drho_c(cid, W[sel], PW[sel])
        vals = np.einsum("ni,ni->n", dw, qdot) + np.einsum("ni,ni->n", dp, pdot)
        assert np.abs(vals).max() < 1e-12
    # zero vector on the critical spheres
    from mlf.complexify import c_sphere_samples

    for k, sign in ((0, -1), (1, +1)):
        for x in c_sphere_samples(ms, k, sign, 0.4, 8, rng):
            _, qdot, pdot = contact_lift(x, ms)
            assert np.linalg.norm(qdot) + np.linalg.norm(pdot) < 1e-12
    # nonvanishing over regular base points with generic covectors
    q = np.array([1.0, 0.0, 0.0])
    p = np.array([0.0, 0.3, 0.5])
    _, qdot, pdot = contact_lift(PhasePoint(q, p), ms)
    assert np.linalg.norm(qdot) + np.linalg.norm(pdot) > 1e-3


def test_flow_conservation_sphere(sphere):
    ms = sphere.ms
    x0 = PhasePoint(q=[0.3, -0.4, -np.sqrt(0.75)], p=[0.5, 0.2, 0.0])
    x0.p -= (x0.p @ x0.q) * x0.q
    res = flow_nu_tilde(ms, x0, 10.0, OdeConfig(abs_tol=1e-12, rel_tol=1e-11,
                                                escape_radius=1e7))
    assert res.diagnostics["g"] < 1e-8
    assert res.diagnostics["constraints"] < 1e-8
    res = flow_nu_bar(ms, x0, 4.0, OdeConfig(abs_tol=1e-12, rel_tol=1e-11))
    assert res.diagnostics["rho"] < 1e-8


def test_flow_fixed_point(ms21):
    x0 = PhasePoint(q=[0.0, 0.0], p=[0.0, 0.0])
    res = flow_nu_tilde(ms21, x0, 5.0, OdeConfig())
    assert np.abs(res.states).max() < 1e-12


def test_flow_escape(ms21):
    x0 = PhasePoint(q=[0.0, 0.0], p=[0.0, 1.0])   # expanding covector direction
    res = flow_nu_tilde(ms21, x0, 30.0, OdeConfig(escape_radius=10.0))
    assert res.terminal == "escaped"


def test_liouville_form_preserved_along_lift(quadric21):
    # pulled-back canonical form along the time-t flow matches lambda
    ms = quadric21.ms
    rng = np.random.default_rng(3)
    cfg = OdeConfig(abs_tol=1e-12, rel_tol=1e-11)
    from mlf.ode import flow

    def rhs(t, y):
        return ms.nu_tilde_rhs(y)

    for _ in range(5):
        y0 = rng.standard_normal(4) * 0.6
        v = rng.standard_normal(4) * 1.0
        h = 1e-5
        t_end = 1.0
        ya = flow(rhs, y0 + h * v, t_end, cfg).final
        yb = flow(rhs, y0 - h * v, t_end, cfg).final
        dflow_v = (ya - yb) / (2 * h)
        y1 = flow(rhs, y0, t_end, cfg).final
        lam0 = y0[2:] @ v[:2]
        lam1 = y1[2:] @ dflow_v[:2]
        assert abs(lam1 - lam0) < 1e-5 * max(1.0, abs(lam0))


def test_stable_conormal_converges(torus_tilted):
    # flowing nu_tilde forward from small samples of N*E^-(a) approaches a
    ms = torus_tilted.ms
    k = 2                       # saddle at (pi, 0), eps = (-1, +1)
    c = ms.crit[k]
    rng = np.random.default_rng(4)
    cfg = OdeConfig(abs_tol=1e-11, rel_tol=1e-10, escape_radius=1e6)
    for _ in range(4):
        s = np.zeros(2)
        s[0] = rng.uniform(-1e-3, 1e-3)      # along the stable axis
        pw = np.zeros(2)
        pw[1] = rng.uniform(-1e-3, 1e-3)     # conormal direction
        Qg, Pg = ms.crit_chart_to_global(k, s[None], pw[None])
        res = flow_nu_tilde(ms, PhasePoint(Qg[0], Pg[0]), 20.0, cfg)
        qend = res.final[:2]
        assert float(ms.base_distance(qend[None], c.location[None])[0]) < 1e-4


def test_check_adapted_gradient(sphere, torus_upright):
    assert check_adapted_gradient(sphere.ms, np.random.default_rng(5)).passed
    # adaptedness holds on the upright torus even though Morse-Smale fails
    assert check_adapted_gradient(torus_upright.ms, np.random.default_rng(6)).passed


def test_adapted_gradient_detects_sign_flip(torus_tilted):
    ms = torus_tilted.ms

    class Negated:
        def __getattr__(self, name):
            return getattr(ms, name)

        def nu_c(self, cid, W):
            return -ms.nu_c(cid, W)

    rep = check_adapted_gradient(Negated(), np.random.default_rng(7))
    assert not rep.passed and rep.min_margin < 0
