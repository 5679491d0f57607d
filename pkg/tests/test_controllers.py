import inspect
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscotank.clf import NonlinearGains, p_bounds, safe_radius_R
from viscotank.controllers import (
    LinearGains, admissibility_series, check_linear_gain_inequality, check_mapped_gain_inequality,
    check_nonlinear_gains, check_level_bounded_gains, check_general_friction_gains, check_surface_tension_gains, external_force,
    external_force_from_traces, feedback_equivalence_check, linear_feedback, linear_feedback_row,
    liquid_force, mapped_gain_bound, nonlinear_feedback, nonlinear_feedback_formula, param_map,
    pd_feedback, proof_gain_functions, theta_gain,
)
from viscotank.errors import ConfigError, DomainError, NotHCompliantError, CertificateScopeError
from viscotank.friction import CfAbsV, GerbeauPerthame, Zero
from viscotank.model import Grid, LinearState, NonlinearState, PhysicalParams, equilibrium_state, wall_values
from viscotank.nonlinear import rhs_nonlinear

from conftest import random_state

PI2 = math.pi**2


# -- feedback laws -----------------------------------------------------------

def test_nonlinear_feedback_examples():
    p = PhysicalParams(g=1, mu=1, sigma=0, L=1, m=1, H_max=2)
    g = Grid(1.0, 40)
    gains = NonlinearGains(zeta=1, k=1, q=2, delta=1)
    s = equilibrium_state(p, g)
    assert nonlinear_feedback(s, gains, p, g) == 0.0
    tilt = s.copy_with(h=1 + 0.2 * (g.cell_centers - 0.5))
    assert nonlinear_feedback(tilt, gains, p, g) == pytest.approx(-0.2, abs=1e-14)
    assert nonlinear_feedback(s.copy_with(w=1.0), gains, p, g) == pytest.approx(2.0)


def test_nonlinear_feedback_ignores_gravity_and_tension(nl_gains):
    sig = inspect.signature(nonlinear_feedback_formula)
    assert list(sig.parameters) == ["xi", "w", "momentum", "level_diff", "gains", "mu"]
    rng = np.random.default_rng(1)
    p = PhysicalParams(g=1, mu=0.5, sigma=0, L=1, m=1, H_max=2)
    g = Grid(1.0, 32)
    s = random_state(p, g, 0.05, rng)
    f = nonlinear_feedback(s, nl_gains, p, g)
    for other in (p.with_(g=9.81), p.with_(sigma=3.0)):
        assert nonlinear_feedback(s, nl_gains, other, g) == f


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.floats(-3, 3))
def test_nonlinear_feedback_is_linear_in_measurements(vals, lam):
    gains = NonlinearGains(zeta=0.7, k=1.1, q=3.0, delta=2.0)
    f = lambda v: nonlinear_feedback_formula(*v, gains, 0.4)
    base = f(vals)
    for i in range(4):
        e = [0.0] * 4
        e[i] = 1.0
        moved = list(vals)
        moved[i] += lam
        assert f(moved) == pytest.approx(base + lam * f(e), rel=1e-9, abs=1e-9)


def test_tank_scaling_with_fluid_at_rest(base_params, nl_gains):
    g = Grid(1.0, 16)
    s = equilibrium_state(base_params, g).copy_with(xi=0.3, w=-0.2)
    f = nonlinear_feedback(s, nl_gains, base_params, g)
    s2 = s.copy_with(xi=2.5 * 0.3, w=2.5 * -0.2)
    assert nonlinear_feedback(s2, nl_gains, base_params, g) == pytest.approx(2.5 * f, rel=1e-14)


def test_linear_feedback_examples():
    L = 1.7
    p = PhysicalParams(g=1, mu=0.5, sigma=0.1, L=L, m=L, H_max=2)
    g = Grid.from_nodes(L, 2001)
    gains = LinearGains(K=1.0, k3=0.25, k4=0.75, k5=3.0)
    z = np.zeros(g.n_nodes)
    assert linear_feedback(LinearState(0, 0, 0, z, z), gains, p, g) == 0.0
    pt = np.cos(math.pi * g.nodes / L)
    val = linear_feedback(LinearState(0, 0, 0, z, pt), gains, p, g)
    assert val == pytest.approx(2 * L**2 / PI2, rel=1e-6)
    assert linear_feedback(LinearState(0, 1.0, 0, z, z), gains, p, g) == pytest.approx(3.0)


def test_linear_feedback_row_matches_law(tension_params):
    g = Grid.from_nodes(1.0, 31)
    gains = LinearGains(K=1.3, k3=0.4, k4=0.9, k5=2.0)
    row = linear_feedback_row(gains, tension_params, g)
    rng = np.random.default_rng(0)
    for _ in range(10):
        s = LinearState(0, *rng.standard_normal(2), rng.standard_normal(31), rng.standard_normal(31))
        y = np.concatenate([[s.xi, s.w], s.phi, s.phi_t])
        assert row @ y == pytest.approx(linear_feedback(s, gains, tension_params, g), rel=1e-12, abs=1e-12)


def test_pd_feedback():
    assert pd_feedback(0, 0, LinearGains(k1=1, k2=1)) == 0
    assert pd_feedback(1, 0, LinearGains(k1=3, k2=1)) == 3
    assert pd_feedback(1, -1, LinearGains(k1=2, k2=2)) == 0
    with pytest.raises(ConfigError):
        pd_feedback(1, 1, LinearGains(K=1))
    with pytest.raises(ConfigError):
        LinearGains(K=-1.0)


# -- nonlinear certificates ---------------------------------------------------

def test_theta_properties(base_params, nl_gains):
    safe = safe_radius_R(nl_gains, base_params)
    rs = np.linspace(0, 0.999 * safe.R, 400)
    th = np.array([theta_gain(r, nl_gains, base_params, safe) for r in rs])
    assert np.all(th > 0)
    assert np.all(np.diff(th) <= 1e-15)
    assert p_bounds(0.0, nl_gains, base_params)[0] == base_params.h_star
    z, g, mu, d, L = 1.0, 1.0, 0.5, 1.0, 1.0
    ref = z * g * mu * d * PI2 / (g * mu * d * PI2 + 2 * z * L * (1 * g * L * 2.0 * 4 + 2 * mu**2 * d * PI2))
    assert th[0] == pytest.approx(ref, rel=1e-14)
    with pytest.raises(DomainError):
        theta_gain(safe.R, nl_gains, base_params, safe)


def test_frictionless_certificate(base_params, nl_gains):
    cert = check_level_bounded_gains(nl_gains, base_params, Zero(), 0.005)
    assert cert.passed and cert.violated == []
    assert set(cert.checks) == {"r_in_safe_range", "k_below_q_theta"}
    th = theta_gain(0.005, nl_gains, base_params)
    bad = NonlinearGains(zeta=1, k=2 * nl_gains.q * th, q=nl_gains.q, delta=1)
    cert = check_level_bounded_gains(bad, base_params, Zero(), 0.005)
    assert not cert.passed and cert.violated == ["k_below_q_theta"]
    # strictness: k equal to q Theta fails
    edge = NonlinearGains(zeta=1, k=nl_gains.q * th, q=nl_gains.q, delta=1)
    assert check_level_bounded_gains(edge, base_params, Zero(), 0.005).violated == ["k_below_q_theta"]


def test_level_bounded_friction_delta_threshold():
    p = PhysicalParams(g=0.5, mu=2.0, sigma=0, L=1, m=1, H_max=2, friction=GerbeauPerthame(10.0))
    Kbar = 3 * 2.0 * 10.0 / (0.25 * (6.0 + 40.0 * 0.5))
    d_star = 2.0 * Kbar / (2 * 0.5) - 1.0
    results = {}
    for d in (0.99 * d_star, 1.01 * d_star):
        gains = NonlinearGains(zeta=1, k=0.01, q=1, delta=d, omega=0.5)
        cert = check_level_bounded_gains(gains, p, None, 1e-4)
        assert cert.quantities["K_bar"] == pytest.approx(Kbar, rel=1e-14)
        results[d] = cert
    lo, hi = results.values()
    assert lo.violated == ["friction_margin"]
    assert hi.passed


def test_level_bounded_certificate_errors(tension_params, base_params):
    gains = NonlinearGains(zeta=1, k=1, q=1, delta=1, omega=0.5)
    with pytest.raises(CertificateScopeError):
        check_level_bounded_gains(gains, tension_params, Zero(), 0.0)
    with pytest.raises(NotHCompliantError):
        check_level_bounded_gains(gains, base_params, CfAbsV(1.0), 0.0)
    with pytest.raises(ConfigError):
        check_level_bounded_gains(NonlinearGains(zeta=1, k=1, q=1, delta=1), base_params, GerbeauPerthame(1.0), 0.0)


def _general_friction_oracle(gains, p, Kt, R):
    # independent straight-line transcription
    z, k, q, d, w1 = gains.zeta, gains.k, gains.q, gains.delta, gains.omega1
    g, mu, L, m, Hm = p.g, p.mu, p.L, p.m, p.H_max
    tt = z * g * mu * d * PI2 * w1 / (g * mu * d * PI2 * w1 + 2 * z * L * (m * g * L * Hm * (d + 1) ** 2 + 2 * mu**2 * d * PI2 * w1))
    e1 = (d + 1) * g**2 * Hm / mu**2 + 3 * z**2 * L * ((d + 1) * (d + 2) * m + d * q)
    e2 = 100 * (d + 1) ** 2 * R / (d**2 * mu**3)
    a = min(mu * g, 4 * q * k**3, 4 * q * (q * tt - k), mu * d) / (
        2 * max((d + 2) * L**2 * Hm / (PI2 * w1), (d + 1) * g * L**2 + 2 * mu**2 / w1, q * k**2, q))
    gmin = 5 * (Hm * Kt**2 + e1) / (d * mu * a)
    bmin = max(4 * e2 / ((2 * a + mu * d * gains.gamma * w1) * w1**2), 20 * L / (3 * mu**2 * d * w1))
    return {"Theta_tilde": tt, "eps1": e1, "eps2": e2, "alpha_tilde": a, "gamma_min": gmin, "beta_min": bmin}


def _general_friction_gains(p, model, gamma_mult=2.0, beta_mult=2.0):
    from viscotank.controllers import general_friction_quantities
    from viscotank.friction import k_tilde_max
    base = NonlinearGains(zeta=1, k=0.2, q=4, delta=1, omega1=0.8, omega2=0.5, beta=1.0, gamma=1.0)
    Kt = k_tilde_max(model, 0.8, 0.5, p.H_max, p.mu)
    R = safe_radius_R(base, p).R
    qs = general_friction_quantities(base, p, Kt, R)
    gamma = gamma_mult * qs["gamma_min"]
    g2 = NonlinearGains(zeta=1, k=0.2, q=4, delta=1, omega1=0.8, omega2=0.5, beta=1.0, gamma=gamma)
    beta = beta_mult * general_friction_quantities(g2, p, Kt, R)["beta_min"]
    return NonlinearGains(zeta=1, k=0.2, q=4, delta=1, omega1=0.8, omega2=0.5, beta=beta, gamma=gamma)


@pytest.mark.parametrize("model", [Zero(), CfAbsV(0.3), GerbeauPerthame(0.5)])
def test_general_friction_certificate_matches_oracle(model):
    p = PhysicalParams(g=1, mu=0.5, sigma=0, L=1, m=1, H_max=2, friction=model)
    gains = _general_friction_gains(p, model)
    r = min(1e-3, 0.2 / gains.beta) * 1e-3
    cert = check_general_friction_gains(gains, p, None, r)
    ref = _general_friction_oracle(gains, p, cert.quantities["K_tilde"], cert.quantities["R"])
    for key, val in ref.items():
        assert cert.quantities[key] == pytest.approx(val, rel=1e-12), key
    assert cert.passed, cert.violated
    if model.is_zero:
        assert cert.quantities["K_tilde"] == 0.0 and cert.checks["friction_margin"]


def test_general_friction_certificate_beta_violation():
    p = PhysicalParams(g=1, mu=0.5, sigma=0, L=1, m=1, H_max=2, friction=CfAbsV(0.3))
    gains = _general_friction_gains(p, p.friction, beta_mult=0.5)
    r = 1e-3 / gains.beta * 1e-3
    cert = check_general_friction_gains(gains, p, None, r)
    assert cert.violated == ["beta_above_min"]


def test_general_friction_certificate_errors(tension_params, base_params):
    gains = NonlinearGains(zeta=1, k=1, q=1, delta=1, omega1=0.5, omega2=0.5, beta=1, gamma=1)
    with pytest.raises(CertificateScopeError):
        check_general_friction_gains(gains, tension_params, None, 0.0)
    with pytest.raises(ConfigError):
        check_general_friction_gains(NonlinearGains(zeta=1, k=1, q=1, delta=1), base_params, None, 0.0)


def test_surface_tension_certificate(tension_params, nl_gains):
    assert check_surface_tension_gains(nl_gains, tension_params, 0.01).passed
    th = theta_gain(0.01, nl_gains, tension_params)
    edge = NonlinearGains(zeta=1, k=nl_gains.q * th, q=nl_gains.q, delta=1)
    assert check_surface_tension_gains(edge, tension_params, 0.01).violated == ["k_below_q_theta"]
    just_below = NonlinearGains(zeta=1, k=nl_gains.q * th * (1 - 1e-9), q=nl_gains.q, delta=1)
    assert check_surface_tension_gains(just_below, tension_params, 0.01).passed
    R = safe_radius_R(nl_gains, tension_params).R
    assert check_surface_tension_gains(nl_gains, tension_params, R).violated == ["r_in_safe_range", "k_below_q_theta"]
    with pytest.raises(CertificateScopeError):
        check_surface_tension_gains(nl_gains, tension_params.with_(friction=GerbeauPerthame(1.0)), 0.01)
    with pytest.raises(CertificateScopeError):
        check_surface_tension_gains(nl_gains, tension_params.with_(sigma=0.0), 0.01)


def test_certificate_dispatch(base_params, tension_params, nl_gains):
    assert check_nonlinear_gains(nl_gains, tension_params, 0.01).law == "surface_tension_frictionless"
    assert check_nonlinear_gains(nl_gains, base_params, 0.01).law == "sigma0_frictionless"
    gp = base_params.with_(friction=GerbeauPerthame(1.0))
    g = NonlinearGains(zeta=1, k=1, q=20, delta=1, omega=0.5)
    assert check_nonlinear_gains(g, gp, 0.001).law == "sigma0_level_bounded_friction"
    cert = check_nonlinear_gains(nl_gains, base_params, 0.01)
    d = cert.to_dict()
    assert d["passed"] == (d["violated"] == [])


# -- linear certificates ------------------------------------------------------

def _lin_terms(gains, p):
    K, k3, k4, k5 = gains.K, gains.k3, gains.k4, gains.k5
    hs, mu, L = p.h_star, p.mu, p.L
    return k5**-3, min(p.c**2 / (4 * k3 * mu * hs**2 * L),
                       mu * PI2 * (mu * PI2 + 2 * K * hs**2 * L**3 * k4) / (8 * K * hs**4 * L**6 * (k4 + k3) ** 2),
                       K / 4)


def test_linear_inequality_examples(tension_params):
    assert check_linear_gain_inequality(LinearGains(K=1, k3=1, k4=1, k5=1e6), tension_params).passed
    edge = LinearGains(K=4, k3=0.01, k4=0.01, k5=1)
    cert = check_linear_gain_inequality(edge, tension_params)
    assert cert.quantities["bound"] == 1.0 and not cert.passed


def test_linear_inequality_random_draws(tension_params):
    rng = np.random.default_rng(4)
    for _ in range(200):
        gains = LinearGains(*np.exp(rng.uniform(-3, 3, 4)))
        lhs, rhs = _lin_terms(gains, tension_params)
        assert check_linear_gain_inequality(gains, tension_params).passed == (lhs < rhs)


def test_param_map_example():
    p = PhysicalParams(g=1, mu=1, sigma=0, L=1, m=1, H_max=2)
    lg = param_map(NonlinearGains(zeta=2, k=0.5, q=1, delta=1), p)
    assert (lg.k5, lg.k3, lg.k4, lg.K) == pytest.approx((2.0, 4.0, 4.0, 0.5))
    k = 0.37
    assert param_map(NonlinearGains(zeta=1, k=k, q=3, delta=2), p).k5 == 1 / k


def test_mapped_bound_equivalent_to_linear_inequality():
    rng = np.random.default_rng(8)
    agree = 0
    for _ in range(500):
        p = PhysicalParams(g=rng.uniform(0.5, 10), mu=rng.uniform(0.05, 2), sigma=rng.uniform(0, 1),
                           L=rng.uniform(0.3, 3), m=1.0, H_max=10.0)
        gains = NonlinearGains(*np.exp(rng.uniform(-2, 2, 4)))
        mapped = check_mapped_gain_inequality(gains, p)
        lin = check_linear_gain_inequality(param_map(gains, p), p)
        bound = mapped_gain_bound(gains, p)
        if abs(gains.k - bound) > 1e-9 * bound:
            assert mapped.passed == lin.passed
            agree += 1
    assert agree > 450


def test_feedback_equivalence_identity_and_order(base_params, nl_gains):
    g = Grid(1.0, 256)
    assert feedback_equivalence_check(equilibrium_state(base_params, g), nl_gains, base_params, g) == 0.0
    # momentum identity on a single velocity mode with the level at rest
    v = np.sin(math.pi * g.faces)
    v[0] = v[-1] = 0
    s = equilibrium_state(base_params, g).copy_with(v=v)
    assert feedback_equivalence_check(s, nl_gains, base_params, g) < 1e-14
    res = []
    x, xf = g.cell_centers, g.faces
    for a in (1e-2, 5e-3, 2.5e-3):
        h = 1 + a * np.cos(math.pi * x) + 0.5 * a * np.cos(2 * math.pi * x)
        vv = a * np.sin(math.pi * xf)
        vv[0] = vv[-1] = 0
        res.append(feedback_equivalence_check(NonlinearState(0, a, a, h, vv), nl_gains, base_params, g))
    assert res[0] / res[1] == pytest.approx(4.0, abs=0.5)
    assert res[1] / res[2] == pytest.approx(4.0, abs=0.5)


# -- admissibility series ----------------------------------------------------

def test_admissibility_zero_functions(base_params):
    g = Grid(1.0, 32)
    res = admissibility_series(np.zeros(33), np.zeros(33), base_params, 64, g)
    assert res.gap_r == 0 and res.gap_p == 0 and res.passed and res.certified


def test_admissibility_proof_gains_are_borderline(tension_params):
    g = Grid(1.0, 64)
    gains = LinearGains(K=1.5, k3=0.4, k4=0.8, k5=2.0)
    r, pt = proof_gain_functions(gains, tension_params, g)
    res = admissibility_series(r, pt, tension_params, 10_000, g)
    hs, L = tension_params.h_star, tension_params.L
    assert res.lhs_r == pytest.approx(1.5 * hs * 1.2 * L**5 / 20, rel=1e-13)
    assert res.lhs_p == pytest.approx(1.5 * 0.4 * tension_params.mu * hs * L**3 / 2, rel=1e-13)
    assert abs(res.gap_r) < 1e-9 and abs(res.gap_p) < 1e-9
    assert res.tail_r < 1e-9 and res.tail_p < 1e-9
    assert res.passed


def test_admissibility_adversarial_failure(base_params):
    g = Grid(1.0, 128)
    x = g.nodes
    # a positive multiple of x has a negative inner product with the cubic weight
    r = 1e3 * x
    pt = 1e3 * np.cos(math.pi * x)
    res = admissibility_series(r, pt, base_params, 256, g)
    assert not res.passed and not res.certified
    assert res.lhs_r < 0


def test_admissibility_precondition(base_params):
    with pytest.raises(DomainError):
        admissibility_series(np.zeros(9), np.zeros(9), base_params, 10)


def test_admissibility_coefficients_against_quadrature(base_params):
    # piecewise-linear inner products checked by an adaptive integrator
    from scipy.integrate import quad
    g = Grid(1.0, 16)
    rng = np.random.default_rng(2)
    r = rng.standard_normal(17)
    pt = np.zeros(17)
    res = admissibility_series(r, pt, base_params, 64, g)
    terms = []
    for n in range(1, 128, 2):
        c = quad(lambda s: math.sqrt(2) * math.cos(n * math.pi * s) * np.interp(s, g.nodes, r), 0, 1,
                 points=list(g.nodes[1:-1]), limit=200)[0]
        terms.append(abs(c) / n**4)
    rhs = 12 / math.pi**4 * math.sqrt(2) * sum(terms)
    assert res.lhs_r - res.gap_r == pytest.approx(rhs, rel=1e-9)


# -- forces --------------------------------------------------------------------

def test_liquid_force_equilibrium_and_mirror(tension_params):
    g = Grid(1.0, 64)
    s = equilibrium_state(tension_params, g)
    assert liquid_force(s, tension_params, g) == 0.0
    rng = np.random.default_rng(3)
    r = random_state(tension_params, g, 0.05, rng)
    mirror = r.copy_with(h=r.h[::-1].copy(), v=-r.v[::-1].copy())
    assert liquid_force(mirror, tension_params, g) == pytest.approx(-liquid_force(r, tension_params, g), rel=1e-12)


def test_liquid_force_symmetric_state(base_params):
    g = Grid(1.0, 64)
    x, xf = g.cell_centers, g.faces
    h = 1 + 0.05 * np.cos(2 * math.pi * x)
    v = 0.1 * np.sin(2 * math.pi * xf)
    v[0] = v[-1] = 0
    s = NonlinearState(0, 0, 0, h, v)
    from viscotank.controllers import wall_traces
    tr = wall_traces(s, g)
    assert tr["h0"] == pytest.approx(tr["hL"], rel=1e-14)
    visc = base_params.mu * (tr["hL"] * tr["vxL"] - tr["h0"] * tr["vx0"])
    assert liquid_force(s, base_params, g) == pytest.approx(visc, abs=1e-14)


def test_external_force_examples(base_params):
    g = Grid(1.0, 32)
    s = equilibrium_state(base_params, g)
    assert external_force(s, 0.0, (0.0, 0.0), base_params, g) == 0.0
    p2 = base_params.with_(m_bar=2.5)
    assert external_force(s, 0.4, (0.0, 0.0), p2, g) == pytest.approx(-1.0)


def test_external_force_two_forms_agree(base_params):
    p = base_params.with_(friction=GerbeauPerthame(0.5))
    errs = []
    for n in (64, 128, 256):
        g = Grid(1.0, n)
        x, xf = g.cell_centers, g.faces
        h = 1 + 0.05 * np.cos(math.pi * x) + 0.02 * np.cos(3 * math.pi * x)
        v = 0.1 * np.sin(math.pi * xf) + 0.03 * np.sin(2 * math.pi * xf)
        v[0] = v[-1] = 0
        s = NonlinearState(0, 0.1, 0.2, h, v)
        d = rhs_nonlinear(s, 0.3, p, g)
        dh = wall_values(d.h)
        e1 = external_force(s, 0.3, dh, p, g)
        e2 = external_force_from_traces(s, 0.3, p, g)
        errs.append(abs(e1 - e2))
    assert errs[-1] < 1e-4
    assert errs[0] / errs[-1] > 10
