"""Feedback laws, gain certificates, the admissibility series and force relations."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .clf import NonlinearGains, SafeRegion, p_bounds, safe_radius_R
from .errors import ConfigError, DomainError, CertificateScopeError
from .friction import FrictionModel, h_bar_bound, k_tilde_max
from .model import (
    Grid, LinearState, NonlinearState, PhysicalParams,
    centers_to_faces, face_integral, wall_values,
)

PI2 = math.pi**2


@dataclass(frozen=True)
class LinearGains:
    """Gains of the linear laws; only the groups that are used need to be set."""

    K: float | None = None
    k3: float | None = None
    k4: float | None = None
    k5: float | None = None
    k1: float | None = None
    k2: float | None = None
    B: float | None = None
    C: float | None = None
    r_tilde: np.ndarray | None = None
    p_tilde: np.ndarray | None = None

    def __post_init__(self):
        for name in ("K", "k3", "k4", "k5", "k1", "k2"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"gain {name} must be positive, got {val}")

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"missing linear gains: {', '.join(missing)}")


@dataclass
class GainCertificate:
    """Outcome of a gain check: every inequality by name plus the numbers behind it."""

    law: str
    checks: dict = field(default_factory=dict)
    quantities: dict = field(default_factory=dict)

    @property
    def violated(self) -> list:
        return [name for name, ok in self.checks.items() if not ok]

    @property
    def passed(self) -> bool:
        return not self.violated

    def to_dict(self) -> dict:
        return {"law": self.law, "passed": self.passed, "violated": self.violated,
                "checks": dict(self.checks), "quantities": dict(self.quantities)}


# ---------------------------------------------------------------------------
# feedback laws

def liquid_momentum(state: NonlinearState, grid: Grid) -> float:
    """Trapezoid integral of h v over the faces."""
    return face_integral(centers_to_faces(state.h) * state.v, grid.dx)


def nonlinear_feedback_formula(xi, w, momentum, level_diff, gains: NonlinearGains, mu):
    """The nonlinear law in terms of its four measured quantities."""
    return -gains.zeta * ((gains.delta + 1.0) * momentum + mu * level_diff - gains.q * (w + gains.k * xi))


def nonlinear_feedback(state: NonlinearState, gains: NonlinearGains, params: PhysicalParams, grid: Grid) -> float:
    """Tank acceleration command from tank state, liquid momentum and wall levels.

    Only the viscosity is read from `params`; gravity and surface tension are not needed.
    """
    h0, hL = wall_values(state.h)
    return nonlinear_feedback_formula(state.xi, state.w, liquid_momentum(state, grid), hL - h0, gains, params.mu)


def linear_feedback_formula(xi, w, moment, level_diff, gains: LinearGains, h_star, mu):
    """K [k5^2 w + k5 xi - h*(k3 + k4) moment - k3 mu h* level_diff]."""
    K, k3, k4, k5 = gains.K, gains.k3, gains.k4, gains.k5
    return K * (k5**2 * w + k5 * xi - h_star * (k3 + k4) * moment - k3 * mu * h_star * level_diff)


def linear_feedback(state: LinearState, gains: LinearGains, params: PhysicalParams, grid: Grid) -> float:
    gains.require("K", "k3", "k4", "k5")
    moment = face_integral(grid.nodes * state.phi_t, grid.dx)
    return linear_feedback_formula(state.xi, state.w, moment, state.phi[-1] - state.phi[0], gains,
                                   params.h_star, params.mu)


def linear_feedback_row(gains: LinearGains, params: PhysicalParams, grid: Grid) -> np.ndarray:
    """Row vector r with f = r @ [xi, w, phi, phi_t]."""
    gains.require("K", "k3", "k4", "k5")
    n = grid.n_nodes
    K, k3, k4, k5 = gains.K, gains.k3, gains.k4, gains.k5
    hs, mu = params.h_star, params.mu
    row = np.zeros(2 + 2 * n)
    row[0] = K * k5
    row[1] = K * k5**2
    row[2] += K * k3 * mu * hs
    row[1 + n] -= K * k3 * mu * hs
    row[2 + n:] = -K * hs * (k3 + k4) * grid.trapezoid_weights() * grid.nodes
    return row


def pd_feedback(xi, w, gains: LinearGains) -> float:
    gains.require("k1", "k2")
    return gains.k1 * xi + gains.k2 * w


# ---------------------------------------------------------------------------
# nonlinear certificates

def _theta(p1, gains: NonlinearGains, params: PhysicalParams):
    z, d, g, mu, L = gains.zeta, gains.delta, params.g, params.mu, params.L
    num = z * g * mu * d * PI2 * p1
    den = g * mu * d * PI2 * p1 + 2.0 * z * L * (params.m * g * L * params.H_max * (d + 1.0) ** 2
                                                 + 2.0 * mu**2 * d * PI2 * p1)
    return num / den


def theta_gain(r: float, gains: NonlinearGains, params: PhysicalParams, safe: SafeRegion | None = None) -> float:
    """Upper limit Theta(r) for k/q."""
    if safe is None:
        safe = safe_radius_R(gains, params)
    if not 0 <= r < safe.R:
        raise DomainError(f"r must lie in [0, R={safe.R}), got {r}")
    return _theta(p_bounds(r, gains, params)[0], gains, params)


def _level_checks(cert, r, gains, params):
    safe = safe_radius_R(gains, params)
    cert.quantities.update(R=safe.R, Q=safe.Q, zeta1=safe.zeta1, zeta2=safe.zeta2, r=r)
    ok = 0 <= r < safe.R
    cert.checks["r_in_safe_range"] = ok
    if ok:
        p1 = p_bounds(r, gains, params)[0]
        cert.quantities["p1_r"] = p1
        return safe, p1
    cert.quantities["p1_r"] = float("nan")
    return safe, None


def _tank_gain_check(cert, p1, gains, params):
    if p1 is None:
        cert.quantities["Theta"] = float("nan")
        cert.checks["k_below_q_theta"] = False
        return
    th = _theta(p1, gains, params)
    cert.quantities["Theta"] = th
    cert.quantities["q_Theta"] = gains.q * th
    cert.checks["k_below_q_theta"] = gains.k < gains.q * th


def check_level_bounded_gains(gains: NonlinearGains, params: PhysicalParams, model: FrictionModel | None, r: float) -> GainCertificate:
    """Certificate for sigma = 0 and a friction law bounded in terms of the level only."""
    if params.sigma > 0:
        raise CertificateScopeError("this certificate covers sigma = 0 only")
    model = params.friction if model is None else model
    if model.is_zero:
        cert = GainCertificate("sigma0_frictionless")
        safe, p1 = _level_checks(cert, r, gains, params)
        cert.quantities["K_bar"] = 0.0
        _tank_gain_check(cert, p1, gains, params)
        return cert
    if gains.omega is None:
        raise ConfigError("gain omega is required for a friction law with a level bound")
    cert = GainCertificate("sigma0_level_bounded_friction")
    Kbar = h_bar_bound(model, gains.omega, params)
    cert.quantities["K_bar"] = Kbar
    cert.quantities["omega"] = gains.omega
    cert.checks["friction_margin"] = 2.0 * params.g * (gains.delta + 1.0) > params.mu * Kbar
    safe, p1 = _level_checks(cert, r, gains, params)
    cert.checks["p1_at_least_omega"] = p1 is not None and p1 >= gains.omega
    _tank_gain_check(cert, p1, gains, params)
    return cert


def theta_tilde(gains: NonlinearGains, params: PhysicalParams) -> float:
    return _theta(gains.omega1, gains, params)


def general_friction_quantities(gains: NonlinearGains, params: PhysicalParams, K_tilde: float, R: float) -> dict:
    """Constants of the general-friction certificate (gamma_min/beta_min inf when alpha <= 0)."""
    z, k, q, d = gains.zeta, gains.k, gains.q, gains.delta
    g, mu, L, m, Hm = params.g, params.mu, params.L, params.m, params.H_max
    w1 = gains.omega1
    tt = theta_tilde(gains, params)
    eps1 = (d + 1.0) * g**2 * Hm / mu**2 + 3.0 * z**2 * L * ((d + 1.0) * (d + 2.0) * m + d * q)
    eps2 = 100.0 * (d + 1.0) ** 2 * R / (d**2 * mu**3)
    num = min(mu * g, 4.0 * q * k**3, 4.0 * q * (q * tt - k), mu * d)
    den = 2.0 * max(L**2 * (d + 2.0) * Hm / (PI2 * w1), (d + 1.0) * g * L**2 + 2.0 * mu**2 / w1, q * k**2, q)
    alpha = num / den
    if alpha > 0:
        gamma_min = 5.0 * (Hm * K_tilde**2 + eps1) / (d * mu * alpha)
        gamma = gains.gamma if gains.gamma is not None else gamma_min
        beta_min = max(4.0 * eps2 / ((2.0 * alpha + mu * d * gamma * w1) * w1**2), 20.0 * L / (3.0 * mu**2 * d * w1))
    else:
        gamma_min = beta_min = math.inf
    return {"K_tilde": K_tilde, "Theta_tilde": tt, "eps1": eps1, "eps2": eps2, "alpha_tilde": alpha,
            "gamma_min": gamma_min, "beta_min": beta_min}


def check_general_friction_gains(gains: NonlinearGains, params: PhysicalParams, model: FrictionModel | None, r: float) -> GainCertificate:
    """Certificate for sigma = 0 and a general friction law (bounded on a box)."""
    if params.sigma > 0:
        raise CertificateScopeError("this certificate covers sigma = 0 only")
    for name in ("omega1", "omega2", "beta", "gamma"):
        if getattr(gains, name) is None:
            raise ConfigError(f"gain {name} is required for the general-friction certificate")
    model = params.friction if model is None else model
    cert = GainCertificate("sigma0_general_friction")
    Kt = k_tilde_max(model, gains.omega1, gains.omega2, params.H_max, params.mu)
    safe, p1 = _level_checks(cert, r, gains, params)
    qs = general_friction_quantities(gains, params, Kt, safe.R)
    cert.quantities.update(qs)
    cert.checks["omega1_below_h_star"] = gains.omega1 < params.h_star
    cert.checks["friction_margin"] = 2.0 * params.g * (gains.delta + 1.0) > params.mu * Kt
    cert.checks["k_below_q_theta_tilde"] = gains.k < gains.q * qs["Theta_tilde"]
    cert.checks["gamma_above_min"] = gains.gamma > qs["gamma_min"]
    cert.checks["beta_above_min"] = gains.beta > qs["beta_min"]
    cert.checks["p1_above_omega1"] = p1 is not None and p1 > gains.omega1
    speed = math.sqrt(2.0 * params.L / 3.0 * (r + gains.gamma * r * math.exp(gains.beta * r)))
    cert.quantities["speed_bound"] = speed
    cert.checks["speed_bound_below_omega2"] = speed < gains.omega2
    return cert


def check_surface_tension_gains(gains: NonlinearGains, params: PhysicalParams, r: float) -> GainCertificate:
    """Certificate for sigma > 0 without friction."""
    if not params.sigma > 0:
        raise CertificateScopeError("this certificate needs sigma > 0")
    if not params.friction.is_zero:
        raise CertificateScopeError("this certificate needs kappa = 0")
    cert = GainCertificate("surface_tension_frictionless")
    safe, p1 = _level_checks(cert, r, gains, params)
    _tank_gain_check(cert, p1, gains, params)
    return cert


def check_nonlinear_gains(gains, params, r, model=None) -> GainCertificate:
    """Pick the applicable nonlinear certificate from sigma and the friction law."""
    model = params.friction if model is None else model
    if params.sigma > 0:
        return check_surface_tension_gains(gains, params, r)
    if model.is_zero:
        return check_level_bounded_gains(gains, params, model, r)
    try:
        model.h_bar(params.h_star, params.mu)
    except Exception:
        return check_general_friction_gains(gains, params, model, r)
    return check_level_bounded_gains(gains, params, model, r)


# ---------------------------------------------------------------------------
# linear certificates

def linear_gain_terms(gains: LinearGains, params: PhysicalParams):
    """(k5^-3, [three upper limits])."""
    gains.require("K", "k3", "k4", "k5")
    K, k3, k4, k5 = gains.K, gains.k3, gains.k4, gains.k5
    hs, mu, L, c2 = params.h_star, params.mu, params.L, params.c**2
    t1 = c2 / (4.0 * k3 * mu * hs**2 * L)
    t2 = mu * PI2 * (mu * PI2 + 2.0 * K * hs**2 * L**3 * k4) / (8.0 * K * hs**4 * L**6 * (k4 + k3) ** 2)
    t3 = K / 4.0
    return k5**-3.0, [t1, t2, t3]


def check_linear_gain_inequality(gains: LinearGains, params: PhysicalParams) -> GainCertificate:
    lhs, terms = linear_gain_terms(gains, params)
    cert = GainCertificate("linear_state_feedback")
    cert.quantities.update(k5_inv_cubed=lhs, bound_wave=terms[0], bound_moment=terms[1],
                           bound_gain=terms[2], bound=min(terms))
    cert.checks["k5_inv_cubed_below_bound"] = lhs < min(terms)
    return cert


def param_map(gains: NonlinearGains, params: PhysicalParams) -> LinearGains:
    """Linear gains under which the linear law is the linearization of the nonlinear one."""
    k, q, z, d, hs = gains.k, gains.q, gains.zeta, gains.delta, params.h_star
    return LinearGains(K=q * k**2 * z, k3=1.0 / (hs * q * k**2), k4=d / (hs * q * k**2), k5=1.0 / k)


def mapped_gain_bound(gains: NonlinearGains, params: PhysicalParams) -> float:
    """Upper limit for k under which the mapped linear gains are admissible."""
    q, z, d = gains.q, gains.zeta, gains.delta
    g, mu, L, hs = params.g, params.mu, params.L, params.h_star
    return 0.25 * q * min(g / (mu * L),
                          (mu * PI2 + 2.0 * d * z * hs * L**3) * mu * PI2 / (2.0 * z * hs**2 * L**6 * (d + 1.0) ** 2),
                          z)


def check_mapped_gain_inequality(gains: NonlinearGains, params: PhysicalParams) -> GainCertificate:
    cert = GainCertificate("linear_from_nonlinear_gains")
    bound = mapped_gain_bound(gains, params)
    cert.quantities.update(k=gains.k, k_bound=bound)
    cert.checks["k_below_mapped_bound"] = gains.k < bound
    return cert


def feedback_equivalence_check(nl_state: NonlinearState, gains: NonlinearGains, params: PhysicalParams, grid: Grid) -> float:
    """|nonlinear law - linear law on the linearized state| with mapped gains."""
    f_nl = nonlinear_feedback(nl_state, gains, params, grid)
    lg = param_map(gains, params)
    hs = params.h_star
    phi = nl_state.h - hs
    phi_t = -hs * np.diff(nl_state.v) / grid.dx
    moment = float(np.sum(grid.cell_centers * phi_t) * grid.dx)
    p0, pL = wall_values(phi)
    f_lin = linear_feedback_formula(nl_state.xi, nl_state.w, moment, pL - p0, lg, hs, params.mu)
    return abs(f_nl - f_lin)


# ---------------------------------------------------------------------------
# admissibility series

@dataclass(frozen=True)
class AdmissibilityResult:
    Gamma_lb: float
    Delta_lb: float
    gap_r: float
    gap_p: float
    tail_r: float
    tail_p: float
    lhs_r: float
    lhs_p: float
    passed: bool
    certified: bool


def _gl3():
    x, w = np.polynomial.legendre.leggauss(3)
    return x, w


def _segment_quadrature(fun_pw, fun_exact, nodes):
    """Integral of (piecewise linear) * (polynomial of degree <= 3), exact with 3-point Gauss."""
    xg, wg = _gl3()
    a, b = nodes[:-1, None], nodes[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * xg[None, :]
    return float(np.sum(0.5 * (b - a) * wg[None, :] * fun_pw(x) * fun_exact(x)))


def _odd_tail(n0):
    """Bound for sum of n^-4 over odd n >= n0."""
    return n0**-4.0 + 1.0 / (6.0 * n0**3)


def admissibility_series(r_tilde, p_tilde, params: PhysicalParams, n_terms: int, grid: Grid | None = None,
                         chunk: int = 2048) -> AdmissibilityResult:
    """Both gaps of the admissibility inequalities for node functions r_tilde, p_tilde.

    Node data are read as piecewise-linear functions, whose inner products
    with the cosine basis are evaluated in closed form.  ``gap_*`` use the
    truncated odd-n sums, ``Gamma_lb``/``Delta_lb`` subtract in addition a
    rigorous bound for the neglected tail.
    """
    if n_terms < 64:
        raise DomainError("n_terms must be at least 64")
    L = params.L
    r = np.asarray(r_tilde, dtype=float)
    p = np.asarray(p_tilde, dtype=float)
    if grid is None:
        grid = Grid(L, r.size - 1)
    x = grid.nodes
    if r.shape != x.shape or p.shape != x.shape:
        raise DomainError("r_tilde and p_tilde must be node functions of the grid")
    ghat = lambda s: s**3 - 1.5 * L * s**2 + 0.25 * L**3
    dghat = lambda s: 3.0 * s**2 - 3.0 * L * s
    interp = lambda vals: (lambda s: np.interp(s, x, vals))
    lhs_r = _segment_quadrature(interp(r), ghat, x)
    lhs_p = _segment_quadrature(interp(p), dghat, x)

    sr = np.diff(r) / np.diff(x)
    sp = np.diff(p) / np.diff(x)
    norm = math.sqrt(2.0 / L)
    sum_r = sum_p = 0.0
    ns = np.arange(1, 2 * n_terms, 2, dtype=float)
    for i in range(0, ns.size, chunk):
        n = ns[i:i + chunk, None]
        k = n * math.pi / L
        ck = np.cos(k * x[None, :])
        sk = np.sin(k * x[None, :])
        cos_int = np.sum(sr[None, :] * np.diff(ck, axis=1), axis=1) / k[:, 0] ** 2
        sin_int = ((p[0] - p[-1] * np.cos(k[:, 0] * L)) / k[:, 0]
                   + np.sum(sp[None, :] * np.diff(sk, axis=1), axis=1) / k[:, 0] ** 2)
        c_r = norm * cos_int
        c_p = -norm * k[:, 0] * sin_int
        sum_r += float(np.sum(np.abs(c_r) / n[:, 0] ** 4))
        sum_p += float(np.sum(np.abs(c_p) / n[:, 0] ** 4))
    pref = 12.0 * L**4 / math.pi**4 * norm
    rhs_r, rhs_p = pref * sum_r, pref * sum_p
    n0 = 2 * n_terms + 1
    C_r = norm * float(np.sum(0.5 * (np.abs(r[1:]) + np.abs(r[:-1])) * np.diff(x)))
    C_p = norm * (abs(p[0]) + abs(p[-1]) + float(np.sum(np.abs(np.diff(p)))))
    tail_r = pref * C_r * _odd_tail(n0)
    tail_p = pref * C_p * _odd_tail(n0)
    gap_r, gap_p = lhs_r - rhs_r, lhs_p - rhs_p
    tol_r = 1e-12 * (abs(lhs_r) + rhs_r)
    tol_p = 1e-12 * (abs(lhs_p) + rhs_p)
    Gamma_lb, Delta_lb = gap_r - tail_r, gap_p - tail_p
    return AdmissibilityResult(Gamma_lb, Delta_lb, gap_r, gap_p, tail_r, tail_p, lhs_r, lhs_p,
                               passed=gap_r >= -tol_r and gap_p >= -tol_p,
                               certified=Gamma_lb >= 0 and Delta_lb >= 0)


def proof_gain_functions(gains: LinearGains, params: PhysicalParams, grid: Grid):
    """r_tilde(x) = -K h*(k3 + k4) x and constant p_tilde = -K k3 mu h*."""
    gains.require("K", "k3", "k4")
    hs = params.h_star
    r = -gains.K * hs * (gains.k3 + gains.k4) * grid.nodes
    p = np.full(grid.n_nodes, -gains.K * gains.k3 * params.mu * hs)
    return r, p


# ---------------------------------------------------------------------------
# force relations

def _fd_weights(offsets, deriv):
    """Finite-difference weights at 0 for points at the given offsets."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(A, rhs)


_W_HXX = _fd_weights([0.5, 1.5, 2.5, 3.5], 2)


def wall_traces(state: NonlinearState, grid: Grid) -> dict:
    """One-sided wall values of h, v_x and h_xx."""
    dx = grid.dx
    h, v = state.h, state.v
    h0, hL = wall_values(h)
    vx0 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)
    vxL = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dx)
    hxx0 = float(_W_HXX @ h[:4]) / dx**2
    hxxL = float(_W_HXX @ h[::-1][:4]) / dx**2
    return {"h0": h0, "hL": hL, "vx0": vx0, "vxL": vxL, "hxx0": hxx0, "hxxL": hxxL}


def _friction_integral(state, params, grid):
    if params.friction.is_zero:
        return 0.0
    hf = centers_to_faces(state.h)
    return face_integral(params.friction.kappa(hf, state.v, params.mu) * state.v, grid.dx)


def liquid_force(state: NonlinearState, params: PhysicalParams, grid: Grid) -> float:
    """Horizontal force that the tank exerts on the liquid."""
    tr = wall_traces(state, grid)
    return (params.mu * (tr["hL"] * tr["vxL"] - tr["h0"] * tr["vx0"]) - _friction_integral(state, params, grid)
            + 0.5 * params.g * (tr["h0"] ** 2 - tr["hL"] ** 2)
            + params.sigma * (tr["hL"] * tr["hxxL"] - tr["h0"] * tr["hxx0"]))


def external_force(state: NonlinearState, f: float, dh_dt_boundary, params: PhysicalParams, grid: Grid) -> float:
    """Force to apply to the tank, from wall level rates (dh(0)/dt, dh(L)/dt)."""
    tr = wall_traces(state, grid)
    dh0, dhL = dh_dt_boundary
    return (-_friction_integral(state, params, grid) + params.mu * (dh0 - dhL)
            + 0.5 * params.g * (tr["h0"] ** 2 - tr["hL"] ** 2)
            + params.sigma * (tr["hL"] * tr["hxxL"] - tr["h0"] * tr["hxx0"]) - params.m_bar * f)


def external_force_from_traces(state: NonlinearState, f: float, params: PhysicalParams, grid: Grid) -> float:
    """Same force written with the wall velocity gradients instead of level rates."""
    return liquid_force(state, params, grid) - params.m_bar * f
