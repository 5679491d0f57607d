"""Lyapunov functionals, level sets and the safe-region machinery."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import bisect

from .errors import ConfigError, DomainError, PreconditionError
from .model import (
    Grid, LinearState, NonlinearState, PhysicalParams,
    center_integral, centers_to_faces, face_integral, half_norm2, node_gradient,
    node_laplacian, node_norm2, slope_at_faces, state_norm_X,
)


@dataclass(frozen=True)
class NonlinearGains:
    """Gains of the nonlinear feedback and the optional extras of the certificates."""

    zeta: float
    k: float
    q: float
    delta: float
    omega: float | None = None
    omega1: float | None = None
    omega2: float | None = None
    beta: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        for name in ("zeta", "k", "q", "delta", "omega", "omega1", "omega2", "beta", "gamma"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"gain {name} must be positive, got {val}")

    def has_v_tilde_extras(self) -> bool:
        return self.beta is not None and self.gamma is not None


# ---------------------------------------------------------------------------
# energies

def _faces_h(state: NonlinearState):
    if np.any(state.h <= 0):
        raise DomainError("functional needs h > 0")
    hf = centers_to_faces(state.h)
    if np.any(hf <= 0):
        raise DomainError("extrapolated wall level is not positive")
    return hf


def _potential(state: NonlinearState, params: PhysicalParams, grid: Grid) -> float:
    dx = grid.dx
    pot = 0.5 * params.g * center_integral((state.h - params.h_star) ** 2, dx)
    if params.sigma > 0:
        hx = slope_at_faces(state.h, dx)
        pot += params.sigma * face_integral(np.sqrt(1.0 + hx**2) - 1.0, dx)
    return pot


def energy_E(state: NonlinearState, params: PhysicalParams, grid: Grid) -> float:
    """Mechanical energy: kinetic + gravity + surface terms."""
    hf = _faces_h(state)
    kin = 0.5 * face_integral(hf * state.v**2, grid.dx)
    return kin + _potential(state, params, grid)


def energy_W(state: NonlinearState, params: PhysicalParams, grid: Grid) -> float:
    """Energy built on the effective velocity v + mu h'/h."""
    hf = _faces_h(state)
    hx = slope_at_faces(state.h, grid.dx)
    kin = 0.5 * face_integral((hf * state.v + params.mu * hx) ** 2 / hf, grid.dx)
    return kin + _potential(state, params, grid)


def tank_energy(xi, w, gains: NonlinearGains) -> float:
    q, k = gains.q, gains.k
    return 0.5 * q * k**2 * xi**2 + 0.5 * q * (w + k * xi) ** 2


def clf_V(state: NonlinearState, gains: NonlinearGains, params: PhysicalParams, grid: Grid) -> float:
    return (gains.delta * energy_E(state, params, grid) + energy_W(state, params, grid)
            + tank_energy(state.xi, state.w, gains))


def velocity_slope_norm(state: NonlinearState, grid: Grid) -> float:
    """|v_x| with v_x from face differences."""
    return math.sqrt(half_norm2(np.diff(state.v) / grid.dx, grid.dx))


def clf_V_tilde(state: NonlinearState, gains: NonlinearGains, params: PhysicalParams, grid: Grid) -> float:
    if not gains.has_v_tilde_extras():
        raise ConfigError("the functional Vtilde needs the gains beta and gamma")
    V = clf_V(state, gains, params, grid)
    vx2 = velocity_slope_norm(state, grid) ** 2
    return V + (0.5 * vx2 + gains.gamma * V) * math.exp(gains.beta * V)


# ---------------------------------------------------------------------------
# level bounds

def g_eval(h, h_star):
    """The increasing bijection G used for pointwise level bounds."""
    h = np.asarray(h, dtype=float)
    a32 = h_star * math.sqrt(h_star)
    hp = np.maximum(h, 0.0)
    sq = np.sqrt(hp)
    pos = np.sign(h - h_star) * (2.0 / 3.0 * hp * sq - 2.0 * h_star * sq + 4.0 / 3.0 * a32)
    out = np.where(h > 0, pos, -4.0 / 3.0 * a32 + h)
    return out[()] if out.ndim == 0 else out


def g_inverse(s: float, h_star: float) -> float:
    """x with G(x) = s."""
    s = float(s)
    floor = -4.0 / 3.0 * h_star * math.sqrt(h_star)
    if s <= floor:
        return s - floor
    if s == 0.0:
        return float(h_star)
    fun = lambda x: float(g_eval(x, h_star)) - s
    if s < 0:
        lo, hi = 0.0, h_star
    else:
        lo, hi = h_star, 2.0 * h_star
        while fun(hi) < 0:
            lo, hi = hi, 2.0 * hi
    x = bisect(fun, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    return float(x)


def bound_constant_Q(gains: NonlinearGains, params: PhysicalParams) -> float:
    return 1.0 / (params.mu * math.sqrt(gains.delta * params.g))


def p_bounds(s: float, gains: NonlinearGains, params: PhysicalParams):
    """(p1(s), p2(s)): pointwise level bounds implied by V <= s."""
    if s < 0:
        raise DomainError("p_bounds needs s >= 0")
    hs, mu, d = params.h_star, params.mu, gains.delta
    Q = bound_constant_Q(gains, params)
    t2 = math.sqrt(2.0 * params.m * (1.0 + d) * s / (d * mu**2))
    lower = [g_inverse(-Q * s, hs), hs - t2]
    upper = [g_inverse(Q * s, hs), hs + t2]
    if params.sigma > 0:
        L = params.L
        t3 = math.sqrt((s / (params.sigma * (d + 1.0)) + L) ** 2 - L**2)
        lower.append(hs - t3)
        upper.append(hs + t3)
    return max(lower), min(upper)


@dataclass(frozen=True)
class SafeRegion:
    Q: float
    R: float
    zeta1: float
    zeta2: float
    gains: NonlinearGains
    params: PhysicalParams

    def p1(self, s):
        return p_bounds(s, self.gains, self.params)[0]

    def p2(self, s):
        return p_bounds(s, self.gains, self.params)[1]


def safe_radius_R(gains: NonlinearGains, params: PhysicalParams) -> SafeRegion:
    """Radius R such that V < R keeps the level inside (0, H_max)."""
    hs, Hm, mu, d, g, L, m, sig = (params.h_star, params.H_max, params.mu, gains.delta,
                                   params.g, params.L, params.m, params.sigma)
    if not hs < Hm:
        raise DomainError("need h* < H_max")
    gap = Hm - hs
    sdg = math.sqrt(d * g)
    z1 = [math.sqrt(Hm / hs) - 2.0 * math.sqrt(hs) / (math.sqrt(Hm) + math.sqrt(hs)),
          3.0 * mu * math.sqrt(d) * gap / (4.0 * m * (1.0 + d) * math.sqrt(g * hs))]
    z2 = [2.0, 3.0 * mu * math.sqrt(d) / (4.0 * L * math.sqrt(g * hs) * (1.0 + d))]
    if sig > 0:
        z1.append(3.0 * sig * (d + 1.0) * (math.sqrt(L**2 + gap**2) - L)
                  / (2.0 * mu * math.sqrt(d * g * hs) * gap))
        z2.append(3.0 * sig * (d + 1.0) * math.sqrt(hs) / (2.0 * mu * sdg * (math.sqrt(hs**2 + L**2) + L)))
    zeta1 = max(z1)
    zeta2 = hs / gap * max(z2)
    R = 2.0 * mu * math.sqrt(d * g * hs) / 3.0 * gap * min(zeta1, zeta2)
    return SafeRegion(bound_constant_Q(gains, params), R, zeta1, zeta2, gains, params)


def level_set_member(state, gains, params, grid, r: float, which: str = "V") -> bool:
    if r < 0:
        raise DomainError("level r must be non-negative")
    if which == "V":
        return clf_V(state, gains, params, grid) <= r
    if which == "Vtilde":
        return clf_V_tilde(state, gains, params, grid) <= r + gains.gamma * r * math.exp(gains.beta * r)
    raise DomainError(f"unknown level set '{which}'")


def clf_upper_bound(state, gains: NonlinearGains, params: PhysicalParams, grid: Grid, eps: float) -> float:
    """Upper bound for V in terms of the state norm, valid near equilibrium."""
    hs, L = params.h_star, params.L
    eps_max = min(hs, params.H_max - hs) / math.sqrt(L)
    if not 0 < eps < eps_max:
        raise PreconditionError(f"eps must lie in (0, {eps_max}), got {eps}")
    fluid = state_norm_X(state.copy_with(xi=0.0), params, grid)
    if fluid > eps * (1 + 1e-12):
        raise PreconditionError(f"fluid/tank-velocity norm {fluid} exceeds eps={eps}")
    X = state_norm_X(state, params, grid)
    d, q, k = gains.delta, gains.q, gains.k
    coef = max(params.mu**2 / (hs - eps * math.sqrt(L)), 0.5 * (d + 1.0) * params.g,
               0.5 * (d + 2.0) * params.H_max, q, 1.5 * q * k**2)
    return params.sigma * (d + 1.0) * math.sqrt(L) * X + coef * X**2


# ---------------------------------------------------------------------------
# linear model functional

def theta_primitive(phi_t, grid: Grid) -> np.ndarray:
    """Primitive of phi_t at the half nodes (cell centers).

    Cumulative trapezoid-weighted sums; the wall values theta(0) = 0 and
    theta(L) = (integral of phi_t) are implicit.
    """
    return np.cumsum(grid.trapezoid_weights() * phi_t)[:-1]


def linear_clf_terms(state: LinearState, gains, params: PhysicalParams, grid: Grid) -> dict:
    """The grouped terms of the linear Lyapunov functional."""
    dx = grid.dx
    hs, mu, sig, kb = params.h_star, params.mu, params.sigma, params.kappa_bar
    c2 = params.c**2
    theta = theta_primitive(state.phi_t, grid)
    px = node_gradient(state.phi, dx)
    n_phi = node_norm2(state.phi, dx)
    n_px = half_norm2(px, dx)
    n_pxx = node_norm2(node_laplacian(state.phi, dx), dx)
    n_pt = node_norm2(state.phi_t, dx)
    n_th = half_norm2(theta, dx)
    K, k3, k4, k5 = gains.K, gains.k3, gains.k4, gains.k5
    return {
        "tank": 0.5 * state.xi**2 + 0.5 * k5**2 * (state.w + state.xi / k5) ** 2,
        "energy": mu / (K * hs**2 * params.L) * (0.5 * n_pt + 0.5 * c2 * n_px + 0.5 * sig * hs * n_pxx),
        "moment": k4 * (0.5 * n_th + 0.5 * c2 * n_phi + 0.5 * sig * hs * n_px),
        "mixed": k3 * (0.5 * half_norm2(theta - mu * px, dx) + 0.5 * (c2 + kb * mu) * n_phi
                       + 0.5 * sig * hs * n_px),
    }


def linear_clf_W_tilde(state: LinearState, gains, params: PhysicalParams, grid: Grid) -> float:
    return float(sum(linear_clf_terms(state, gains, params, grid).values()))
