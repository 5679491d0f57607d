"""Linearized tank-liquid model: operator, spectrum, runs, identities, ISS and resolvent.

The fluid unknowns live at the grid nodes.  ``D2`` is the second difference
with a mirror closure (zero slope at the walls); it is self-adjoint in the
trapezoid inner product and equals -G^T G with G the forward difference, so
summation by parts holds exactly.  The fourth derivative is ``D2 @ D2`` and
the wall condition on the third derivative enters as a boundary load.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence
import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from .clf import linear_clf_W_tilde, theta_primitive
from .controllers import LinearGains, linear_feedback_row
from .errors import ConfigError, DomainError, NumericError, PreconditionError
from .model import (
    Grid, LinearState, PhysicalParams, TimeSeriesRecord,
    half_norm2, node_gradient, node_integral, node_norm2, p_norm,
)
from .nonlinear import RunResult, Violation, fit_decay_rate

LINEAR_CSV_HEADER = ("t", "xi", "w", "f", "P", "Wtilde", "phi_mean", "phit_mean")
LINEAR_LAWS = ("state_feedback", "pd", "prescribed", "zero")


# ---------------------------------------------------------------------------
# spectrum of the continuum model

def analytic_eigenvalues(params: PhysicalParams, n: int):
    """Both roots of the characteristic quadratic of cosine mode n (s_plus, s_minus)."""
    if int(n) != n or n < 1:
        raise DomainError("mode number must be a positive integer")
    k2 = (n * math.pi / params.L) ** 2
    b = params.mu * k2 + params.kappa_bar
    c0 = k2 * (params.c**2 + params.sigma * params.h_star * k2)
    disc = b * b - 4.0 * c0
    if disc < 0:
        im = 0.5 * math.sqrt(-disc)
        return complex(-0.5 * b, im), complex(-0.5 * b, -im)
    qq = -0.5 * (b + math.sqrt(disc))
    return complex(c0 / qq), complex(qq)


def closed_form_eigenvalues(params: PhysicalParams, n: int):
    """Frictionless closed forms, complex branch or real branch depending on the sign."""
    if params.kappa_bar != 0:
        raise DomainError("closed forms hold for kappa_bar = 0 only")
    L, mu, sh, c2 = params.L, params.mu, params.sigma * params.h_star, params.c**2
    k = n * math.pi / L
    re = -mu * k**2 / 2.0
    arg = (4.0 * sh - mu**2) * k**2 / 4.0 + c2
    if arg >= 0:
        return complex(re, k * math.sqrt(arg)), complex(re, -k * math.sqrt(arg))
    return complex(re + k * math.sqrt(-arg)), complex(re - k * math.sqrt(-arg))


def real_branch_threshold(params: PhysicalParams) -> float:
    """Mode number beyond which both frictionless roots are real (inf if never)."""
    d = params.mu**2 - 4.0 * params.sigma * params.h_star
    if d <= 0:
        return math.inf
    return 2.0 * params.c * params.L / (math.pi * math.sqrt(d))


# ---------------------------------------------------------------------------
# operator assembly

def second_difference(n_nodes: int, dx: float) -> np.ndarray:
    D = np.zeros((n_nodes, n_nodes))
    i = np.arange(1, n_nodes - 1)
    D[i, i - 1] = D[i, i + 1] = 1.0
    D[i, i] = -2.0
    D[0, 0], D[0, 1] = -2.0, 2.0
    D[-1, -1], D[-1, -2] = -2.0, 2.0
    return D / dx**2


@dataclass(frozen=True)
class LinearOperatorAssembly:
    params: PhysicalParams
    grid: Grid
    D2: np.ndarray
    D4: np.ndarray
    A: np.ndarray          # (phi, phi_t) -> (phi_t, phi_tt) for f = 0
    b: np.ndarray          # load of the wall condition per unit f

    @property
    def n(self) -> int:
        return self.grid.n_nodes

    def apply(self, phi, phi_t, f=0.0):
        y = np.concatenate([phi, phi_t])
        out = self.A @ y + self.b * f
        return out[:self.n], out[self.n:]

    def system(self):
        """(A, B) of y' = A y + B f for y = (xi, w, phi, phi_t)."""
        n = self.n
        A = np.zeros((2 + 2 * n, 2 + 2 * n))
        A[0, 1] = 1.0
        A[2:, 2:] = self.A
        B = np.zeros(2 + 2 * n)
        B[1] = -1.0
        B[2:] = self.b
        return A, B

    def wall_residual(self, phi, f):
        """Mismatch of phi_x and phi_xxx + f/sigma at both walls (second-order one-sided stencils)."""
        dx = self.grid.dx
        w1 = np.array([-3.0, 4.0, -1.0]) / (2.0 * dx)
        w3 = np.array([-5.0, 18.0, -24.0, 14.0, -3.0]) / (2.0 * dx**3)
        px0, pxL = w1 @ phi[:3], -(w1 @ phi[::-1][:3])
        p30, p3L = w3 @ phi[:5], -(w3 @ phi[::-1][:5])
        target = -f / self.params.sigma if self.params.sigma > 0 else 0.0
        return {"phi_x_0": px0, "phi_x_L": pxL, "phi_xxx_0": p30 - target, "phi_xxx_L": p3L - target}


def assemble_operator(params: PhysicalParams, grid: Grid) -> LinearOperatorAssembly:
    n = grid.n_nodes
    if n < 16:
        raise ConfigError(f"need at least 16 nodes, got {n}")
    dx = grid.dx
    D2 = second_difference(n, dx)
    sh = params.sigma * params.h_star
    D4 = D2 @ D2
    I = np.eye(n)
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = I
    A[n:, :n] = params.c**2 * D2 - (sh * D4 if params.sigma > 0 else 0.0)
    A[n:, n:] = params.mu * D2 - params.kappa_bar * I
    b = np.zeros(2 * n)
    if params.sigma > 0:
        # ghost slope of phi_xx from phi_xxx = -f/sigma, weighted by -sigma h*
        b[n] = -2.0 * params.h_star / dx
        b[-1] = 2.0 * params.h_star / dx
    return LinearOperatorAssembly(params, grid, D2, D4, A, b)


@dataclass(frozen=True)
class SpectrumResult:
    modes: np.ndarray
    analytic: np.ndarray       # (n_modes, 2)
    discrete: np.ndarray       # matched, (n_modes, 2)
    rel_error: np.ndarray      # (n_modes, 2)
    all_discrete: np.ndarray

    def to_dict(self) -> dict:
        rows = []
        for i, n in enumerate(self.modes):
            for j in range(2):
                a, d = self.analytic[i, j], self.discrete[i, j]
                rows.append({"n": int(n), "analytic_re": a.real, "analytic_im": a.imag,
                             "discrete_re": d.real, "discrete_im": d.imag, "rel_error": self.rel_error[i, j]})
        return {"modes": rows}


def zero_mean_basis(grid: Grid) -> np.ndarray:
    """Orthonormal basis of node functions with zero trapezoid integral."""
    return linalg.null_space(grid.trapezoid_weights()[None, :])


def _block_eigs_dense(assembly):
    Z = zero_mean_basis(assembly.grid)
    ZZ = linalg.block_diag(Z, Z)
    return linalg.eigvals(ZZ.T @ assembly.A @ ZZ)


def _block_eigs_structured(assembly):
    # the fluid block is a polynomial in D2, so each eigenvalue -lam of the
    # (symmetrised, constant-free) D2 yields the two roots of a scalar quadratic
    p = assembly.params
    sw = np.sqrt(assembly.grid.trapezoid_weights())
    S = sw[:, None] * assembly.D2 / sw[None, :]
    S = 0.5 * (S + S.T)
    Z = linalg.null_space(sw[None, :])
    lam = -linalg.eigvalsh(Z.T @ S @ Z)
    b = p.mu * lam + p.kappa_bar
    c0 = p.c**2 * lam + (p.sigma * p.h_star * lam**2 if p.sigma > 0 else 0.0)
    disc = (b * b - 4.0 * c0).astype(complex)
    root = np.sqrt(disc)
    big = -0.5 * (b + root)
    small = np.where(np.abs(big) > 0, c0 / np.where(big == 0, 1.0, big), 0.0)
    return np.concatenate([big, small])


def spectrum_discrete(assembly: LinearOperatorAssembly, n_modes: int, method: str = "structured") -> SpectrumResult:
    """Discrete fluid eigenvalues with the constant mode removed, paired with the analytic roots.

    ``method="dense"`` runs a general eigen-solver on the projected block
    operator.  ``"structured"`` (default) uses that the block is a polynomial
    in D2: one symmetric eigen-solve of the projected D2 plus a quadratic per
    eigenvalue.  Both give the same spectrum; the structured route avoids the
    rounding of the badly scaled block matrix on fine grids.
    """
    try:
        if method == "dense":
            ev = _block_eigs_dense(assembly)
        elif method == "structured":
            ev = _block_eigs_structured(assembly)
        else:
            raise ConfigError(f"unknown spectrum method '{method}'")
    except linalg.LinAlgError as exc:
        raise NumericError(f"eigen-solver failed: {exc}") from exc
    order = np.lexsort((ev.real, np.abs(ev.imag)))
    ev = ev[order]
    modes = np.arange(1, n_modes + 1)
    ana = np.array([analytic_eigenvalues(assembly.params, int(k)) for k in modes])
    used = np.zeros(ev.size, dtype=bool)
    disc = np.empty_like(ana)
    for idx in np.ndindex(ana.shape):
        dist = np.abs(ev - ana[idx])
        dist[used] = np.inf
        j = int(np.argmin(dist))
        used[j] = True
        disc[idx] = ev[j]
    rel = np.abs(disc - ana) / np.abs(ana)
    return SpectrumResult(modes, ana, disc, rel, ev)


# ---------------------------------------------------------------------------
# lifting

def _g_hat(L) -> Polynomial:
    return Polynomial([0.25 * L**3, 0.0, -1.5 * L, 1.0])


def lifting_polynomial(params: PhysicalParams) -> Polynomial:
    if not params.sigma > 0:
        raise DomainError("the lifting needs sigma > 0")
    return -_g_hat(params.L) / (6.0 * params.sigma)


def lifting_function(params: PhysicalParams, grid: Grid) -> np.ndarray:
    """Node values of the lifting that absorbs the inhomogeneous wall condition."""
    return lifting_polynomial(params)(grid.nodes)


def lifting_conditions(params: PhysicalParams) -> dict:
    """The four defining conditions, evaluated on the exact polynomial (all should vanish)."""
    r = lifting_polynomial(params)
    L, s = params.L, params.sigma
    anti = r.integ()
    d1, d3 = r.deriv(1), r.deriv(3)
    return {"mean": anti(L) - anti(0.0), "slope_0": d1(0.0), "slope_L": d1(L),
            "third_0": d3(0.0) + 1.0 / s, "third_L": d3(L) + 1.0 / s}


# ---------------------------------------------------------------------------
# runs

@dataclass
class LinearRunConfig:
    params: PhysicalParams
    grid: Grid
    initial: LinearState
    t_end: float
    law: str = "state_feedback"
    gains: LinearGains | None = None
    force: Callable[[float], float] | None = None
    cfl_safety: float = 0.4
    dt: float | None = None
    cadence: int = 10
    mean_rtol: float = 1e-10
    keep_states: bool = False

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.law not in LINEAR_LAWS:
            raise ConfigError(f"law must be one of {LINEAR_LAWS}, got '{self.law}'")
        if self.law == "state_feedback":
            if self.gains is None:
                raise ConfigError("state feedback needs gains")
            self.gains.require("K", "k3", "k4", "k5")
        if self.law == "pd":
            if self.gains is None:
                raise ConfigError("the PD law needs gains k1, k2")
            self.gains.require("k1", "k2")
        if self.law == "prescribed" and self.force is None:
            raise ConfigError("prescribed law needs a force signal")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        n = self.grid.n_nodes
        if self.initial.phi.shape != (n,) or self.initial.phi_t.shape != (n,):
            raise ConfigError("initial state does not match the grid")
        dx = self.grid.dx
        scale = self.params.L * max(math.sqrt(node_norm2(self.initial.phi, dx)),
                                    math.sqrt(node_norm2(self.initial.phi_t, dx)), 1e-300)
        if (abs(node_integral(self.initial.phi, dx)) > 1e-9 * scale
                or abs(node_integral(self.initial.phi_t, dx)) > 1e-9 * scale):
            raise DomainError("initial phi and phi_t must have zero mean")


def feedback_row(config: LinearRunConfig) -> np.ndarray | None:
    n = config.grid.n_nodes
    if config.law == "state_feedback":
        return linear_feedback_row(config.gains, config.params, config.grid)
    if config.law == "pd":
        row = np.zeros(2 + 2 * n)
        row[0], row[1] = config.gains.k1, config.gains.k2
        return row
    return None


def rk4_stable_dt(eigs, dt_hi: float = 1e3) -> float:
    """Largest dt (by bisection) with dt * s inside the RK4 stability region for all s."""
    eigs = np.asarray(eigs)
    scale = max(1.0, float(np.max(np.abs(eigs)))) if eigs.size else 1.0
    # the constant fluid modes form a neutral (possibly defective) pair; the
    # zero-mean constraint keeps them unexcited, so tiny rounding splits are ignored
    eigs = eigs[np.abs(eigs) > 1e-8 * scale]
    if eigs.size == 0:
        return dt_hi
    if np.any(eigs.real > 1e-9 * scale):
        raise NumericError("operator has eigenvalues in the right half-plane")

    def ok(dt):
        z = dt * eigs
        R = 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24
        return bool(np.all(np.abs(R) <= 1.0 + 1e-12))

    lo, hi = 0.0, min(dt_hi, 2.83 / float(np.max(np.abs(eigs))) * 1.5)
    if ok(hi):
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * hi:
            break
    return lo


def state_vector(s: LinearState) -> np.ndarray:
    return np.concatenate([[s.xi, s.w], s.phi, s.phi_t])


def state_from_vector(t, y, n) -> LinearState:
    return LinearState(t, float(y[0]), float(y[1]), y[2:2 + n].copy(), y[2 + n:].copy())


def run_linear(config: LinearRunConfig) -> RunResult:
    p, g = config.params, config.grid
    n = g.n_nodes
    asm = assemble_operator(p, g)
    A, B = asm.system()
    row = feedback_row(config)
    M = A + np.outer(B, row) if row is not None else A
    if config.dt is not None:
        dt = config.dt
    else:
        dt = config.cfl_safety * rk4_stable_dt(linalg.eigvals(M))
    n_steps = max(1, int(math.ceil(config.t_end / dt - 1e-12)))
    dt = config.t_end / n_steps

    if row is not None:
        control = lambda t, y: float(row @ y)
    elif config.law == "prescribed":
        control = lambda t, y: float(config.force(t))
    else:
        control = lambda t, y: 0.0

    res = RunResult(records=[], final_state=config.initial, dt=dt)
    states = [] if config.keep_states else None
    dx = g.dx
    y = state_vector(config.initial)
    t = 0.0
    scale0 = max(math.sqrt(node_norm2(config.initial.phi, dx)), math.sqrt(node_norm2(config.initial.phi_t, dx)))
    flagged = set()

    def record(t, y):
        s = state_from_vector(t, y, n)
        f = control(t, y)
        rec = TimeSeriesRecord(t, s.xi, s.w, f, P=p_norm(s, g),
                               phi_mean=node_integral(s.phi, dx) / p.L,
                               phit_mean=node_integral(s.phi_t, dx) / p.L)
        if config.law == "state_feedback":
            rec.Wtilde = linear_clf_W_tilde(s, config.gains, p, g)
        res.records.append(rec)
        if states is not None:
            states.append(y.copy())
        scale = max(scale0, math.sqrt(node_norm2(s.phi, dx)), 1e-300)
        for kind, val in (("phi_mean_drift", rec.phi_mean), ("phit_mean_drift", rec.phit_mean)):
            if abs(val) * p.L > config.mean_rtol * scale * p.L and kind not in flagged:
                flagged.add(kind)
                res.violations.append(Violation(kind, t, abs(val), config.mean_rtol * scale))

    record(t, y)
    for k in range(1, n_steps + 1):
        k1 = M @ y if row is not None else A @ y + B * control(t, y)
        if row is not None:
            y2 = y + 0.5 * dt * k1
            k2 = M @ y2
            k3 = M @ (y + 0.5 * dt * k2)
            k4 = M @ (y + dt * k3)
        else:
            th = t + 0.5 * dt
            y2 = y + 0.5 * dt * k1
            k2 = A @ y2 + B * control(th, y2)
            y3 = y + 0.5 * dt * k2
            k3 = A @ y3 + B * control(th, y3)
            y4 = y + dt * k3
            k4 = A @ y4 + B * control(t + dt, y4)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = k * dt
        if not np.all(np.isfinite(y)):
            res.blowup = True
            res.message = f"non-finite state at t={t}"
            break
        if k % config.cadence == 0 or k == n_steps:
            record(t, y)
    res.n_steps = k
    res.final_state = state_from_vector(t, y, n)
    if states is not None:
        res.states = np.array(states)
    tt = res.t
    if tt.size >= 4:
        for name, vals in (("P", res.series("P")),
                           ("full", np.sqrt(res.series("xi") ** 2 + res.series("w") ** 2 + res.series("P") ** 2))):
            try:
                res.fits[name] = fit_decay_rate(tt, vals, 0.5)
            except Exception:
                pass
    return res


# ---------------------------------------------------------------------------
# energy identities

def identity_functionals(state: LinearState, f: float, params: PhysicalParams, grid: Grid):
    """Values and time derivatives (by the semi-discrete identities) of the three energies."""
    dx = grid.dx
    hs, mu, sig, kb, c2 = params.h_star, params.mu, params.sigma, params.kappa_bar, params.c**2
    sh = sig * hs
    phi, p = state.phi, state.phi_t
    D2 = second_difference(grid.n_nodes, dx)
    Gphi = node_gradient(phi, dx)
    Gp = node_gradient(p, dx)
    lap = D2 @ phi
    th = theta_primitive(p, grid)
    n_p, n_phi = node_norm2(p, dx), node_norm2(phi, dx)
    n_G, n_lap, n_th = half_norm2(Gphi, dx), node_norm2(lap, dx), half_norm2(th, dx)
    fcoef = f if sig > 0 else 0.0
    E1 = 0.5 * n_p + 0.5 * c2 * n_G + 0.5 * sh * n_lap
    R1 = -mu * half_norm2(Gp, dx) - kb * n_p + hs * (p[-1] - p[0]) * fcoef
    E2 = 0.5 * n_th + 0.5 * c2 * n_phi + 0.5 * sh * n_G
    R2 = -kb * n_th - mu * n_p - hs * float(np.sum(th) * dx) * fcoef
    mixed = th - mu * Gphi
    E3 = 0.5 * half_norm2(mixed, dx) + 0.5 * (c2 + kb * mu) * n_phi + 0.5 * sh * n_G
    R3 = (-mu * c2 * n_G - mu * sh * n_lap - kb * n_th - hs * float(np.sum(mixed) * dx) * fcoef)
    return (E1, E2, E3), (R1, R2, R3)


def energy_identity_check(times, states, forces, params: PhysicalParams, grid: Grid, dt_run: float | None = None):
    """Max |centered dE/dt - RHS| over the slice for the three energy identities."""
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise PreconditionError("need at least three samples")
    spacing = np.diff(times)
    h = float(spacing.mean())
    if np.max(np.abs(spacing - h)) > 1e-9 * h:
        raise PreconditionError("samples must be equally spaced")
    if dt_run is not None and h > dt_run * (1 + 1e-9):
        raise PreconditionError("record every step for the identity check")
    n = grid.n_nodes
    E = np.empty((times.size, 3))
    R = np.empty((times.size, 3))
    for i, (t, y, f) in enumerate(zip(times, states, forces)):
        s = y if isinstance(y, LinearState) else state_from_vector(t, np.asarray(y), n)
        E[i], R[i] = identity_functionals(s, f, params, grid)
    dE = (E[2:] - E[:-2]) / (2.0 * h)
    resid = np.abs(dE - R[1:-1])
    return tuple(float(v) for v in resid.max(axis=0))


# ---------------------------------------------------------------------------
# input-to-state stability

@dataclass
class ISSResult:
    M_bar: float
    lambda_bar: float
    Gamma: float
    passed: bool
    zero_rates: list = field(default_factory=list)
    worst_ratio: float = float("nan")
    message: str = ""

    def to_dict(self):
        return {"M_bar": self.M_bar, "lambda_bar": self.lambda_bar, "Gamma": self.Gamma,
                "passed": self.passed, "zero_rates": list(self.zero_rates),
                "worst_ratio": self.worst_ratio, "message": self.message}


def fading_max(t, f_abs, lam):
    """max over s <= t of exp(-lam (t - s)) |f(s)| on the sample grid."""
    out = np.empty_like(f_abs)
    cur = 0.0
    for i in range(t.size):
        if i:
            cur *= math.exp(-lam * (t[i] - t[i - 1]))
        cur = max(cur, f_abs[i])
        out[i] = cur
    return out


def iss_check(params: PhysicalParams, grid: Grid, ics: Sequence[LinearState], signals: Sequence[Callable],
              t_end: float, cfl_safety: float = 0.9, cadence: int = 5, margin: float = 0.05,
              t_start_fraction: float = 0.5) -> ISSResult:
    """Fit (M_bar, lambda_bar, Gamma) of the ISS estimate for P over an IC x input family.

    ``signals[0]`` must be the zero input.
    """
    if len(ics) < 5 or len(signals) < 3:
        raise PreconditionError("need at least 5 initial conditions and 3 input signals")
    runs = []
    for sig_fun in signals:
        for ic in ics:
            cfg = LinearRunConfig(params, grid, ic, t_end, law="prescribed", force=sig_fun,
                                  cfl_safety=cfl_safety, cadence=cadence)
            r = run_linear(cfg)
            if r.blowup:
                return ISSResult(math.nan, math.nan, math.nan, False, message="blow-up")
            runs.append((sig_fun, r))
    n_ic = len(ics)
    zero_runs = [r for _, r in runs[:n_ic]]
    rates = []
    for r in zero_runs:
        lam = fit_decay_rate(r.t, r.series("P"), t_start_fraction)[1]
        rates.append(lam)
    lam_bar = min(rates)
    if not lam_bar > 0:
        return ISSResult(math.nan, lam_bar, math.nan, False, rates, message="zero-input run does not decay")
    M_fit = 1.0
    for r in zero_runs:
        P = r.series("P")
        M_fit = max(M_fit, float(np.max(P * np.exp(lam_bar * r.t) / P[0])))
    G_fit = 0.0
    for sig_fun, r in runs[n_ic:]:
        P, t = r.series("P"), r.t
        a = np.exp(-lam_bar * t) * P[0]
        b = fading_max(t, np.abs(r.series("f")), lam_bar)
        excess = P - M_fit * a
        pos = b > 0
        if np.any(excess[~pos] > 0):
            return ISSResult(M_fit, lam_bar, math.inf, False, rates, message="excess without input")
        if np.any(pos):
            G_fit = max(G_fit, float(np.max(excess[pos] / b[pos])))
    M_bar, Gamma = (1.0 + margin) * M_fit, (1.0 + margin) * G_fit
    worst = 0.0
    for _, r in runs:
        P, t = r.series("P"), r.t
        bound = M_bar * np.exp(-lam_bar * t) * P[0] + Gamma * fading_max(t, np.abs(r.series("f")), lam_bar)
        worst = max(worst, float(np.max((1.0 + margin) * P / bound)))
    ok = bool(np.isfinite(M_bar) and np.isfinite(Gamma) and worst <= 1.0 + 1e-12)
    return ISSResult(M_bar, lam_bar, Gamma, ok, rates, worst)


# ---------------------------------------------------------------------------
# resolvent

def _resolvent_denominators(n, q_bar, params):
    k = n * math.pi / params.L
    sh = params.sigma * params.h_star
    return sh * k**4 + (params.c**2 + params.mu * (q_bar + 1.0)) * k**2 + (q_bar + 1.0) * (q_bar + 1.0 + params.kappa_bar)


def cosine_coefficients(f3, L, n_terms, n_quad=None):
    """a_0 (mean) and a_n = (2/L) int f3 cos(n pi x/L) dx, n = 1..n_terms.

    ``f3`` is a callable (sampled on a fine uniform grid) or node values; the
    trapezoid rule is spectrally accurate for functions with smooth even
    periodic extension.
    """
    if callable(f3):
        m = n_quad or max(16 * n_terms, 8192)
        x = np.linspace(0.0, L, m + 1)
        vals = np.asarray(f3(x), dtype=float) * np.ones_like(x)
    else:
        vals = np.asarray(f3, dtype=float)
        x = np.linspace(0.0, L, vals.size)
    dx = x[1] - x[0]
    w = np.full(x.size, dx)
    w[0] = w[-1] = 0.5 * dx
    n = np.arange(1, n_terms + 1)
    C = np.cos(np.outer(n, x) * math.pi / L)
    a = (2.0 / L) * (C @ (w * vals))
    a0 = float(w @ vals) / L
    return a0, a


def resolvent_coefficients(f3, q_bar: float, params: PhysicalParams, n_terms: int):
    if q_bar < 0:
        raise DomainError("q_bar must be non-negative")
    a0, a = cosine_coefficients(f3, params.L, n_terms)
    n = np.arange(1, n_terms + 1)
    b0 = a0 / ((q_bar + 1.0) * (q_bar + 1.0 + params.kappa_bar))
    return b0, a / _resolvent_denominators(n, q_bar, params)


def resolvent_solve(f3, q_bar: float, params: PhysicalParams, n_terms: int, x=None) -> np.ndarray:
    """Truncated cosine series of the solution of the fourth-order resolvent problem at points x."""
    b0, b = resolvent_coefficients(f3, q_bar, params, n_terms)
    if x is None:
        x = np.linspace(0.0, params.L, 257) if callable(f3) else np.linspace(0.0, params.L, np.asarray(f3).size)
    n = np.arange(1, n_terms + 1)
    return b0 + np.cos(np.outer(np.asarray(x), n) * math.pi / params.L) @ b


def resolvent_residual(f3, q_bar: float, params: PhysicalParams, n_terms: int, x=None) -> float:
    """max |sigma h* u'''' - (c^2 + mu(q+1)) u'' + (q+1)(q+1+kappa) u - f3| at x."""
    b0, b = resolvent_coefficients(f3, q_bar, params, n_terms)
    L = params.L
    if x is None:
        x = np.linspace(0.0, L, 513)
    if callable(f3):
        target = np.asarray(f3(x), dtype=float) * np.ones_like(x)
    else:
        target = np.asarray(f3, dtype=float)
        x = np.linspace(0.0, L, target.size)
    k = np.arange(1, n_terms + 1) * math.pi / L
    C = np.cos(np.outer(x, k))
    u = b0 + C @ b
    u2 = -(C @ (k**2 * b))
    u4 = C @ (k**4 * b)
    qq = q_bar + 1.0
    lhs = (params.sigma * params.h_star * u4 - (params.c**2 + params.mu * qq) * u2
           + qq * (qq + params.kappa_bar) * u)
    return float(np.max(np.abs(lhs - target)))


# ---------------------------------------------------------------------------
# initial data

def mode_state(params: PhysicalParams, grid: Grid, phi_modes=(), phit_modes=(), xi0=0.0, w0=0.0) -> LinearState:
    """Sum of cosine modes (n >= 1) for phi and phi_t; zero mean on the grid by construction."""
    x = grid.nodes
    phi = np.zeros(grid.n_nodes)
    pt = np.zeros(grid.n_nodes)
    for n, a in phi_modes:
        phi += a * np.cos(n * math.pi * x / params.L)
    for n, a in phit_modes:
        pt += a * np.cos(n * math.pi * x / params.L)
    return LinearState(0.0, float(xi0), float(w0), phi, pt)
