"""Method-of-lines closed-loop integrator for the viscous shallow-water tank."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable
import csv
import math

import numpy as np

from .clf import NonlinearGains, clf_V, energy_E, energy_W, velocity_slope_norm
from .controllers import nonlinear_feedback
from .errors import BlowUpError, ConfigError, DomainError, FitError
from .model import (
    Grid, NonlinearState, PhysicalParams, TimeSeriesRecord,
    centers_to_faces, mass, state_norm_X,
)

CONTROL_MODES = ("closed_loop", "open_loop_zero", "prescribed")
NONLINEAR_CSV_HEADER = ("t", "xi", "w", "f", "V", "E", "W", "h_min", "h_max", "mass", "norm_X")


@dataclass(frozen=True)
class NonlinearDerivative:
    xi: float
    w: float
    h: np.ndarray
    v: np.ndarray


def rhs_nonlinear(state: NonlinearState, f: float, params: PhysicalParams, grid: Grid) -> NonlinearDerivative:
    """Semi-discrete time derivative on the staggered grid."""
    h, v = state.h, state.v
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(v))):
        raise BlowUpError("non-finite state", state)
    if np.any(h <= 0):
        raise BlowUpError(f"non-positive level {h.min():.3e}", state)
    dx = grid.dx
    g, mu, sig = params.g, params.mu, params.sigma

    hf = centers_to_faces(h)
    flux = hf * v
    flux[0] = flux[-1] = 0.0
    dh = -np.diff(flux) / dx

    h_in = 0.5 * (h[1:] + h[:-1])              # interior faces
    v_in = v[1:-1]
    vx_c = np.diff(v) / dx                     # v_x at centers
    adv = v_in * (v[2:] - v[:-2]) / (2.0 * dx)
    grav = g * np.diff(h) / dx
    visc = mu * np.diff(h * vx_c) / (dx * h_in)
    dv_in = -adv - grav + visc + f
    if not params.friction.is_zero:
        dv_in -= params.friction.kappa(h_in, v_in, mu) * v_in / h_in
    if sig > 0:
        hg = np.concatenate(([h[0]], h, [h[-1]]))   # mirror ghosts: h_x = 0 at the walls
        hx = (hg[2:] - hg[:-2]) / (2.0 * dx)
        hxx = (hg[2:] - 2.0 * h + hg[:-2]) / dx**2
        curv = hxx / (1.0 + hx**2) ** 1.5
        dv_in += sig * np.diff(curv) / dx
    dv = np.zeros_like(v)
    dv[1:-1] = dv_in
    return NonlinearDerivative(state.w, -f, dh, dv)


def stable_dt(state: NonlinearState, params: PhysicalParams, grid: Grid, cfl_safety: float) -> float:
    """Explicit step restricted by advection, viscosity and (if present) capillarity."""
    if not 0 < cfl_safety <= 1:
        raise ConfigError(f"cfl_safety must lie in (0, 1], got {cfl_safety}")
    if np.any(state.h <= 0):
        raise DomainError("stable_dt needs h > 0")
    dx = grid.dx
    hf = centers_to_faces(state.h)
    speed = float(np.max(np.abs(state.v) + np.sqrt(params.g * np.maximum(hf, 0.0))))
    limits = [dx / speed, dx**2 / (2.0 * params.mu)]
    if params.sigma > 0:
        limits.append(dx**4 / (8.0 * params.sigma * float(np.max(state.h))))
    return cfl_safety * min(limits)


# ---------------------------------------------------------------------------
# run configuration and results

@dataclass
class MonitorConfig:
    mass_rtol: float = 1e-10
    lyapunov: bool = True
    slack_factor: float = 10.0


@dataclass
class NonlinearRunConfig:
    params: PhysicalParams
    grid: Grid
    initial: NonlinearState
    t_end: float
    gains: NonlinearGains | None = None
    cfl_safety: float = 0.4
    control: str = "closed_loop"
    force: Callable[[float], float] | None = None
    cadence: int = 10
    dt: float | None = None
    monitors: MonitorConfig = field(default_factory=MonitorConfig)

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.control not in CONTROL_MODES:
            raise ConfigError(f"control must be one of {CONTROL_MODES}, got '{self.control}'")
        if self.control == "closed_loop" and self.gains is None:
            raise ConfigError("closed-loop runs need gains")
        if self.control == "prescribed" and self.force is None:
            raise ConfigError("prescribed control needs a force signal")
        if int(self.cadence) < 1:
            raise ConfigError("cadence must be at least 1")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        ini = self.initial
        if ini.h.shape != (self.grid.n_cells,) or ini.v.shape != (self.grid.n_cells + 1,):
            raise ConfigError("initial state does not match the grid")
        if np.any(ini.h <= 0):
            raise DomainError("initial level must be positive")
        if ini.v[0] != 0 or ini.v[-1] != 0:
            raise DomainError("initial velocity must vanish at the walls")
        m0 = mass(ini, self.grid)
        if not math.isclose(m0, self.params.m, rel_tol=1e-9):
            raise DomainError(f"initial mass {m0} differs from m={self.params.m}")

    def control_value(self, state: NonlinearState) -> float:
        if self.control == "closed_loop":
            return nonlinear_feedback(state, self.gains, self.params, self.grid)
        if self.control == "prescribed":
            return float(self.force(state.t))
        return 0.0


@dataclass(frozen=True)
class Violation:
    kind: str
    t: float
    value: float
    limit: float

    def to_dict(self):
        return {"kind": self.kind, "t": self.t, "value": self.value, "limit": self.limit}


@dataclass
class RunResult:
    records: list
    final_state: object
    violations: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    blowup: bool = False
    aborted: bool = False
    message: str = ""
    n_steps: int = 0
    dt: float = float("nan")
    states: object = None

    def series(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def t(self) -> np.ndarray:
        return self.series("t")

    def summary(self) -> dict:
        return {"n_steps": self.n_steps, "dt": self.dt, "blowup": self.blowup, "aborted": self.aborted,
                "message": self.message,
                "fits": {k: {"M": v[0], "lambda": v[1], "r2": v[2]} for k, v in self.fits.items()},
                "violations": [v.to_dict() for v in self.violations]}


def write_csv(path, records, header):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in records:
            wr.writerow(["%.17g" % getattr(r, name) for name in header])


# ---------------------------------------------------------------------------
# time stepping

def _advance(state: NonlinearState, d: NonlinearDerivative, dt: float) -> NonlinearState:
    return NonlinearState(state.t + dt, state.xi + dt * d.xi, state.w + dt * d.w,
                          state.h + dt * d.h, state.v + dt * d.v)


def step_rk4(state: NonlinearState, config: NonlinearRunConfig, dt: float):
    """One classical RK4 step; the control is re-evaluated at every stage.

    Returns the new state and the control value at the start of the step.
    """
    p, g = config.params, config.grid
    f1 = config.control_value(state)
    k1 = rhs_nonlinear(state, f1, p, g)
    s2 = _advance(state, k1, 0.5 * dt)
    k2 = rhs_nonlinear(s2, config.control_value(s2), p, g)
    s3 = _advance(state, k2, 0.5 * dt)
    k3 = rhs_nonlinear(s3, config.control_value(s3), p, g)
    s4 = _advance(state, k3, dt)
    k4 = rhs_nonlinear(s4, config.control_value(s4), p, g)
    c = dt / 6.0
    new = NonlinearState(
        state.t + dt,
        state.xi + c * (k1.xi + 2.0 * k2.xi + 2.0 * k3.xi + k4.xi),
        state.w + c * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
        state.h + c * (k1.h + 2.0 * k2.h + 2.0 * k3.h + k4.h),
        state.v + c * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
    )
    return new, f1


def make_record(state: NonlinearState, f: float, config: NonlinearRunConfig) -> TimeSeriesRecord:
    p, g = config.params, config.grid
    rec = TimeSeriesRecord(state.t, state.xi, state.w, f,
                           h_min=float(state.h.min()), h_max=float(state.h.max()),
                           mass=mass(state, g), norm_X=state_norm_X(state, p, g),
                           vx_norm=velocity_slope_norm(state, g))
    try:
        rec.E = energy_E(state, p, g)
        rec.W = energy_W(state, p, g)
        if config.gains is not None:
            rec.V = clf_V(state, config.gains, p, g)
    except DomainError:
        pass
    return rec


def run_closed_loop(config: NonlinearRunConfig) -> RunResult:
    """Integrate to t_end with monitors for mass, positivity, no-spill and V."""
    p, g = config.params, config.grid
    state = config.initial
    dt = config.dt if config.dt is not None else stable_dt(state, p, g, config.cfl_safety)
    n_steps = max(1, int(math.ceil(config.t_end / dt - 1e-12)))
    dt = config.t_end / n_steps
    mon = config.monitors
    m0 = mass(state, g)
    result = RunResult(records=[], final_state=state, dt=dt)
    rec0 = make_record(state, config.control_value(state), config)
    result.records.append(rec0)
    V0 = rec0.V
    slack = mon.slack_factor * g.dx**2 * V0 if np.isfinite(V0) else math.inf
    check_V = mon.lyapunov and config.control == "closed_loop" and np.isfinite(V0)
    v_min = V0
    flagged = set()

    def flag(kind, t, value, limit):
        if kind not in flagged:
            flagged.add(kind)
            result.violations.append(Violation(kind, t, value, limit))

    for n in range(1, n_steps + 1):
        try:
            state, _ = step_rk4(state, config, dt)
        except BlowUpError as exc:
            bad = exc.state if exc.state is not None else state
            finite = np.all(np.isfinite(bad.h)) and np.all(np.isfinite(bad.v))
            if finite:
                flag("positivity", bad.t, float(bad.h.min()), 0.0)
                result.aborted = True
            else:
                result.blowup = True
            result.message = str(exc)
            break
        if not (np.all(np.isfinite(state.h)) and np.all(np.isfinite(state.v)) and np.isfinite(state.w)):
            result.blowup = True
            result.message = f"non-finite state at t={state.t}"
            break
        hmin = float(state.h.min())
        if hmin <= 0:
            flag("positivity", state.t, hmin, 0.0)
            result.aborted = True
            result.message = f"level reached {hmin:.3e} at t={state.t}"
            break
        dm = abs(mass(state, g) - m0)
        if dm > mon.mass_rtol * m0:
            flag("mass", state.t, dm / m0, mon.mass_rtol)
        hmax = float(state.h.max())
        if hmax >= p.H_max:
            flag("no_spill", state.t, hmax, p.H_max)
        if n % config.cadence == 0 or n == n_steps:
            rec = make_record(state, config.control_value(state), config)
            result.records.append(rec)
            if check_V:
                if rec.V > v_min + slack:
                    flag("lyapunov_increase", state.t, rec.V - v_min, slack)
                if rec.V > V0 + slack:
                    flag("level_set_exit", state.t, rec.V, V0 + slack)
                v_min = min(v_min, rec.V)
    result.final_state = state
    result.n_steps = n if n_steps else 0
    result.fits = fit_run(result)
    return result


def fit_run(result: RunResult, t_start_fraction: float = 0.5) -> dict:
    fits = {}
    t = result.t
    if t.size < 4:
        return fits
    for name in ("norm_X", "V", "vx_norm"):
        y = result.series(name)
        try:
            fits[name] = fit_decay_rate(t, y, t_start_fraction)
        except FitError:
            continue
    return fits


def fit_decay_rate(t, values, t_start_fraction: float = 0.5):
    """Least-squares fit of log(values) = log(M) - lambda t over the tail window.

    Returns (M, lambda, r2).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.size < 2:
        raise FitError("need matching time and value arrays with at least two samples")
    if not 0 <= t_start_fraction < 1:
        raise FitError("t_start_fraction must lie in [0, 1)")
    t0 = t[0] + t_start_fraction * (t[-1] - t[0])
    sel = t >= t0
    if sel.sum() < 2:
        raise FitError("fewer than two samples in the fit window")
    ts, ys = t[sel], y[sel]
    if not np.all(np.isfinite(ys)) or np.any(ys <= 0):
        raise FitError("values must be positive and finite in the fit window")
    ly = np.log(ys)
    slope, icept = np.polyfit(ts, ly, 1)
    resid = ly - (slope * ts + icept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    # a flat series leaves only rounding in ss_tot; the fit is then exact
    flat = ss_tot <= 1e-24 * ly.size * (1.0 + float(np.max(np.abs(ly)))) ** 2
    r2 = 1.0 if flat else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(np.exp(icept)), float(-slope), r2


# ---------------------------------------------------------------------------
# initial data

def perturbed_state(params: PhysicalParams, grid: Grid, xi0=0.0, w0=0.0, h_modes=(), v_modes=()) -> NonlinearState:
    """Equilibrium plus cosine level modes (mass preserving) and sine velocity modes.

    ``h_modes``/``v_modes`` are sequences of (mode number, amplitude).  Level
    amplitudes are relative to h*; the cell averages of cos(n pi x/L) are used
    so the discrete mass stays exactly m.
    """
    x, dx, L = grid.cell_centers, grid.dx, params.L
    h = np.full(grid.n_cells, params.h_star)
    for n, a in h_modes:
        k = n * math.pi / L
        # exact cell averages of cos(k x): zero mean on the grid
        h += a * params.h_star * (np.sin(k * (x + 0.5 * dx)) - np.sin(k * (x - 0.5 * dx))) / (k * dx)
    h += params.h_star - h.mean()
    xf = grid.faces
    v = np.zeros(grid.n_cells + 1)
    for n, a in v_modes:
        v += a * np.sin(n * math.pi * xf / L)
    v[0] = v[-1] = 0.0
    return NonlinearState(0.0, float(xi0), float(w0), h, v)
