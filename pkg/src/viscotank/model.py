"""Physical parameters, grids, states, norms and the moving-frame map.

Two discrete layouts share one `Grid`:

* the nonlinear model is staggered: the level ``h`` lives at the cell
  centers and the relative velocity ``v`` at the faces (walls included);
* the linear model is node based: ``phi`` and ``phi_t`` live at the faces
  (used as nodes) and half-node quantities such as ``phi_x`` or the
  primitive ``theta`` live at the cell centers.

Quadrature follows the layout: the composite midpoint rule for cell-center
functions (the only rule for which the flux form conserves mass exactly)
and the composite trapezoid rule for face/node functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import ConfigError, DomainError
from .friction import FrictionModel, Zero


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, L] into ``n_cells`` cells."""

    L: float
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ConfigError(f"n_cells must be a positive integer, got {self.n_cells}")
        if not self.L > 0:
            raise ConfigError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def dx(self) -> float:
        return self.L / self.n_cells

    @property
    def faces(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_cells + 1)

    @property
    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    # the linear model uses faces as nodes
    nodes = faces

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @classmethod
    def from_nodes(cls, L, n_nodes):
        return cls(L, int(n_nodes) - 1)

    def trapezoid_weights(self) -> np.ndarray:
        wts = np.full(self.n_cells + 1, self.dx)
        wts[0] = wts[-1] = 0.5 * self.dx
        return wts


@dataclass(frozen=True)
class PhysicalParams:
    """Constants of the tank-liquid system (SI units, per unit density and width)."""

    g: float
    mu: float
    sigma: float
    L: float
    m: float
    H_max: float
    m_bar: float = 1.0
    kappa_bar: float = 0.0
    friction: FrictionModel = field(default_factory=Zero)
    h_star: float | None = None

    def __post_init__(self):
        for name in ("g", "mu", "L", "m", "m_bar"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("sigma", "kappa_bar"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        h_star = self.m / self.L
        if self.h_star is not None and not math.isclose(self.h_star, h_star, rel_tol=1e-12, abs_tol=0.0):
            raise ConfigError(f"h_star={self.h_star} is inconsistent with m/L={h_star}")
        object.__setattr__(self, "h_star", h_star)
        if not 0 < h_star < self.H_max:
            raise DomainError(f"need 0 < h* < H_max, got h*={h_star}, H_max={self.H_max}")

    @property
    def c(self) -> float:
        """Wave speed sqrt(g h*)."""
        return math.sqrt(self.g * self.h_star)

    def with_(self, **changes) -> "PhysicalParams":
        changes.setdefault("h_star", None)
        return replace(self, **changes)


@dataclass(frozen=True)
class NonlinearState:
    """Moving-frame state: tank position error, tank velocity, level (centers), velocity (faces)."""

    t: float
    xi: float
    w: float
    h: np.ndarray
    v: np.ndarray

    def copy_with(self, **changes) -> "NonlinearState":
        return replace(self, **changes)


@dataclass(frozen=True)
class LinearState:
    """State of the linearized model; ``phi`` and ``phi_t`` are node (face) values."""

    t: float
    xi: float
    w: float
    phi: np.ndarray
    phi_t: np.ndarray

    def copy_with(self, **changes) -> "LinearState":
        return replace(self, **changes)

    def __add__(self, other: "LinearState") -> "LinearState":
        return LinearState(self.t, self.xi + other.xi, self.w + other.w,
                           self.phi + other.phi, self.phi_t + other.phi_t)

    def scaled(self, a: float) -> "LinearState":
        return LinearState(self.t, a * self.xi, a * self.w, a * self.phi, a * self.phi_t)


_NAN = float("nan")


@dataclass
class TimeSeriesRecord:
    """One diagnostics row.  Fields that do not apply to a run stay NaN."""

    t: float
    xi: float
    w: float
    f: float
    V: float = _NAN
    E: float = _NAN
    W: float = _NAN
    Vtilde: float = _NAN
    Wtilde: float = _NAN
    P: float = _NAN
    h_min: float = _NAN
    h_max: float = _NAN
    mass: float = _NAN
    norm_X: float = _NAN
    vx_norm: float = _NAN
    phi_mean: float = _NAN
    phit_mean: float = _NAN


# ---------------------------------------------------------------------------
# discrete calculus on the staggered (nonlinear) layout

def center_integral(u, dx):
    """Midpoint-rule integral of a cell-center function."""
    return float(np.sum(u) * dx)


def face_integral(u, dx):
    """Trapezoid-rule integral of a face (node) function."""
    u = np.asarray(u)
    return float((np.sum(u) - 0.5 * (u[0] + u[-1])) * dx)


def wall_values(h):
    """Quadratic extrapolation of cell-center values to x = 0 and x = L."""
    h0 = (15.0 * h[0] - 10.0 * h[1] + 3.0 * h[2]) / 8.0
    hL = (15.0 * h[-1] - 10.0 * h[-2] + 3.0 * h[-3]) / 8.0
    return h0, hL


def centers_to_faces(h):
    """Face values: arithmetic averages inside, extrapolated values at the walls."""
    out = np.empty(h.size + 1)
    out[1:-1] = 0.5 * (h[1:] + h[:-1])
    out[0], out[-1] = wall_values(h)
    return out


def slope_at_faces(h, dx):
    """h' at the faces: centered differences inside, one-sided (2nd order) at the walls."""
    out = np.empty(h.size + 1)
    out[1:-1] = np.diff(h) / dx
    # differences first, so constants give exactly zero
    out[0] = (2.0 * (h[1] - h[0]) - (h[2] - h[1])) / dx
    out[-1] = (2.0 * (h[-1] - h[-2]) - (h[-2] - h[-3])) / dx
    return out


def velocity_gradient(v, dx):
    """v_x at the cell centers from face values."""
    return np.diff(v) / dx


# ---------------------------------------------------------------------------
# discrete calculus on the node (linear) layout

def node_gradient(phi, dx):
    """Forward differences: phi_x at the half nodes (cell centers)."""
    return np.diff(phi) / dx


def node_laplacian(phi, dx):
    """Second difference with zero-slope (even reflection) closure at both walls."""
    out = np.empty_like(phi)
    out[1:-1] = (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / dx**2
    out[0] = 2.0 * (phi[1] - phi[0]) / dx**2
    out[-1] = 2.0 * (phi[-2] - phi[-1]) / dx**2
    return out


def node_integral(phi, dx):
    return face_integral(phi, dx)


def node_norm2(phi, dx):
    """Squared trapezoid L2 norm of a node function."""
    return face_integral(np.asarray(phi) ** 2, dx)


def half_norm2(u, dx):
    """Squared midpoint L2 norm of a half-node function."""
    return center_integral(np.asarray(u) ** 2, dx)


# ---------------------------------------------------------------------------
# operations

def equilibrium_state(params: PhysicalParams, grid: Grid) -> NonlinearState:
    """Liquid at rest at the level h* in a tank at rest at the target position."""
    return NonlinearState(0.0, 0.0, 0.0, np.full(grid.n_cells, params.h_star), np.zeros(grid.n_cells + 1))


def mass(state: NonlinearState, grid: Grid) -> float:
    return center_integral(state.h, grid.dx)


def state_norm_X(state: NonlinearState, params: PhysicalParams, grid: Grid) -> float:
    """sqrt(xi^2 + w^2 + |h - h*|^2 + |h'|^2 + |v|^2)."""
    dx = grid.dx
    dh = state.h - params.h_star
    s = (state.xi**2 + state.w**2 + center_integral(dh**2, dx)
         + face_integral(slope_at_faces(state.h, dx) ** 2, dx)
         + face_integral(state.v**2, dx))
    return math.sqrt(s)


def p_norm(state: LinearState, grid: Grid) -> float:
    """sqrt(|phi|^2 + |phi_x|^2 + |phi_xx|^2 + |phi_t|^2)."""
    dx = grid.dx
    s = (node_norm2(state.phi, dx) + half_norm2(node_gradient(state.phi, dx), dx)
         + node_norm2(node_laplacian(state.phi, dx), dx) + node_norm2(state.phi_t, dx))
    return math.sqrt(s)


def to_lab_frame(state: NonlinearState, a_star: float):
    """Tank position a, level H(a + x) and absolute velocity vbar(a + x)."""
    return state.xi + a_star, state.h.copy(), state.v + state.w


def from_lab_frame(t, a, da_dt, H, v_bar, a_star) -> NonlinearState:
    """Inverse of `to_lab_frame` (grid values are taken relative to the tank)."""
    return NonlinearState(t, a - a_star, da_dt, np.array(H, dtype=float), np.asarray(v_bar, dtype=float) - da_dt)
