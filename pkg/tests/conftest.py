import math

import numpy as np
import pytest

from viscotank.clf import NonlinearGains
from viscotank.model import Grid, NonlinearState, PhysicalParams


@pytest.fixture
def base_params():
    return PhysicalParams(g=1.0, mu=0.5, sigma=0.0, L=1.0, m=1.0, H_max=2.0)


@pytest.fixture
def tension_params():
    return PhysicalParams(g=1.0, mu=0.5, sigma=0.3, L=1.0, m=1.0, H_max=2.0)


@pytest.fixture
def nl_gains():
    return NonlinearGains(zeta=1.0, k=1.5, q=20.0, delta=1.0)


@pytest.fixture
def beam_params():
    # mu^2 = 4 sigma h*, so the modal roots are -n^2 +- i n
    return PhysicalParams(g=1.0, mu=2.0, sigma=1.0, L=math.pi, m=math.pi, H_max=2.0)


def random_state(params, grid, amp, rng, n_modes=5):
    """Mass-preserving random perturbation of equilibrium with wall-compatible velocity."""
    x, xf, dx, L = grid.cell_centers, grid.faces, grid.dx, params.L
    h = np.full(grid.n_cells, params.h_star)
    for n in range(1, n_modes + 1):
        k = n * math.pi / L
        h += amp * rng.standard_normal() / n**2 * (np.sin(k * (x + dx / 2)) - np.sin(k * (x - dx / 2))) / (k * dx)
    h += params.h_star - h.mean()
    v = np.zeros(grid.n_cells + 1)
    for n in range(1, n_modes + 1):
        v += amp * rng.standard_normal() / n**2 * np.sin(n * math.pi * xf / L)
    v[0] = v[-1] = 0.0
    return NonlinearState(0.0, amp * rng.standard_normal(), amp * rng.standard_normal(), h, v)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
