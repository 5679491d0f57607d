"""Discrete versus exact eigenvalues of the linear liquid model.

With mu^2 = 4 sigma h* the exact roots are -n^2 +- i n.  Halving the grid
spacing cuts the error by about four.
"""
import math

from viscotank.linear import assemble_operator, spectrum_discrete
from viscotank.model import Grid, PhysicalParams

params = PhysicalParams(g=1.0, mu=2.0, sigma=1.0, L=math.pi, m=math.pi, H_max=2.0)
prev = None
for n_nodes in (100, 200, 400, 800):
    sp = spectrum_discrete(assemble_operator(params, Grid.from_nodes(params.L, n_nodes)), 5)
    err = sp.rel_error[:, 0]
    line = " ".join(f"{e:9.2e}" for e in err)
    if prev is not None:
        line += "   ratios " + " ".join(f"{a / b:4.2f}" for a, b in zip(prev, err))
    print(f"N={n_nodes:4d}: {line}")
    prev = err
