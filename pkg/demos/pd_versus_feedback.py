"""Why measure the liquid: PD on the tank alone versus the full state feedback.

Both laws act on the linearised model with surface tension.  The PD law only
sees the tank position and velocity, so the sloshing it excites is left to the
viscosity.  The state feedback also uses the wall levels and the liquid
momentum and damps the slosh actively.
"""
import numpy as np

from viscotank.clf import NonlinearGains
from viscotank.controllers import LinearGains, check_linear_gain_inequality, param_map
from viscotank.linear import LinearRunConfig, mode_state, run_linear
from viscotank.model import Grid, PhysicalParams

params = PhysicalParams(g=1.0, mu=0.05, sigma=0.05, L=1.0, m=1.0, H_max=2.0)
grid = Grid(params.L, 48)
start = mode_state(params, grid, xi0=0.1)

fb = param_map(NonlinearGains(zeta=1.0, k=0.2, q=8.0, delta=1.0), params)
print("state feedback gains:", {k: round(getattr(fb, k), 4) for k in ("K", "k3", "k4", "k5")},
      "certified" if check_linear_gain_inequality(fb, params).passed else "not certified")
pd = LinearGains(k1=fb.K * fb.k5, k2=fb.K)

runs = {
    "PD": run_linear(LinearRunConfig(params, grid, start, 60.0, law="pd", gains=pd, cfl_safety=0.9)),
    "feedback": run_linear(LinearRunConfig(params, grid, start, 60.0, law="state_feedback", gains=fb, cfl_safety=0.9)),
}
for name, res in runs.items():
    xi, P, t = res.series("xi"), res.series("P"), res.t
    late = t >= 40.0
    print(f"{name:>9}: overshoot {max(0.0, -xi.min()):.3e}, "
          f"slosh norm late {P[late].max():.3e}, |xi| late {np.abs(xi[late]).max():.3e}")
