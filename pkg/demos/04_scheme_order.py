"""Temporal convergence of the Strang splitting on the SO2 fixture.

Fixed-step runs at decreasing dt are compared with a run at dt/64. The
default TR-BDF2 diffusion step gives second order overall. Backward Euler
caps the splitting at first order.
"""

# %%
from importlib import resources

import numpy as np

from entroreact import Grid, SimulationConfig, load_network
from entroreact.solver import Integrator, init_state

with resources.as_file(resources.files("entroreact") / "data" / "so2.crn") as path:
    net = load_network(path)
grid = Grid.interval(1.0, 50)
u0 = init_state(SimulationConfig(net, grid, ("cosine(1, 0.5, 1)", "constant(1)", "cosine(1, -0.5, 1)"), 0.5)).u
T = 0.5
dts = np.array([0.1, 0.05, 0.025, 0.0125])

for scheme in ("tr_bdf2", "backward_euler"):
    integ = Integrator(net, grid, net.diffusion, scheme)
    fine = dts[-1] / 64
    ref = integ.advance(u0, fine, int(round(T / fine)))
    errs = np.array([np.abs(integ.advance(u0, dt, int(round(T / dt))) - ref).max() for dt in dts])
    order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    print(f"\n{scheme}: observed order {order:.3f}")
    for dt, e in zip(dts, errs):
        print(f"  dt = {dt:<7g} error = {e:.3e}")
