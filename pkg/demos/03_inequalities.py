"""Discrete checks of the inequalities behind the L log L bootstrap.

For random band-limited fields the truncated Gagliardo-Nirenberg chain is
evaluated step by step, followed by the pointwise x log x bound and the
space-time interpolation inequality on a short simulation.
"""

# %%
from collections import defaultdict
from importlib import resources

import numpy as np

from entroreact import Grid, SimulationConfig, load_network, run
from entroreact.inequalities import (
    check_gn_chain,
    check_spacetime_interpolation,
    check_xlogx_bound,
    gn_ratio,
    random_band_limited,
    truncation_chi,
)

rng = np.random.default_rng(0)
N = 5.0

for grid, count in ((Grid.interval(1.0, 256), 500), (Grid.rectangle(1.0, 1.0, 64, 64), 100)):
    fields = [random_band_limited(grid, rng) for _ in range(count)]
    C4 = max(gn_ratio(grid, truncation_chi(f, N)) for f in fields)
    tightest = defaultdict(lambda: np.inf)
    for f in fields:
        for r in check_gn_chain(grid, f, N, C4).records:
            tightest[r.name] = min(tightest[r.name], r.slack / (1 + abs(r.rhs)))
    print(f"\n{grid.dim}D, {count} fields, measured C4 = {C4:.4f}")
    for name, s in tightest.items():
        print(f"  {name:10s} tightest scaled slack {s: .3e}")

# %% [markdown]
# x log x - x + 1 >= L x - e^L + 1, with equality exactly at x = e^L.

# %%
L = np.linspace(0.1, 5.0, 6)
for x_scale in (0.5, 1.0, 2.0):
    print(f"x = {x_scale} e^L:", np.round(check_xlogx_bound(x_scale * np.exp(L), L), 6))

# %% [markdown]
# Space-time interpolation on a short SO2 run.

# %%
with resources.as_file(resources.files("entroreact") / "data" / "so2.crn") as path:
    net = load_network(path)
cfg = SimulationConfig(
    net, Grid.interval(1.0, 100), ("gaussian(0.2, 3, 0.3, 0.1)", "constant(1)", "constant(0.5)"), 2.0
)
series, _ = run(cfg)
rep = check_spacetime_interpolation(series.grid, series.times, series.snapshots)
for sp, lhs, rhs in zip(net.species, rep.lhs, rep.rhs):
    print(f"{sp:4s} ||u||^4_L4(Q_T) = {lhs:.5f} <= {rhs:.5f}")
