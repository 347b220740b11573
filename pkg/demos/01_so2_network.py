"""The SO2 oxidation network, from text file to structural verdicts.

Run with ``python3 demos/01_so2_network.py``.
"""

# %%
from importlib import resources

import numpy as np

from entroreact import (
    Sampler,
    conservation_laws,
    detect_boundary_equilibria,
    entropy_multipliers,
    find_positive_equilibrium,
    load_network,
    mass_action_rhs,
    stoichiometric_matrix,
    validate_conditions,
)

with resources.as_file(resources.files("entroreact") / "data" / "so2.crn") as path:
    net = load_network(path)
print(path.read_text())

# %% [markdown]
# Two reactions, 2 SO2 + O2 -> 2 SO3 and back, both with rate one. The
# right-hand side is S times the vector of mass-action fluxes.

# %%
print("S =\n", stoichiometric_matrix(net))
for u in ([2.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.5, 3.0, 2.0]):
    print(f"f{tuple(u)} = {mass_action_rhs(net, u)}")

# %% [markdown]
# Sulfur and oxygen atoms are conserved. The echelon basis and the declared
# atom-count basis span the same space.

# %%
print("echelon basis:\n", conservation_laws(net))
print("declared:", net.conservation)

# %% [markdown]
# Fixing the totals (sulfur 2, oxygen 7) picks one compatibility class. Its
# complex-balanced equilibrium is (1, 1, 1).

# %%
rep = find_positive_equilibrium(net, (2.0, 7.0))
print("u_inf =", rep.equilibrium, "converged:", rep.converged)
print("mu = -log u_inf =", entropy_multipliers(rep))

for totals in [(2.0, 7.0), (1.0, 2.0)]:
    print(f"\nboundary equilibria, class {totals}:")
    for b in detect_boundary_equilibria(net, totals):
        print(f"  {b.description:20s} in class: {b.in_class}")

# %% [markdown]
# Quasi-positivity and the entropy inequality hold on samples. The cubic
# nonlinearity is within the 1D growth bound but not the 2D one.

# %%
mu = np.zeros(3)
for d in (1, 2):
    report = validate_conditions(net, mu, d, Sampler(samples=5000))
    print(f"\nd = {d}")
    for line in report.lines():
        print(" ", line)
