"""Entropy methods for mass-action reaction-diffusion systems.

Parse reaction networks, find their complex-balanced equilibria, integrate the
reaction-diffusion system on an interval or rectangle, and check the entropy
inequalities and interpolation bounds numerically.
"""

__version__ = "0.1.0"

from .analysis import (
    BoundaryEquilibrium,
    ConditionReport,
    EquilibriumReport,
    Sampler,
    complex_balance_residual,
    conservation_laws,
    detect_boundary_equilibria,
    entropy_multipliers,
    find_positive_equilibrium,
    law_basis,
    validate_conditions,
)
from .crn import (
    Complex,
    NetworkParseError,
    PolynomialSystem,
    Reaction,
    ReactionNetwork,
    load_network,
    mass_action_jacobian,
    mass_action_rhs,
    parse_network,
    render_network,
    stoichiometric_matrix,
)
from .diagnostics import (
    DiagnosticsSeries,
    dissipation_balance,
    entropy_monotonicity_report,
    fit_exponential_decay,
    fit_polynomial_growth,
    spacetime_norm,
    sup_norm_envelope,
)
from .grid import Grid
from .inequalities import check_gn_chain, check_spacetime_interpolation, check_xlogx_bound
from .solver import (
    SimulationConfig,
    SimulationError,
    SimulationState,
    load_checkpoint,
    run,
    save_checkpoint,
)

__all__ = [name for name in dir() if not name.startswith("_")]
