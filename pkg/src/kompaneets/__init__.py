"""Finite-difference solver and diagnostics for the Kompaneets equation.

The photon number density ``n(x, t)`` on ``x in [0, R]`` evolves by
``n_t = (x^2 n_x + (x^2 - 2x) n + n^2)_x``. The package provides a
geometric mesh, an upwind semi-implicit scheme, closed-form equilibria and
super-solutions, and audits for the photon-loss identity, condensation onset,
entropy decay, L1 contraction and the comparison principle.
"""
from . import analytic, diagnostics
from .analytic import (
    be_density,
    entropy,
    dissipation,
    equilibrium_photon_number,
    photon_number,
    solve_mu_for_number,
    solve_mu_on_mesh,
    super_solution,
    zeta3,
)
from .config import RunConfig, load_preset, parse_config
from .errors import KompaneetsError
from .grid import Mesh, build_geometric_mesh, canonical_mesh, coarsen, refine
from .record import RunRecord
from .scenario import execute
from .solver import (
    Nonlinearity,
    Profile,
    SchemeConfig,
    make_initial_data,
    run,
    step_explicit,
    step_semi_implicit,
    superpose,
)

__all__ = [
    "analytic", "diagnostics",
    "be_density", "entropy", "dissipation", "equilibrium_photon_number", "photon_number",
    "solve_mu_for_number", "solve_mu_on_mesh", "super_solution", "zeta3",
    "RunConfig", "load_preset", "parse_config", "KompaneetsError",
    "Mesh", "build_geometric_mesh", "canonical_mesh", "coarsen", "refine",
    "RunRecord", "execute",
    "Nonlinearity", "Profile", "SchemeConfig", "make_initial_data", "run",
    "step_explicit", "step_semi_implicit", "superpose",
]
