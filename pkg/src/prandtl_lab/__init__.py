"""Numerical laboratory for singularity formation in the inviscid 2-D Prandtl
system: self-similar profiles, blow-up times along characteristics, Eulerian
reconstruction and renormalised convergence diagnostics."""

from .kernels import c_pm, gamma_fn, p_star, psi1
from .lagrangian import BlowupReport, InitialDatum, OuterFlow, analyze
from .profile_degenerate import theta_prime, y_prime_star
from .profile_generic import theta, y_star
from .scenario import Scenario, load_scenario, parse_expr, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "BlowupReport", "InitialDatum", "OuterFlow", "Scenario", "analyze", "c_pm", "gamma_fn",
    "load_scenario", "p_star", "parse_expr", "parse_scenario", "psi1", "theta", "theta_prime",
    "y_prime_star", "y_star",
]
