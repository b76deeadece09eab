"""Singular-energy estimators and the distance experiments."""
from .experiments import (
    DipoleSequence,
    DipoleStep,
    DistanceBounds,
    SigmaEstimate,
    averaging_identity_check,
    dipole_sequence,
    dist_bounds,
    equality_case_probe,
    growth_experiment,
    near_minimizer,
    optimal_lifting_energy,
    p_infimum_variational,
    projection_distance,
    reverse_triangle_margin,
    sigma_of_config,
    strict_inequality_probe,
    tn_distance_experiment,
)
from .solver import PInfimumResult, SolverSettings, VariationalResult, p_infimum, sigma_variational
