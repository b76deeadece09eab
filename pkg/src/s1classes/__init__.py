"""Singular energy of circle-valued maps on planar domains."""
from .errors import (
    DomainError,
    GridError,
    NumericError,
    ParameterError,
    PreconditionError,
    ResolutionError,
    S1Error,
    SizeError,
)
from .geometry import BOUNDARY, Domain, Grid, build_grid, centred_grid, grid_avoiding, semi_metric
from .matching import (
    Configuration,
    boundary_augment,
    kantorovich_dual,
    matching_bruteforce,
    min_cost_matching,
    sigma_exact,
)

__version__ = "0.1.0"
