"""Numerical toolkit for self-similar blowup of the radial Landau equation near the Maxwellian."""

from .errors import (
    ConfigurationError,
    ConstructionError,
    DataError,
    DegenerateFieldError,
    LandauError,
    NumericalError,
    PreconditionError,
    StepError,
    TruncationWarning,
)
from .grid import RadialField, RadialGrid, build_grid, differentiate, integrate, moments
from .biharmonic import sign_properties, solve_biharmonic, verify_biharmonic_residual
from .potentials import (
    PotentialSpec,
    c_of_f,
    maxwellian,
    maxwellian_monotonicity,
    normalization_constants,
    sigma_table,
)
from .collision import collision_pair, collision_q, l_alpha, linearized_l1, nonlinear_terms
from .weights import build_family, weight_certificate
from .spectral import (
    coercivity_form,
    constrained_gap,
    energy_functionals,
    form_jrho,
    form_jrho2,
    form_jrho_tilde,
    local_gap_surrogate,
)
from .rescaler import RunConfig, compute_scaling, physical_moment, reproject, run, step

__version__ = "0.1.0"
