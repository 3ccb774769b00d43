"""Numerical laboratory for the ultrafast diffusion equation

    d/dt f = -r div(f grad(rho / f^(r+1))),   r > 1,

its free energy, entropy production, explicit decay constants and the
discrete Poincare constant of the equilibrium m = gamma * rho**(1/(r+1)).
"""

from .errors import (
    ConfigurationError,
    DimensionError,
    FitError,
    NumericalFailure,
    ParameterError,
    PositivityError,
    PropertyViolation,
    TruncationTooSmallError,
    UltrafastError,
    UnsupportedWeightError,
)
from .functionals import (
    BoundsReport,
    FunctionalReport,
    chi2_distance,
    decay_constant,
    dirichlet_energy,
    dissipation,
    dissipation_u,
    energy_gap,
    free_energy,
    functional_report,
    lemma_constants,
    verify_bounds,
)
from .grid import Grid, build_grid
from .localization import localization_study, localize_initial, localize_weight
from .poincare import SpectralGapResult, assemble_operators, poincare_check, richardson, spectral_gap
from .solver import RunRecord, SolverConfig, fit_decay_rate, fit_rate, pressure, run, run_pair, stable_dt, step
from .weights import (
    DensityField,
    Equilibrium,
    Potential,
    Weight,
    default_half_width,
    equilibrium,
    make_initial,
    make_weight,
)

__version__ = "0.1.0"
