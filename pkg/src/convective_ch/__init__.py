"""Sine-Galerkin solver for the convective Cahn-Hilliard equation on a rectangle."""
from .model import ModelParams, c0, continuous_rhs, nonlinearity_eval
from .spectral import (
    GridSpec,
    NormSet,
    PhysField,
    SpectralField,
    biharmonic,
    embed,
    gradient_values,
    inner_product,
    laplacian,
    make_grid,
    mass,
    norms,
    project,
    sine_transform_forward,
    sine_transform_inverse,
)
from .steppers import (
    Blowup,
    NonConvergence,
    SolverConfig,
    StepReport,
    TimeGrid,
    run,
    scheme_operator,
    step_explicit_reference,
    step_implicit,
)

__version__ = "0.1.0"
