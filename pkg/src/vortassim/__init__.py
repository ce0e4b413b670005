"""Exponentially convergent state estimation for the Fourier-Galerkin 2-D vorticity model."""

__version__ = "0.1.0"

from .diagnostics import (
    DetectabilityReport,
    ErrorBoundParams,
    check_detectability,
    check_lmi,
    error_bound,
    riccati_residual,
)
from .dynamics import ForcingSpec, Trajectory, midpoint_step, two_mode_forcing, rhs_state, simulate_truth
from .estimator import SpectralObserver
from .exceptions import FilterAborted, NumericalError, ValidationError
from .filtering import FilterConfig, FilterRun, filter_step, run_filter
from .gain import Gain, GainProblem, assemble_W, solve_gain_dense, solve_gain_iterative, solve_gain_structured
from .observation import (
    ObservationModel,
    ObservationSeries,
    UncertaintyEllipsoid,
    ellipsoid_contains,
    generate_observations,
    selection_observation,
)
from .operators import assemble_B1, assemble_convection, assemble_mean_flow, diffusion_operator
from .spectral import (
    ModeGrid,
    build_mode_grid,
    conjugacy_projector,
    enstrophy,
    evaluate_field,
    laplacian_spectrum,
    project_physical_field,
)
