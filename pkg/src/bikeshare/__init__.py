"""Mean-field, diffusion and simulation analysis of bike-sharing occupancy."""

from .errors import (
    AlignmentError,
    BikeShareError,
    CapacityError,
    ConvergenceError,
    IngestError,
    IntegrationError,
    NoExtremumError,
    ParameterError,
)
from .model import (
    EmpiricalMeasure,
    ModelParams,
    Sinusoidal,
    Stationary,
    UtilizationClass,
    aggregate_drift,
    drift,
    jacobian,
    noise_rate,
)
from .ode import equilibrium, solve_covariance, solve_mean_field
from .sim import SimConfig, replicate, simulate_path

__version__ = "0.1.0"
