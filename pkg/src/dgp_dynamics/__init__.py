"""Depth dynamics of deep Gaussian process priors.

Recurrence maps for the expected squared distance between two points as they
pass through the layers of a zero-mean deep GP, with a quadrature oracle, a
Monte-Carlo prior sampler and parameter-scan drivers.
"""

__version__ = "0.1.0"

from .errors import ConfigurationError, DomainError, NumericalFailure
from .kernels import KernelSpec, Kind, gram_matrix, kernel_eval
from .recurrence import (
    BoundKind,
    Pathology,
    RecurrenceMap,
    classify,
    convergence_rate,
    fixed_points,
    initial_u_from_inputs,
    input_connect_constant,
    step,
    trajectory,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "DomainError",
    "NumericalFailure",
    "KernelSpec",
    "Kind",
    "gram_matrix",
    "kernel_eval",
    "BoundKind",
    "Pathology",
    "RecurrenceMap",
    "classify",
    "convergence_rate",
    "fixed_points",
    "initial_u_from_inputs",
    "input_connect_constant",
    "step",
    "trajectory",
]
