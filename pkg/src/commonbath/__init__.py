"""Two harmonic oscillators in a common heat bath of oscillators.

Exact quadratic Hamiltonians, normal-mode equilibrium moments and trajectory
simulations for the independent-oscillator bath model.
"""

__version__ = "0.1.0"

from .bath_models import SpectralModel, discretize_ohmic, kernel_total, memory_kernel
from .errors import (
    CommonBathError, DomainError, NoEquilibriumError, ParameterError, StructureError,
    UnsupportedConfigurationError, UsageError,
)
from .quad_model import (
    BathMode, BathSpec, QuadraticSystem, StructureReport, build_one_body_io, build_two_body_bilinear,
    build_two_body_common, has_lower_bound, is_io_form, min_potential_eigenvalue, rescale_bath_cm,
    split_cm_rel, to_cm_rel,
)
from .spectrum import (
    casimir_cross_correlation, classical_covariance, correlation_series, decompose, quantum_covariance,
)
