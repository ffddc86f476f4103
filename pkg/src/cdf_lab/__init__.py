"""Conservation-dissipation balance-law laboratory.

Define hyperbolic relaxation models with a concave entropy and a positive
definite dissipation matrix, audit the structural stability conditions,
simulate at desk scale, and verify the classical stationary limits
(Fourier, Newton-Stokes, power-law).
"""

from .core import (AdmissibilityError, CdfModel, ConvergenceError,
                   StateVector, entropy_gradient, entropy_hessian,
                   entropy_production, equilibrium_project, flux_jacobian,
                   source, spectral_radius)
from .fluid import (FluidParams, MaxwellGradients, PowerLawParams,
                    conserved_from_primitive, fluid_model, fns_limit_fluxes,
                    maxwell_relaxation_residual, orthogonal_decompose,
                    powerlaw_stress, powerlaw_stress_fixed_point,
                    primitive_from_conserved)
from .heat import (HeatParams, fourier_flux, generalized_fourier, heat_model,
                   sign_flipped_heat_model)
from .solver import (Grid1D, Grid2D, Scenario, Trajectory, run, rusanov_flux,
                     step_hyperbolic, step_source_exact, strang_step)
from .verify import (AuditReport, SamplingPlan, check_concavity,
                     check_dissipation_matrix, check_entropy_flux_exists,
                     check_hyperbolicity, check_source_consistency,
                     check_symmetrizability, run_full_audit)

__version__ = "0.1.0"
