"""Structure-preserving finite-volume electrodiffusion on box domains.

Couples ionic drift-diffusion (exponential-fitting fluxes, blocking or
selective walls) to a Robin-closed potential solve and an incompressible
momentum equation on a staggered grid, with runtime monitors for the free
energy, its dissipation, masses, and the discrete energy budget.
"""

from .errors import (ConfigError, InvariantViolation, IonflowError,
                     PositivityError, SolverError, StabilityError)
from .fields import (BoundaryData, Grid, PhysicalParams, ScalarField,
                     SimState, SpeciesSpec, StaggeredVectorField,
                     gradient_squared_norm, integrate_boundary,
                     integrate_cells, make_grid)
from .poisson import (RobinPoissonProblem, charge_density, fill_robin_ghosts,
                      solve_potential)
from .transport import (advance_concentrations, advective_face_flux,
                        bernoulli, boundary_closure,
                        electro_diffusive_face_flux, rho_sigma_step,
                        slotboom, slotboom_inverse, species_flux, stable_dt)
from .fluid import (FluidStepReport, electric_force, fluid_step, mac_norm_sq,
                    velocity_gradient_norms)
from .diagnostics import (C_BUDGET, DiagnosticsRecord, budget_residual_tol,
                          cancellation_factored, cancellation_quantity,
                          collect, dissipation, energy_budget_residual,
                          lyapunov, mixed_bc_monitors, mu_variance,
                          v_monotonicity_tol)
from .config import SimConfig, load_config, validate_config
from .scenarios import scenario, scenario_names, scenario_with
from .orchestrator import Simulation, resume_simulation, run_simulation

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "InvariantViolation", "IonflowError", "PositivityError",
    "SolverError", "StabilityError",
    "BoundaryData", "Grid", "PhysicalParams", "ScalarField", "SimState",
    "SpeciesSpec", "StaggeredVectorField", "gradient_squared_norm",
    "integrate_boundary", "integrate_cells", "make_grid",
    "RobinPoissonProblem", "charge_density", "fill_robin_ghosts",
    "solve_potential",
    "advance_concentrations", "advective_face_flux", "bernoulli",
    "boundary_closure", "electro_diffusive_face_flux", "rho_sigma_step",
    "slotboom", "slotboom_inverse", "species_flux", "stable_dt",
    "FluidStepReport", "electric_force", "fluid_step", "mac_norm_sq",
    "velocity_gradient_norms",
    "C_BUDGET", "DiagnosticsRecord", "budget_residual_tol",
    "cancellation_factored", "cancellation_quantity", "collect",
    "dissipation", "energy_budget_residual", "lyapunov",
    "mixed_bc_monitors", "mu_variance", "v_monotonicity_tol",
    "SimConfig", "load_config", "validate_config",
    "scenario", "scenario_names", "scenario_with",
    "Simulation", "resume_simulation", "run_simulation",
    "__version__",
]
