"""Side-by-side run of the full multi-species system and its (rho, sigma) pair.

Under equal diffusivities and equal |valence| the pair system is an exact
algebraic reduction of the full one, so the two trajectories may differ
only by accumulated roundoff.  Each side owns its complete state: its own
potential solve, its own velocity, its own pressure.
"""

from __future__ import annotations

import numpy as np

from ..config import SimConfig
from ..errors import ConfigError
from ..fields import ScalarField
from ..fluid import PressureProjector, electric_force, fluid_step
from ..poisson import RobinPoissonProblem, SeparableSolver, charge_density, solve_potential
from ..transport import advance_concentrations, rho_sigma_step, stable_dt


def rho_sigma_equivalence(config, n_steps=500):
    """Max over time of ||rho_full - rho_pair||_inf + ||sigma_full - sigma_pair||_inf."""
    if not isinstance(config, SimConfig):
        raise ConfigError("rho_sigma_equivalence expects a validated SimConfig")
    species = config.build_species()
    Ds = {s.diffusivity for s in species}
    zs = {abs(s.valence) for s in species}
    if len(Ds) != 1 or len(zs) != 1:
        raise ConfigError("equivalence needs equal diffusivities and equal "
                          "|valences| (the reduction hypothesis)")
    if any(s.bc != "blocking" for s in species):
        raise ConfigError("equivalence is defined for blocking walls")
    z = zs.pop()
    D = Ds.pop()
    grid = config.build_grid()
    params = config.build_params()
    xi = config.build_xi(grid)
    cache = SeparableSolver(grid, params.epsilon, tau=params.tau)

    full = config.initial_state(grid, species)
    pair = config.initial_state(grid, species)   # borrow layout for u, p
    rho_p = ScalarField.zeros(grid)
    sigma_p = ScalarField.zeros(grid)
    for spec, c in zip(species, full.concentrations):
        rho_p.interior[...] += spec.valence * c.interior
        sigma_p.interior[...] += z * c.interior

    def solve(rho_field):
        problem = RobinPoissonProblem(rho=rho_field, epsilon=params.epsilon,
                                      tau=params.tau, xi=xi, method="separable")
        return solve_potential(problem, solver_cache=cache)

    full.potential = solve(charge_density(full, species))
    dt = stable_dt(grid, full.potential, species, full.velocity)
    projector = PressureProjector(grid) if params.fluid_model != "Frozen" else None

    max_dev = 0.0
    for _ in range(n_steps):
        rho_f = charge_density(full, species)
        full.potential = solve(rho_f)
        phi_p = solve(rho_p)

        sigma_f = np.zeros(grid.interior_shape)
        for c in full.concentrations:
            sigma_f += z * c.interior
        dev = float(np.max(np.abs(rho_f.interior - rho_p.interior))
                    + np.max(np.abs(sigma_f - sigma_p.interior)))
        max_dev = max(max_dev, dev)

        # forces are built from the pre-step charge on both sides
        force_f = force_p = None
        if params.fluid_model != "Frozen":
            force_f = electric_force(rho_f, full.potential, params.K)
            force_p = electric_force(rho_p, phi_p, params.K)
        advance_concentrations(full, species, dt)
        rho_sigma_step(rho_p, sigma_p, z, D, phi_p, pair.velocity, dt)
        if params.fluid_model != "Frozen":
            fluid_step(full, params, force_f, dt, projector=projector)
            fluid_step(pair, params, force_p, dt, projector=projector)
    return {"max_deviation": max_dev, "steps": n_steps, "dt": dt,
            "grid": list(grid.cells), "species": len(species)}
