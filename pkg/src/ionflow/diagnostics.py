"""Runtime monitors for every quantity the dissipative structure constrains.

All functions are pure in the state snapshot, so they can run on a copy
concurrently with the next step's assembly.  Conventions shared with the
rest of the package: c*log(c) extends continuously to 0 at c = 0, the face
concentration in the dissipation is the logarithmic mean (continuous at
equal arguments, zero when either endpoint is zero), and every boundary
value of the potential is the face midpoint (ghost + interior)/2 from the
Robin closure, one convention everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError, InvariantViolation
from .fields import gradient_squared_norm, integrate_cells
from .fluid import mac_norm_sq, velocity_gradient_norms

# Pinned constant for the discrete energy-budget bounds on blocking-wall
# trajectories (the identity's hypothesis): the residual obeys
# |r| <= C_BUDGET*(dt + h^2)*scale and sampled free-energy pairs obey
# V(t+s) <= V(t) + C_BUDGET*(dt + h^2)*s*scale with scale = 1 + max(|V|, Diss).
# Selective walls exchange mass with the exterior, so the same budget does
# not close there; the residual is still reported.
C_BUDGET = 20.0


def budget_residual_tol(dt, h, scale):
    return C_BUDGET * (dt + h * h) * scale


def v_monotonicity_tol(dt, h, sample_spacing, scale):
    return C_BUDGET * (dt + h * h) * sample_spacing * scale


@dataclass
class DiagnosticsRecord:
    """One sampled row of the diagnostics stream."""

    t: float
    step: int
    mass: list
    l2: list
    linf: list
    V: float
    Diss: float
    grad_u_sq: float
    u_sq: float
    U_T: float
    budget_residual: float = None
    mu_var: list = dc_field(default_factory=list)
    mu_var_flags: list = dc_field(default_factory=list)
    Q: float = None
    phi_h1: float = 0.0


def entropy_integral(c_field):
    """Integral of c*log(c) with the integrand's continuous extension at 0."""
    c = c_field.interior
    if float(np.min(c)) < 0.0:
        raise InvariantViolation("entropy integrand needs c >= 0")
    vals = np.where(c > 0.0, c * np.log(np.where(c > 0.0, c, 1.0)), 0.0)
    return float(np.sum(vals)) * c_field.grid.cell_volume


def boundary_sq_norm(phi):
    """||phi||^2 on the boundary using face-midpoint values from the ghosts."""
    if not phi.ghosts_valid:
        raise InvariantViolation("potential ghost layer not populated")
    g = phi.grid
    total = 0.0
    for axis, side in g.boundary_slabs():
        mid = 0.5 * (phi.data[g.ghost_slab(axis, side)] + phi.data[g.edge_slab(axis, side)])
        total += float(np.sum(mid * mid)) * g.face_area(axis)
    return total


def lyapunov(state, species, params):
    """Free-energy functional: kinetic + entropy + field + wall-capacitor terms.

    V = (1/2K)||u||^2 + sum_i int c_i log c_i + (eps/2)||grad phi||^2
        + (eps tau / 2) ||phi||^2_boundary
    """
    phi = state.potential
    val = 0.5 / params.K * mac_norm_sq(state.velocity)
    for c in state.concentrations:
        val += entropy_integral(c)
    val += 0.5 * params.epsilon * gradient_squared_norm(phi)
    val += 0.5 * params.epsilon * params.tau * boundary_sq_norm(phi)
    return val


def _log_mean(a, b):
    """Logarithmic mean with continuous extension at a = b and 0 at c = 0."""
    pos = (a > 0.0) & (b > 0.0)
    aa = np.where(pos, a, 1.0)
    bb = np.where(pos, b, 1.0)
    dl = np.log(aa) - np.log(bb)
    close = np.abs(dl) < 1e-8
    mean_log = np.where(close, 0.5 * (aa + bb),
                        (aa - bb) / np.where(close, 1.0, dl))
    return np.where(pos, mean_log, 0.0)


def dissipation(state, species):
    """Entropy production sum_i D_i int c_i |grad mu_i|^2 (face-based, >= 0).

    mu_i = log(c_i) + z_i*phi; faces touching a zero-concentration cell
    contribute nothing (the vanishing-regularization limit), so the result
    is a sum of nonnegative face terms, exactly.
    """
    grid = state.grid
    phi = state.potential.interior
    vol = grid.cell_volume
    total = 0.0
    for spec, cf in zip(species, state.concentrations):
        c = cf.interior
        if float(np.min(c)) < 0.0:
            raise InvariantViolation("dissipation needs c >= 0")
        pos = c > 0.0
        logc = np.where(pos, np.log(np.where(pos, c, 1.0)), 0.0)
        mu = logc + spec.valence * phi
        for axis in range(grid.dim):
            h = grid.spacing[axis]
            lo = tuple(slice(0, -1) if b == axis else slice(None) for b in range(grid.dim))
            hi = tuple(slice(1, None) if b == axis else slice(None) for b in range(grid.dim))
            cP, cE = c[lo], c[hi]
            both = (cP > 0.0) & (cE > 0.0)
            dmu = np.where(both, (mu[hi] - mu[lo]) / h, 0.0)
            cf_face = _log_mean(cP, cE)
            total += spec.diffusivity * float(np.sum(cf_face * dmu * dmu)) * vol
    return total


def mu_variance(state, species):
    """Spatial variance of each electrochemical potential; zero at equilibrium.

    Cells with c = 0 are excluded and flagged; an all-zero species yields
    None with the flag set.
    """
    phi = state.potential.interior
    out, flags = [], []
    for spec, cf in zip(species, state.concentrations):
        c = cf.interior
        pos = c > 0.0
        n_pos = int(np.count_nonzero(pos))
        if n_pos == 0:
            out.append(None)
            flags.append(True)
            continue
        mu = np.log(c[pos]) + spec.valence * phi[pos]
        out.append(float(np.var(mu)))
        flags.append(n_pos != c.size)
    return out, flags


def cancellation_quantity(state, species):
    """Two-species nonnegative coupling integral int rho^2 (|z1|c1 + |z2|c2)."""
    if len(species) != 2:
        return None
    z1, z2 = species[0].valence, species[1].valence
    c1 = state.concentrations[0].interior
    c2 = state.concentrations[1].interior
    rho = z1 * c1 + z2 * c2
    q = rho * rho * (abs(z1) * c1 + abs(z2) * c2)
    return float(np.sum(q)) * state.grid.cell_volume


def cancellation_factored(state, species):
    """Equivalent factored form int (z1^2 c1^2 - z2^2 c2^2) rho (two species)."""
    if len(species) != 2:
        return None
    z1, z2 = species[0].valence, species[1].valence
    c1 = state.concentrations[0].interior
    c2 = state.concentrations[1].interior
    rho = z1 * c1 + z2 * c2
    q = (z1 * z1 * c1 * c1 - z2 * z2 * c2 * c2) * rho
    return float(np.sum(q)) * state.grid.cell_volume


def energy_budget_residual(rec_n, rec_np1, params):
    """Discrete defect of dV/dt + Diss + (nu/K)||grad u||^2 = 0 between samples."""
    dt = rec_np1.t - rec_n.t
    if dt <= 0:
        raise ConfigError("records must be ordered in time")
    return ((rec_np1.V - rec_n.V) / dt + rec_n.Diss
            + params.nu / params.K * rec_n.grad_u_sq)


def mixed_bc_monitors(state, species, rho_sq_integral=0.0, dt=0.0):
    """Monitors for the selective/blocking mixed wall configuration.

    Returns (||q1||_L2, ||c2||_L1, advanced time integral of ||rho||^2_L2)
    with q1 = c1 - gamma1.  Requires species 1 selective, species 2 blocking,
    z1 > 0 > z2.
    """
    if len(species) != 2 or species[0].bc != "dirichlet" or species[1].bc != "blocking" \
            or not (species[0].valence > 0 > species[1].valence):
        raise ConfigError("mixed monitors need species 1 dirichlet, species 2 "
                          "blocking, with opposite valences z1 > 0 > z2")
    grid = state.grid
    vol = grid.cell_volume
    c1 = state.concentrations[0].interior
    c2 = state.concentrations[1].interior
    q1 = c1 - species[0].gamma
    q1_l2 = float(np.sqrt(np.sum(q1 * q1) * vol))
    c2_l1 = float(np.sum(np.abs(c2)) * vol)
    rho = species[0].valence * c1 + species[1].valence * c2
    rho_sq = float(np.sum(rho * rho) * vol)
    return q1_l2, c2_l1, rho_sq_integral + dt * rho_sq


def phi_h1_norm(phi):
    """H1 norm of the potential (volume L2 plus Dirichlet energy)."""
    l2_sq = float(np.sum(phi.interior ** 2)) * phi.grid.cell_volume
    return float(np.sqrt(l2_sq + gradient_squared_norm(phi)))


def collect(state, species, params, U_T, grad_u_sq=None, u_sq=None):
    """Assemble one diagnostics record from a consistent state snapshot.

    The potential ghosts must reflect the current charge density.  The
    budget residual is left unset; the caller pairs consecutive records.
    """
    if grad_u_sq is None or u_sq is None:
        grad_u_sq, u_sq, _ = velocity_gradient_norms(state.velocity)
    masses, l2s, linfs = [], [], []
    vol = state.grid.cell_volume
    for c in state.concentrations:
        masses.append(integrate_cells(c))
        l2s.append(float(np.sqrt(np.sum(c.interior ** 2) * vol)))
        linfs.append(float(np.max(np.abs(c.interior))))
    mv, mv_flags = mu_variance(state, species)
    phi = state.potential
    grad_phi_sq = gradient_squared_norm(phi)   # shared by V and the H1 norm
    V = (0.5 / params.K * u_sq
         + sum(entropy_integral(c) for c in state.concentrations)
         + 0.5 * params.epsilon * grad_phi_sq
         + 0.5 * params.epsilon * params.tau * boundary_sq_norm(phi))
    phi_l2_sq = float(np.sum(phi.interior ** 2)) * vol
    return DiagnosticsRecord(
        t=state.t,
        step=state.step,
        mass=masses,
        l2=l2s,
        linf=linfs,
        V=V,
        Diss=dissipation(state, species),
        grad_u_sq=grad_u_sq,
        u_sq=u_sq,
        U_T=U_T,
        mu_var=mv,
        mu_var_flags=mv_flags,
        Q=cancellation_quantity(state, species),
        phi_h1=float(np.sqrt(phi_l2_sq + grad_phi_sq)),
    )
