"""Conservative finite-volume transport of the ionic concentrations.

Face fluxes combine exponential-fitting electro-diffusion (exact on discrete
Boltzmann equilibria, i.e. on constant Slotboom variables) with first-order
upwind advection by the staggered velocity.  Fluxes live on faces, one value
per face, so conservation is structural: the flux leaving a cell is the flux
entering its neighbor.  Flux assembly is embarrassingly parallel over faces
and the divergence update over cells; species never share mutable state, so
they may step in parallel against the same frozen potential and velocity.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, InvariantViolation, PositivityError, StabilityError

_SERIES_CUT = 1e-4


def bernoulli(x):
    """B(x) = x / (e^x - 1), with B(0) = 1.

    Series evaluation below |x| = 1e-4 avoids cancellation; large positive
    arguments decay gracefully to x*e^(-x) ~ 0.  Total on all finite inputs
    and vectorized over arrays.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    small = np.abs(x) < _SERIES_CUT
    x2 = x * x
    series = 1.0 - 0.5 * x + x2 * (1.0 / 12.0) - x2 * x2 * (1.0 / 720.0)
    safe = np.where(small, 1.0, np.minimum(x, 700.0))
    out = np.where(small, series, safe / np.expm1(safe))
    big = x > 700.0
    if np.any(big):
        out = np.where(big, x * np.exp(np.where(big, -x, 0.0)), out)
    return float(out) if scalar else out


def electro_diffusive_face_flux(cP, cE, dPhi, z, D, h):
    """Exponential-fitting flux through one face, oriented P -> E.

    dPhi is the potential difference phi_E - phi_P across the face; positive
    flux transports mass from cell P toward cell E.
    """
    delta = z * dPhi
    return (D / h) * (bernoulli(delta) * cP - bernoulli(-delta) * cE)


def advective_face_flux(cP, cE, u_face):
    """First-order upwind: the donor cell is chosen by the face velocity sign."""
    u = np.asarray(u_face, dtype=float)
    return np.where(u >= 0.0, u * cP, u * cE)


def slotboom(state, species):
    """Per-species change of variables ct_i = c_i * exp(z_i * phi).

    Derived view only, never primary state.  Raises on overflow of the
    exponential weight, naming the worst cell value.
    """
    phi = state.potential.interior
    views = []
    for i, (spec, c) in enumerate(zip(species, state.concentrations)):
        expo = spec.valence * phi
        mx = float(np.max(expo))
        if mx > 700.0:
            raise InvariantViolation(
                "slotboom weight overflows: z*phi reaches %.3e for species %d" % (mx, i))
        views.append(c.interior * np.exp(expo))
    return views


def slotboom_inverse(views, state, species):
    """Recover concentrations from Slotboom views against the current potential."""
    phi = state.potential.interior
    return [v * np.exp(-spec.valence * phi) for spec, v in zip(species, views)]


def _face_interior(grid, axis):
    """Slices selecting the non-wall faces of a per-face array."""
    idx = [slice(None)] * grid.dim
    idx[axis] = slice(1, -1)
    return tuple(idx)


def _lo(grid, axis):
    return tuple(slice(None) if b != axis else slice(0, -1) for b in range(grid.dim))


def _hi(grid, axis):
    return tuple(slice(None) if b != axis else slice(1, None) for b in range(grid.dim))


def _wall(grid, axis, side):
    idx = [slice(None)] * grid.dim
    idx[axis] = 0 if side == 0 else -1
    return tuple(idx)


def boundary_closure(grid, spec, c, phi):
    """Ghost values and wall fluxes for one species, per (axis, side).

    Blocking walls: flux exactly zero, no ghost concentration needed (the
    entry is None).  Selective (dirichlet) walls: linear ghost
    2*gamma - c_int through the wall level, flux from the same
    exponential-fitting formula with the face potential drop taken from the
    Robin-consistent phi ghost.  Wall fluxes are oriented along +axis.
    """
    if not phi.ghosts_valid:
        raise InvariantViolation("potential ghost layer not populated")
    z, D = spec.valence, spec.diffusivity
    ghosts = {}
    wall_fluxes = {}
    for axis, side in grid.boundary_slabs():
        h = grid.spacing[axis]
        if spec.bc == "blocking":
            ghosts[(axis, side)] = None
            wall_fluxes[(axis, side)] = np.zeros(grid.slab_shape(axis))
            continue
        edge_c = c.data[grid.edge_slab(axis, side)]
        ghost_c = 2.0 * spec.gamma - edge_c
        edge_p = phi.data[grid.edge_slab(axis, side)]
        ghost_p = phi.data[grid.ghost_slab(axis, side)]
        if side == 0:
            # P = ghost, E = first interior cell
            d = z * (edge_p - ghost_p)
            Fb = (D / h) * (bernoulli(d) * ghost_c - bernoulli(-d) * edge_c)
        else:
            # P = last interior cell, E = ghost
            d = z * (ghost_p - edge_p)
            Fb = (D / h) * (bernoulli(d) * edge_c - bernoulli(-d) * ghost_c)
        ghosts[(axis, side)] = ghost_c
        wall_fluxes[(axis, side)] = Fb
    return ghosts, wall_fluxes


def species_flux(grid, c, phi, spec, velocity=None):
    """Total normal flux per face for one species, oriented along +axis.

    Interior faces combine the exponential-fitting electro-diffusive flux
    with upwind advection; wall entries come from boundary_closure (wall
    advective flux vanishes under no-slip).
    """
    if not phi.ghosts_valid:
        raise InvariantViolation("potential ghost layer not populated")
    z, D = spec.valence, spec.diffusivity
    ci = c.interior
    pi = phi.interior
    fluxes = []
    wall_fluxes = None
    if spec.bc != "blocking":
        _, wall_fluxes = boundary_closure(grid, spec, c, phi)
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        F = np.zeros(grid.face_shape(axis))
        delta = z * np.diff(pi, axis=axis)
        Bp = bernoulli(delta)
        Bm = Bp + delta          # B(-x) = B(x) + x
        cP = ci[_lo(grid, axis)]
        cE = ci[_hi(grid, axis)]
        Fi = (D / h) * (Bp * cP - Bm * cE)
        if velocity is not None:
            u = velocity.components[axis][_face_interior(grid, axis)]
            Fi = Fi + np.where(u >= 0.0, u * cP, u * cE)
        F[_face_interior(grid, axis)] = Fi
        if wall_fluxes is not None:
            for side in (0, 1):
                F[_wall(grid, axis, side)] = wall_fluxes[(axis, side)]
        fluxes.append(F)
    return fluxes


def apply_flux_divergence(grid, c_interior, fluxes, dt):
    out = c_interior.copy()
    for axis in range(grid.dim):
        out -= dt * np.diff(fluxes[axis], axis=axis) / grid.spacing[axis]
    return out


def stable_dt(grid, phi, species, velocity=None, safety=0.9):
    """Positivity-preserving time-step bound for the explicit transport step.

    Sufficient facewise condition: each of a cell's 2*dim faces may drain at
    most 1/(2*dim) of its content per step, with the drift-weighted
    diffusion coefficient D*max(B(d), B(-d)) and the upwind outflow |u|.
    max(B(d), B(-d)) = B(-|d|) is increasing in |d|, so only the largest
    potential jump per axis matters.
    """
    if not phi.ghosts_valid:
        raise InvariantViolation("potential ghost layer not populated")
    pi = phi.interior
    dim = grid.dim
    bound = math.inf
    for spec in species:
        z, D = spec.valence, spec.diffusivity
        for axis in range(dim):
            h = grid.spacing[axis]
            dmax = abs(z) * float(np.max(np.abs(np.diff(pi, axis=axis))))
            if spec.bc == "dirichlet":
                for side in (0, 1):
                    edge_p = phi.data[grid.edge_slab(axis, side)]
                    ghost_p = phi.data[grid.ghost_slab(axis, side)]
                    dmax = max(dmax, abs(z) * float(np.max(np.abs(ghost_p - edge_p))))
            maxB = bernoulli(-dmax)
            umax = 0.0
            if velocity is not None:
                umax = float(np.max(np.abs(velocity.components[axis])))
            rate = 2.0 * dim * (D * maxB / h ** 2 + umax / h)
            if rate > 0:
                bound = min(bound, 1.0 / rate)
    return safety * bound


def advance_concentrations(state, species, dt, enforce_stability=True):
    """One conservative explicit step of every species; updates state in place.

    Requires phi current for the present charge density (Gummel lagging of
    at most one step is the caller's contract).  Blocking species conserve
    total content to machine-sum precision; a negative post-step value
    raises PositivityError naming the cell, species, and a suggested dt.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    grid = state.grid
    phi = state.potential
    if enforce_stability:
        bound = stable_dt(grid, phi, species, state.velocity)
        if dt > bound * (1.0 + 1e-12):
            raise StabilityError(dt, bound, "transport")
    new_values = []
    for i, (spec, c) in enumerate(zip(species, state.concentrations)):
        fluxes = species_flux(grid, c, phi, spec, state.velocity)
        cn = apply_flux_divergence(grid, c.interior, fluxes, dt)
        mn = float(np.min(cn))
        if mn < 0.0:
            cell = np.unravel_index(int(np.argmin(cn)), cn.shape)
            suggested = 0.5 * stable_dt(grid, phi, species, state.velocity)
            raise PositivityError(i, tuple(int(k) for k in cell), mn, suggested)
        new_values.append(cn)
    for c, cn in zip(state.concentrations, new_values):
        c.set_interior(cn)
    return state


def pair_flux(grid, rho_i, sigma_i, z, D, phi, velocity=None):
    """Fluxes of the (rho, sigma) pair system under equal D and |z|.

    Written as the exact sum/difference of the per-species exponential-fit
    kernels, so the reduction from the full multi-species step is algebraic:
      F_rho   = (D/h) [ -delta*(sigma_P+sigma_E)/2 + Bbar*(rho_P - rho_E) ]
      F_sigma = (D/h) [ -delta*(rho_P+rho_E)/2   + Bbar*(sigma_P - sigma_E) ]
    with delta = z*dphi and Bbar = (B(delta)+B(-delta))/2.  Walls are the
    blocking pair closure: both fluxes exactly zero.
    """
    if not phi.ghosts_valid:
        raise InvariantViolation("potential ghost layer not populated")
    pi = phi.interior
    Fr, Fs = [], []
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        delta = z * np.diff(pi, axis=axis)
        Bbar = bernoulli(delta) + 0.5 * delta      # (B(x) + B(-x)) / 2
        rP, rE = rho_i[_lo(grid, axis)], rho_i[_hi(grid, axis)]
        sP, sE = sigma_i[_lo(grid, axis)], sigma_i[_hi(grid, axis)]
        fr = (D / h) * (-delta * 0.5 * (sP + sE) + Bbar * (rP - rE))
        fs = (D / h) * (-delta * 0.5 * (rP + rE) + Bbar * (sP - sE))
        if velocity is not None:
            u = velocity.components[axis][_face_interior(grid, axis)]
            fr = fr + np.where(u >= 0.0, u * rP, u * rE)
            fs = fs + np.where(u >= 0.0, u * sP, u * sE)
        FR = np.zeros(grid.face_shape(axis))
        FS = np.zeros(grid.face_shape(axis))
        FR[_face_interior(grid, axis)] = fr
        FS[_face_interior(grid, axis)] = fs
        Fr.append(FR)
        Fs.append(FS)
    return Fr, Fs


def rho_sigma_step(rho, sigma, z, D, phi, velocity, dt, enforce_stability=True):
    """One conservative step of the coupled charge/total-concentration pair.

    Valid under the equal-diffusivity, equal-|valence| hypothesis.  The
    invariant sigma >= |rho| (nonnegativity of the underlying species sums)
    is checked after the step.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    grid = rho.grid
    if enforce_stability:
        specs = [_PairSpec(z, D), _PairSpec(-z, D)]
        bound = stable_dt(grid, phi, specs, velocity)
        if dt > bound * (1.0 + 1e-12):
            raise StabilityError(dt, bound, "pair transport")
    Fr, Fs = pair_flux(grid, rho.interior, sigma.interior, z, D, phi, velocity)
    rn = apply_flux_divergence(grid, rho.interior, Fr, dt)
    sn = apply_flux_divergence(grid, sigma.interior, Fs, dt)
    gap = sn - np.abs(rn)
    mn = float(np.min(gap))
    if mn < -1e-12 * max(1.0, float(np.max(np.abs(sn)))):
        cell = np.unravel_index(int(np.argmin(gap)), gap.shape)
        raise PositivityError(-1, tuple(int(k) for k in cell), mn, 0.5 * dt)
    rho.set_interior(rn)
    sigma.set_interior(sn)
    return rho, sigma


class _PairSpec:
    """Minimal species stand-in for the stability bound of the pair system."""

    __slots__ = ("valence", "diffusivity", "bc", "gamma")

    def __init__(self, z, D):
        self.valence = z
        self.diffusivity = D
        self.bc = "blocking"
        self.gamma = None
