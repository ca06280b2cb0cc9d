"""Momentum update with electric forcing and MAC projection to div u = 0.

The provisional velocity takes an explicit viscous step (plus first-order
upwind self-advection when the full momentum equation is selected), forced
on faces by -K * rho * grad(phi); a pressure Poisson solve with homogeneous
Neumann closure then projects onto the discretely divergence-free space.
Wall-normal velocities are pinned to zero throughout (no-slip), which makes
the projection compatible: the provisional divergence integrates to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError, StabilityError
from .poisson import SeparableSolver


@dataclass
class FluidStepReport:
    pre_divergence: float
    post_divergence: float
    pressure_iterations: int
    kinetic_energy_before: float
    kinetic_energy_after: float


def _pad_reflect_tangential(grid, comp, axis_comp):
    """Pad a face array, reflecting across walls in tangential directions.

    Ghost layers along the component's own axis are never read (wall faces
    are stored); tangential ghosts implement u_ghost = -u_edge so the
    wall-interpolated tangential velocity vanishes.
    """
    p = np.pad(comp, 1)
    for b in range(grid.dim):
        if b == axis_comp:
            continue
        core = [slice(1, -1)] * grid.dim
        for side in (0, 1):
            ghost = list(core)
            edge = list(core)
            ghost[b] = 0 if side == 0 else -1
            edge[b] = 1 if side == 0 else -2
            p[tuple(ghost)] = -p[tuple(edge)]
    return p


def _component_laplacian(grid, comp, axis_comp):
    p = _pad_reflect_tangential(grid, comp, axis_comp)
    core = tuple(slice(1, -1) for _ in range(grid.dim))
    lap = np.zeros_like(comp)
    for b in range(grid.dim):
        h2 = grid.spacing[b] ** 2
        up = tuple(slice(2, None) if a == b else slice(1, -1) for a in range(grid.dim))
        dn = tuple(slice(0, -2) if a == b else slice(1, -1) for a in range(grid.dim))
        lap += (p[up] - 2.0 * p[core] + p[dn]) / h2
    return lap


def _tangential_average(grid, comp_b, axis_a, axis_b):
    """comp_b averaged to the interior-face locations of component axis_a."""
    lo_a = tuple(slice(0, -1) if x == axis_a else slice(None) for x in range(grid.dim))
    hi_a = tuple(slice(1, None) if x == axis_a else slice(None) for x in range(grid.dim))
    avg = 0.5 * (comp_b[lo_a] + comp_b[hi_a])
    lo_b = tuple(slice(0, -1) if x == axis_b else slice(None) for x in range(grid.dim))
    hi_b = tuple(slice(1, None) if x == axis_b else slice(None) for x in range(grid.dim))
    return 0.5 * (avg[lo_b] + avg[hi_b])


def _upwind_advection(grid, u, axis_comp):
    """First-order upwind u . grad(u_a) at the interior faces of component a."""
    comp = u.components[axis_comp]
    p = _pad_reflect_tangential(grid, comp, axis_comp)
    interior = u.interior_faces(axis_comp)
    adv = np.zeros_like(comp[interior])
    for b in range(grid.dim):
        h = grid.spacing[b]
        if b == axis_comp:
            vel = comp[interior]
            ctr = tuple(slice(1, -1) if x == b else slice(None) for x in range(grid.dim))
            upw = tuple(slice(0, -2) if x == b else slice(None) for x in range(grid.dim))
            dnw = tuple(slice(2, None) if x == b else slice(None) for x in range(grid.dim))
            back = (comp[ctr] - comp[upw]) / h
            fwd = (comp[dnw] - comp[ctr]) / h
        else:
            vel = _tangential_average(grid, u.components[b], axis_comp, b)
            # neighbors along b come from the padded array at interior a-faces
            ctr = tuple(slice(2, -2) if x == axis_comp else slice(1, -1)
                        for x in range(grid.dim))
            upw = tuple(slice(2, -2) if x == axis_comp else
                        (slice(0, -2) if x == b else slice(1, -1))
                        for x in range(grid.dim))
            dnw = tuple(slice(2, -2) if x == axis_comp else
                        (slice(2, None) if x == b else slice(1, -1))
                        for x in range(grid.dim))
            back = (p[ctr] - p[upw]) / h
            fwd = (p[dnw] - p[ctr]) / h
        adv += np.where(vel >= 0.0, vel * back, vel * fwd)
    return adv


def electric_force(rho, phi, K):
    """Face-centered electric force -K * rho_face * dphi/h on interior faces.

    rho at a face is the arithmetic mean of the two adjacent cells; wall
    faces carry zero force (no-slip).
    """
    grid = rho.grid
    ri = rho.interior
    pi = phi.interior
    forces = []
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        f = np.zeros(grid.face_shape(axis))
        lo = tuple(slice(0, -1) if b == axis else slice(None) for b in range(grid.dim))
        hi = tuple(slice(1, None) if b == axis else slice(None) for b in range(grid.dim))
        rho_face = 0.5 * (ri[lo] + ri[hi])
        dphi = np.diff(pi, axis=axis) / h
        idx = tuple(slice(1, -1) if b == axis else slice(None) for b in range(grid.dim))
        f[idx] = -K * rho_face * dphi
        forces.append(f)
    return forces


def mac_norm_sq(u):
    """Discrete L2 norm squared of a staggered field (face values x cell volume)."""
    vol = u.grid.cell_volume
    return float(sum(np.sum(c * c) for c in u.components)) * vol


def velocity_gradient_norms(u, accumulator=0.0, dt=0.0):
    """Discrete Dirichlet seminorm, L2 norm, and advanced 4th-power integral.

    The seminorm is the exact Dirichlet form of the no-slip viscous operator,
    -<lap_h u, u>, so the explicit momentum step's energy identity holds
    without quadrature slack.  The accumulator advances by dt * seminorm^2
    (rectangle rule for the time integral of the 4th power of the V-norm).
    """
    grid = u.grid
    vol = grid.cell_volume
    grad_sq = 0.0
    for a in range(grid.dim):
        comp = u.components[a]
        lap = _component_laplacian(grid, comp, a)
        grad_sq -= float(np.sum(comp * lap)) * vol
    u_sq = mac_norm_sq(u)
    return grad_sq, u_sq, accumulator + dt * grad_sq * grad_sq


def viscous_dt_bound(grid, nu, safety=0.9):
    # explicit bound h^2/(2 d nu), generalized to anisotropic spacing
    rate = 2.0 * nu * sum(1.0 / h ** 2 for h in grid.spacing)
    return safety / rate


def advective_dt_bound(grid, u, safety=0.9):
    bound = np.inf
    for a in range(grid.dim):
        umax = float(np.max(np.abs(u.components[a])))
        if umax > 0:
            bound = min(bound, grid.spacing[a] / umax)
    return safety * bound


class PressureProjector:
    """Neumann pressure solve bound to a grid; reusable across steps."""

    def __init__(self, grid):
        self.grid = grid
        self.solver = SeparableSolver(grid, 1.0, neumann=True)

    def solve(self, rhs):
        return self.solver.solve(rhs)


def fluid_step(state, params, force, dt, projector=None, div_tol=1e-10,
               enforce_stability=True):
    """Advance velocity and pressure one explicit step; returns a report.

    Explicit viscous (and, for the full momentum model, upwind advective)
    update to a provisional velocity, then projection through a mean-zero
    Neumann pressure solve.  Post-projection divergence is checked against
    div_tol cellwise.
    """
    grid = state.grid
    u = state.velocity
    model = params.fluid_model
    if model == "Frozen":
        ke = 0.5 * mac_norm_sq(u)
        d = u.max_abs_divergence()
        return state, FluidStepReport(d, d, 0, ke, ke)
    if enforce_stability:
        bound = viscous_dt_bound(grid, params.nu)
        if model == "NPNS":
            bound = min(bound, advective_dt_bound(grid, u))
        if dt > bound * (1.0 + 1e-12):
            raise StabilityError(dt, bound, "fluid")
    ke_before = 0.5 * mac_norm_sq(u)
    star = u.copy()
    for a in range(grid.dim):
        interior = u.interior_faces(a)
        lap = _component_laplacian(grid, u.components[a], a)[interior]
        rhs = params.nu * lap
        if model == "NPNS":
            rhs = rhs - _upwind_advection(grid, u, a)
        if force is not None:
            rhs = rhs + force[a][interior]
        star.components[a][interior] = u.components[a][interior] + dt * rhs
    star.enforce_noslip()
    div_star = star.divergence()
    pre_div = float(np.max(np.abs(div_star)))
    if projector is None:
        projector = PressureProjector(grid)
    p = projector.solve(-div_star / dt)
    for a in range(grid.dim):
        interior = u.interior_faces(a)
        gp = np.diff(p, axis=a) / grid.spacing[a]
        u.components[a][interior] = star.components[a][interior] - dt * gp
    u.enforce_noslip()
    post_div = u.max_abs_divergence()
    if post_div > div_tol:
        raise SolverError("post-projection divergence %.3e above %.3e" % (post_div, div_tol),
                          residual=post_div)
    state.pressure.set_interior(p)
    state.pressure.fill_ghosts_mirror()
    ke_after = 0.5 * mac_norm_sq(u)
    return state, FluidStepReport(pre_div, post_div, 1, ke_before, ke_after)
