"""Box-domain grid, ghosted cell-centered fields, MAC-staggered vectors.

All fields are stored in the nondimensional units of the rescaled system;
there is no unit-conversion layer.  Cell-centered scalars carry one ghost
layer per side (corner ghosts exist in storage but are never read by the
5/7-point stencils used throughout).  Staggered vectors store one normal
component per cell face per axis, walls included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError, InvariantViolation

AXIS_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class Grid:
    """Uniform structured grid on the box [0, L_1] x ... x [0, L_d]."""

    dim: int
    cells: tuple
    lengths: tuple
    spacing: tuple

    @property
    def cell_volume(self):
        return math.prod(self.spacing)

    @property
    def cell_count(self):
        return math.prod(self.cells)

    def face_area(self, axis):
        return self.cell_volume / self.spacing[axis]

    @property
    def interior_shape(self):
        return tuple(self.cells)

    @property
    def ghosted_shape(self):
        return tuple(n + 2 for n in self.cells)

    @property
    def core(self):
        """Slices selecting the interior of a ghosted array."""
        return tuple(slice(1, -1) for _ in range(self.dim))

    def ghost_slab(self, axis, side):
        """Slices selecting the ghost layer behind one boundary (no corners)."""
        idx = [slice(1, -1)] * self.dim
        idx[axis] = 0 if side == 0 else -1
        return tuple(idx)

    def edge_slab(self, axis, side):
        """Slices selecting the first interior layer next to one boundary."""
        idx = [slice(1, -1)] * self.dim
        idx[axis] = 1 if side == 0 else -2
        return tuple(idx)

    def interior_edge(self, axis, side):
        """Slices into an interior-shaped array for the layer at one boundary."""
        idx = [slice(None)] * self.dim
        idx[axis] = 0 if side == 0 else -1
        return tuple(idx)

    def slab_shape(self, axis):
        return tuple(n for b, n in enumerate(self.cells) if b != axis)

    def boundary_face_count(self):
        return sum(2 * self.cell_count // self.cells[a] for a in range(self.dim))

    def boundary_slabs(self):
        """Every boundary face group as (axis, side); side 0 = low, 1 = high.

        The outward normal of slab (axis, side) is -e_axis for side 0 and
        +e_axis for side 1; each boundary face belongs to exactly one slab.
        """
        return [(a, s) for a in range(self.dim) for s in (0, 1)]

    def centers(self, axis):
        """Cell-center coordinates along one axis (1D array)."""
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def centers_broadcast(self, axis):
        """Cell-center coordinates shaped for broadcasting over the interior."""
        shape = [1] * self.dim
        shape[axis] = self.cells[axis]
        return self.centers(axis).reshape(shape)

    def slab_center_coords(self, axis, side):
        """Face-center coordinates of a boundary slab.

        Returns a list of arrays, one per axis, each broadcastable to the
        slab shape; the entry for `axis` is the constant wall coordinate.
        """
        coords = []
        slab_axes = [b for b in range(self.dim) if b != axis]
        for b in range(self.dim):
            if b == axis:
                coords.append(0.0 if side == 0 else self.lengths[axis])
            else:
                k = slab_axes.index(b)
                shape = [1] * (self.dim - 1)
                shape[k] = self.cells[b]
                coords.append(self.centers(b).reshape(shape))
        return coords

    def face_shape(self, axis):
        """Shape of the per-face array of normal components along one axis."""
        return tuple(n + 1 if b == axis else n for b, n in enumerate(self.cells))


def make_grid(dim, cells_per_axis, lengths):
    """Build a grid; reject dim outside {2, 3} and non-positive sizes."""
    if dim not in (2, 3):
        raise ConfigError("grid dim must be 2 or 3, got %r" % (dim,))
    cells = tuple(int(n) for n in cells_per_axis)
    lens = tuple(float(L) for L in lengths)
    if len(cells) != dim or len(lens) != dim:
        raise ConfigError("cells_per_axis and lengths must have %d entries" % dim)
    if any(n < 2 for n in cells):
        raise ConfigError("need at least 2 cells per axis, got %r" % (cells,))
    if any(L <= 0 for L in lens):
        raise ConfigError("lengths must be positive, got %r" % (lens,))
    spacing = tuple(L / n for L, n in zip(lens, cells))
    return Grid(dim=dim, cells=cells, lengths=lens, spacing=spacing)


class ScalarField:
    """Cell-centered scalar with a one-deep ghost layer per side."""

    __slots__ = ("grid", "data", "ghosts_valid")

    def __init__(self, grid, data=None, ghosts_valid=False):
        self.grid = grid
        if data is None:
            data = np.zeros(grid.ghosted_shape)
        if data.shape != grid.ghosted_shape:
            raise ValueError("ghosted array shape %r != %r" % (data.shape, grid.ghosted_shape))
        self.data = data
        self.ghosts_valid = ghosts_valid

    @classmethod
    def zeros(cls, grid):
        return cls(grid)

    @classmethod
    def from_interior(cls, grid, interior):
        f = cls(grid)
        f.interior[...] = interior
        return f

    @property
    def interior(self):
        return self.data[self.grid.core]

    def copy(self):
        return ScalarField(self.grid, self.data.copy(), self.ghosts_valid)

    def set_interior(self, values):
        self.interior[...] = values
        self.ghosts_valid = False

    def fill_ghosts_mirror(self):
        """Homogeneous-Neumann closure: ghost = adjacent interior value."""
        g = self.grid
        for axis, side in g.boundary_slabs():
            self.data[g.ghost_slab(axis, side)] = self.data[g.edge_slab(axis, side)]
        self.ghosts_valid = True

    def fill_ghosts_dirichlet(self, value):
        """Linear extrapolation through the face value: ghost = 2*value - interior."""
        g = self.grid
        for axis, side in g.boundary_slabs():
            self.data[g.ghost_slab(axis, side)] = 2.0 * value - self.data[g.edge_slab(axis, side)]
        self.ghosts_valid = True

    def check_finite(self, name="field"):
        if not np.all(np.isfinite(self.data[self.grid.core])):
            raise InvariantViolation("%s contains non-finite interior values" % name)


class BoundaryData:
    """Applied potential data, one value per boundary face.

    Per-species Dirichlet levels live in SpeciesSpec; this holds only the
    Robin data sampled at boundary-face centers.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        self.grid = grid
        self.values = {}
        for axis, side in grid.boundary_slabs():
            v = np.asarray(values[(axis, side)], dtype=float)
            want = grid.slab_shape(axis)
            if v.shape != want:
                v = np.broadcast_to(v, want).copy()
            if not np.all(np.isfinite(v)):
                raise InvariantViolation("boundary data not finite on axis %d side %d" % (axis, side))
            self.values[(axis, side)] = v

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, {k: np.full(grid.slab_shape(k[0]), float(value))
                          for k in grid.boundary_slabs()})

    @classmethod
    def from_function(cls, grid, fn):
        """Sample fn(x, y[, z]) at boundary-face centers."""
        vals = {}
        for axis, side in grid.boundary_slabs():
            coords = grid.slab_center_coords(axis, side)
            vals[(axis, side)] = np.broadcast_to(fn(*coords), grid.slab_shape(axis)).copy()
        return cls(grid, vals)

    def __getitem__(self, key):
        return self.values[key]


@dataclass(frozen=True)
class SpeciesSpec:
    """One ionic species: valence, diffusivity, wall behavior, initial profile."""

    valence: float
    diffusivity: float
    bc: str                      # "blocking" or "dirichlet"
    gamma: float = None          # Dirichlet wall concentration (bc == "dirichlet")
    initial_profile: dict = dc_field(default_factory=lambda: {"profile": "uniform", "value": 1.0})

    def __post_init__(self):
        if self.diffusivity <= 0:
            raise ConfigError("diffusivity must be > 0 (got %r)" % (self.diffusivity,))
        if self.bc not in ("blocking", "dirichlet"):
            raise ConfigError("unknown species bc %r (use 'blocking' or 'dirichlet')" % (self.bc,))
        if self.bc == "dirichlet":
            if self.gamma is None or self.gamma <= 0:
                raise ConfigError(
                    "selective (dirichlet) wall concentration must be > 0; "
                    "got gamma=%r" % (self.gamma,))


@dataclass(frozen=True)
class PhysicalParams:
    """Rescaled physical constants and the fluid-model selector."""

    epsilon: float   # rescaled permittivity
    K: float         # electric coupling constant
    nu: float        # kinematic viscosity
    tau: float       # double-layer capacitance in the Robin closure
    fluid_model: str = "NPS"   # "NPNS", "NPS", or "Frozen"

    def __post_init__(self):
        for name in ("epsilon", "K", "nu", "tau"):
            if getattr(self, name) <= 0:
                reason = ""
                if name == "tau":
                    reason = " (the Robin potential closure loses definiteness at tau <= 0)"
                raise ConfigError("%s must be strictly positive%s" % (name, reason))
        if self.fluid_model not in ("NPNS", "NPS", "Frozen"):
            raise ConfigError("fluid_model must be one of NPNS, NPS, Frozen")


class StaggeredVectorField:
    """MAC vector field: one normal component per cell face, per axis.

    Component a has the interior shape with cells[a]+1 entries along axis a;
    the first and last layers along that axis are the wall faces, which stay
    exactly zero while the no-slip flag is set.
    """

    __slots__ = ("grid", "components", "noslip")

    def __init__(self, grid, components=None, noslip=True):
        self.grid = grid
        if components is None:
            components = [np.zeros(grid.face_shape(a)) for a in range(grid.dim)]
        self.components = components
        self.noslip = noslip
        if noslip:
            self.enforce_noslip()

    @classmethod
    def zeros(cls, grid):
        return cls(grid)

    def copy(self):
        return StaggeredVectorField(self.grid, [c.copy() for c in self.components], self.noslip)

    def wall_slab(self, axis, side):
        idx = [slice(None)] * self.grid.dim
        idx[axis] = 0 if side == 0 else -1
        return tuple(idx)

    def interior_faces(self, axis):
        """Slices selecting the non-wall faces of component `axis`."""
        idx = [slice(None)] * self.grid.dim
        idx[axis] = slice(1, -1)
        return tuple(idx)

    def enforce_noslip(self):
        for a in range(self.grid.dim):
            for side in (0, 1):
                self.components[a][self.wall_slab(a, side)] = 0.0

    def divergence(self):
        """Discrete divergence, one value per interior cell."""
        g = self.grid
        div = np.zeros(g.interior_shape)
        for a in range(g.dim):
            div += np.diff(self.components[a], axis=a) / g.spacing[a]
        return div

    def max_abs_divergence(self):
        d = self.divergence()
        return float(np.max(np.abs(d))) if d.size else 0.0


@dataclass
class SimState:
    """All evolving fields plus the simulation clock."""

    grid: Grid
    concentrations: list
    potential: ScalarField
    velocity: StaggeredVectorField
    pressure: ScalarField
    t: float = 0.0
    step: int = 0

    def copy(self):
        return SimState(
            grid=self.grid,
            concentrations=[c.copy() for c in self.concentrations],
            potential=self.potential.copy(),
            velocity=self.velocity.copy(),
            pressure=self.pressure.copy(),
            t=self.t,
            step=self.step,
        )

    def validate(self, div_tol=1e-10):
        for i, c in enumerate(self.concentrations):
            m = float(np.min(c.interior))
            if m < 0.0:
                raise InvariantViolation(
                    "species %d has negative concentration %.3e" % (i, m))
        d = self.velocity.max_abs_divergence()
        if d > div_tol:
            raise InvariantViolation(
                "velocity divergence %.3e exceeds tolerance %.3e" % (d, div_tol))


def integrate_cells(f):
    """Discrete volume integral: sum of interior values times cell volume."""
    return float(np.sum(f.interior) * f.grid.cell_volume)


def integrate_boundary(g_values, grid=None):
    """Discrete surface integral of per-boundary-face values.

    Accepts a BoundaryData or a {(axis, side): array} mapping.
    """
    if isinstance(g_values, BoundaryData):
        grid = g_values.grid
        items = g_values.values.items()
    else:
        items = g_values.items()
    total = 0.0
    for (axis, _side), vals in items:
        total += float(np.sum(vals)) * grid.face_area(axis)
    return total


def gradient_squared_norm(f, bc_closure=None):
    """Face-difference approximation of the Dirichlet energy of a scalar.

    Interior face differences carry the full cell volume; boundary-face
    differences (interior minus ghost, over one spacing) carry half, which
    makes the quadrature a composite trapezoid along each axis.  Ghosts must
    be populated, either beforehand or by the supplied closure.
    """
    if bc_closure is not None:
        bc_closure(f)
    if not f.ghosts_valid:
        raise InvariantViolation("gradient_squared_norm needs a populated ghost layer")
    g = f.grid
    vol = g.cell_volume
    total = 0.0
    inner = f.interior
    for axis in range(g.dim):
        h = g.spacing[axis]
        d = np.diff(inner, axis=axis) / h
        total += float(np.sum(d * d)) * vol
        for side in (0, 1):
            ghost = f.data[g.ghost_slab(axis, side)]
            edge = f.data[g.edge_slab(axis, side)]
            db = (edge - ghost) / h
            total += float(np.sum(db * db)) * (0.5 * vol)
    return total
