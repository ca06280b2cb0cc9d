"""Empirical wall-trace inequality checks on refined grids.

For sample fields f the raw ratio
    ||f||_{L^p(wall)} / ( ||grad f||^{1/p} ||f||_{L^{2(p-1)}}^{(p-1)/p} + ||f||_{L^p} )
is computed with unit constants.  The falsifiable discrete claim is that the
max ratio per family stabilizes under refinement, witnessing a finite
embedding constant; no constant is estimated.  Boundary norms use
face-center values, interior norms cell quadrature, gradients interior
face differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..errors import ConfigError
from ..fields import make_grid

FAMILIES = ("fourier", "boundary_peaked")


@dataclass
class TraceCheckReport:
    family: str
    p: float
    levels: list
    max_ratios: list
    ratios: list             # per level, the ratio of every sample
    samples_per_level: int
    stabilization: float     # relative change of max ratio, last two levels
    passed: bool
    details: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not (2.0 <= self.p <= 4.0):
            raise ConfigError("trace check requires p in [2, 4]")

    def table(self):
        lines = ["trace family %s, p=%g: stabilization %.3f -> %s"
                 % (self.family, self.p, self.stabilization,
                    "pass" if self.passed else "FAIL")]
        for n, r in zip(self.levels, self.max_ratios):
            lines.append("  n=%4d   max ratio %.6f" % (n, r))
        return "\n".join(lines)


def _fourier_samples(seed, count, kmax=4):
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        coeffs = {}
        for k in range(kmax + 1):
            for l in range(kmax + 1):
                coeffs[(k, l)] = rng.uniform(-1.0, 1.0) / (1.0 + k * k + l * l)

        def f(x, y, coeffs=coeffs):
            out = np.zeros(np.broadcast(x, y).shape)
            for (k, l), a in coeffs.items():
                out = out + a * np.cos(k * math.pi * x) * np.cos(l * math.pi * y)
            return out

        samples.append(f)
    return samples


def _peaked_samples(widths=(0.2, 0.1, 0.05)):
    samples = []
    for w in widths:
        def f(x, y, w=w):
            d = np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))
            return np.exp(-d / w)

        samples.append(f)
    return samples


def sample_family(family, seed=0, count=12):
    if family == "fourier":
        return _fourier_samples(seed, count)
    if family == "boundary_peaked":
        return _peaked_samples()
    raise ConfigError("unknown sample family %r; available: %s"
                      % (family, ", ".join(FAMILIES)))


def trace_ratio(grid, f, p):
    """Raw LHS/RHS ratio for one analytic sample on one grid; 0 for f == 0."""
    xc = grid.centers_broadcast(0)
    yc = grid.centers_broadcast(1)
    fc = np.broadcast_to(f(xc, yc), grid.interior_shape)
    vol = grid.cell_volume

    boundary_p = 0.0
    for axis, side in grid.boundary_slabs():
        cx, cy = grid.slab_center_coords(axis, side)
        fb = np.broadcast_to(f(cx, cy), grid.slab_shape(axis))
        boundary_p += float(np.sum(np.abs(fb) ** p)) * grid.face_area(axis)
    lhs = boundary_p ** (1.0 / p)

    grad_sq = 0.0
    for axis in range(grid.dim):
        d = np.diff(fc, axis=axis) / grid.spacing[axis]
        grad_sq += float(np.sum(d * d)) * vol
    grad_norm = math.sqrt(grad_sq)
    q = 2.0 * (p - 1.0)
    norm_q = float(np.sum(np.abs(fc) ** q) * vol) ** (1.0 / q)
    norm_p = float(np.sum(np.abs(fc) ** p) * vol) ** (1.0 / p)
    rhs = grad_norm ** (1.0 / p) * norm_q ** ((p - 1.0) / p) + norm_p
    if rhs == 0.0:
        return 0.0
    return lhs / rhs


def trace_inequality_check(levels=(16, 32, 64), family="fourier", p=2,
                           seed=0, samples=12):
    """Max ratio per refinement level; passes when the last two stabilize."""
    if not (2.0 <= p <= 4.0):
        raise ConfigError("trace check requires p in [2, 4]")
    fns = sample_family(family, seed=seed, count=samples)
    per_level = []
    max_ratios = []
    for n in levels:
        grid = make_grid(2, (n, n), (1.0, 1.0))
        ratios = [trace_ratio(grid, f, float(p)) for f in fns]
        per_level.append(ratios)
        max_ratios.append(max(ratios))
    a, b = max_ratios[-2], max_ratios[-1]
    stab = abs(b - a) / max(abs(a), 1e-300)
    return TraceCheckReport(
        family=family, p=float(p), levels=list(levels), max_ratios=max_ratios,
        ratios=per_level, samples_per_level=len(fns), stabilization=stab,
        passed=stab < 0.2, details={"seed": seed})
