"""Dense ground-truth solve of the Robin-closed potential system.

The matrix is assembled cell by cell with explicit loops, independently of
the solver's stencil code, and factorized directly.  Capped at 4096
unknowns; intended for cross-checks, not production.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..fields import ScalarField


def _alpha_beta(tau, h):
    denom = 2.0 + tau * h
    return (2.0 - tau * h) / denom, 2.0 * h / denom


def dense_poisson_matrix(problem):
    """Assemble (A, b) for the eliminated interior system, row per cell."""
    grid = problem.rho.grid
    n_unknowns = grid.cell_count
    if n_unknowns > 4096:
        raise ConfigError("dense oracle capped at 4096 unknowns, got %d" % n_unknowns)
    shape = grid.interior_shape
    eps, tau = problem.epsilon, problem.tau
    A = np.zeros((n_unknowns, n_unknowns))
    b = np.zeros(n_unknowns)
    rho = problem.rho.interior
    for cell in np.ndindex(*shape):
        row = int(np.ravel_multi_index(cell, shape))
        b[row] = rho[cell]
        diag = 0.0
        for axis in range(grid.dim):
            h = grid.spacing[axis]
            alpha, beta = _alpha_beta(tau, h)
            for step in (-1, +1):
                nb = list(cell)
                nb[axis] += step
                if 0 <= nb[axis] < shape[axis]:
                    col = int(np.ravel_multi_index(tuple(nb), shape))
                    A[row, col] -= eps / h ** 2
                    diag += eps / h ** 2
                else:
                    side = 0 if step == -1 else 1
                    diag += eps * (1.0 - alpha) / h ** 2
                    xi_slab = problem.xi[(axis, side)]
                    face = tuple(c for a, c in enumerate(cell) if a != axis)
                    b[row] += eps * beta * float(xi_slab[face]) / h ** 2
        A[row, row] = diag
    return A, b


def dense_poisson_oracle(problem):
    """Direct factorization of the dense system; returns phi as a field."""
    grid = problem.rho.grid
    A, b = dense_poisson_matrix(problem)
    x = np.linalg.solve(A, b)
    phi = ScalarField(grid)
    phi.interior[...] = x.reshape(grid.interior_shape)
    from ..poisson import fill_robin_ghosts
    fill_robin_ghosts(phi, problem.tau, problem.xi)
    return phi
