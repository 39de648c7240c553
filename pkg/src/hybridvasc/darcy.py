"""Cell-centred finite volumes with two-point fluxes for diagonal-mobility Darcy problems.

Each cell row reads ``sum_faces T (p_c - p_nb) + reaction_c V p_c = source_c V``,
i.e. the row is the net outflow balance of the cell. Dirichlet faces couple
the cell to the face value through a half-cell transmissibility; faces
without a condition are no-flow.
"""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularSystemError
from .linalg import TripletBuilder, solve
from .params import Numerics


def harmonic_mean(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return 2.0 * a * b / (a + b)


def tpfa_transmissibility(mob_a, mob_b, area, h):
    """``area * harmonic_mean(mob_a, mob_b) / h`` for two cells a distance ``h`` apart."""
    return area * harmonic_mean(mob_a, mob_b) / h


@dataclass
class DarcyProblem:
    """Steady Darcy problem on a :class:`UniformGrid`.

    Parameters
    ----------
    grid : UniformGrid
    mobility : array_like
        ``(rho / mu) K`` per cell and axis, shape ``(n_cells, 3)``; a scalar or
        a length-3 vector is broadcast.
    dirichlet : dict
        Maps ``(axis, side)`` to the face values: a scalar, an array ordered
        like ``grid.boundary_cells(axis, side)``, or a callable of the face
        centre coordinates. Faces not listed are no-flow.
    reaction, source : array_like
        Per-unit-volume coefficients; scalars are broadcast.
    """

    grid: object
    mobility: np.ndarray
    dirichlet: dict = field(default_factory=dict)
    reaction: np.ndarray | float = 0.0
    source: np.ndarray | float = 0.0

    def __post_init__(self):
        n = self.grid.n_cells
        self.mobility = np.broadcast_to(np.asarray(self.mobility, dtype=float), (n, 3)).copy()
        self.reaction = np.broadcast_to(np.asarray(self.reaction, dtype=float), (n,)).copy()
        self.source = np.broadcast_to(np.asarray(self.source, dtype=float), (n,)).copy()
        if not np.all(self.mobility > 0):
            raise ValueError("mobility must be positive in every cell")
        for key in self.dirichlet:
            if key[0] not in (0, 1, 2) or key[1] not in (0, 1):
                raise ValueError(f"bad boundary face {key!r}")

    def face_values(self, axis, side):
        cells = self.grid.boundary_cells(axis, side)
        v = self.dirichlet[(axis, side)]
        if callable(v):
            v = v(self.grid.face_centers(axis, side, cells))
        return cells, np.broadcast_to(np.asarray(v, dtype=float), cells.shape)

    def check_solvable(self):
        if not self.dirichlet and not np.any(self.reaction > 0):
            raise SingularSystemError(
                "Darcy problem has neither Dirichlet faces nor positive reaction; "
                "pressure is defined only up to a constant")


def interior_faces(grid, axis):
    """Flat indices ``(lower, upper)`` of the cell pairs sharing a face normal to ``axis``."""
    i, j, k = grid.ijk()
    lower = np.flatnonzero(np.stack([i, j, k])[axis] < grid.shape[axis] - 1)
    step = (1, grid.shape[0], grid.shape[0] * grid.shape[1])[axis]
    return lower, lower + step


def interior_transmissibility(grid, mobility, axis):
    lower, upper = interior_faces(grid, axis)
    T = tpfa_transmissibility(mobility[lower, axis], mobility[upper, axis],
                              grid.face_areas[axis], grid.h[axis])
    return lower, upper, T


def boundary_transmissibility(grid, mobility, axis, cells):
    """Half-cell transmissibility ``2 A m / h`` from cell centre to boundary face."""
    return 2.0 * grid.face_areas[axis] * mobility[cells, axis] / grid.h[axis]


def darcy_triplets(builder, prob, offset=0, rhs=None):
    """Add the Darcy operator of ``prob`` to ``builder`` with unknowns shifted by ``offset``."""
    grid = prob.grid
    n = grid.n_cells
    rhs = np.zeros(n) if rhs is None else rhs
    for ax in range(3):
        lo, up, T = interior_transmissibility(grid, prob.mobility, ax)
        builder.add(offset + lo, offset + lo, T)
        builder.add(offset + up, offset + up, T)
        builder.add(offset + lo, offset + up, -T)
        builder.add(offset + up, offset + lo, -T)
    for (ax, side) in sorted(prob.dirichlet):
        cells, vals = prob.face_values(ax, side)
        T = boundary_transmissibility(grid, prob.mobility, ax, cells)
        builder.add(offset + cells, offset + cells, T)
        np.add.at(rhs, offset + cells, T * vals)
    V = grid.cell_volume
    cells = np.arange(n)
    has_r = prob.reaction != 0
    builder.add(offset + cells[has_r], offset + cells[has_r], prob.reaction[has_r] * V)
    rhs[offset:offset + n] += prob.source * V
    return rhs


def assemble_darcy(prob):
    """Sparse matrix and right-hand side of ``prob``; raises if singular."""
    prob.check_solvable()
    n = prob.grid.n_cells
    builder = TripletBuilder(n)
    rhs = darcy_triplets(builder, prob, 0, np.zeros(n))
    return builder.tocsr(), rhs


def solve_darcy(prob, numerics=Numerics()):
    A, b = assemble_darcy(prob)
    return solve(A, b, tol=numerics.tol, max_iter=numerics.max_iter,
                 preconditioner=numerics.preconditioner, method=numerics.method)


def face_flux(prob, p, cell, axis, side):
    """Flux [kg/s] into ``cell`` through its face ``(axis, side)``.

    For faces on the domain boundary this is positive into the domain; no-flow
    faces return 0.
    """
    grid = prob.grid
    idx = [int(v) for v in grid.ijk(int(cell))]
    n = grid.shape[axis]
    nb = list(idx)
    nb[axis] += 1 if side == 1 else -1
    if 0 <= nb[axis] < n:
        other = int(grid.flat(*nb))
        T = tpfa_transmissibility(prob.mobility[cell, axis], prob.mobility[other, axis],
                                  grid.face_areas[axis], grid.h[axis])
        return float(T * (p[other] - p[cell]))
    if (axis, side) not in prob.dirichlet:
        return 0.0
    cells, vals = prob.face_values(axis, side)
    k = int(np.searchsorted(cells, cell))
    T = boundary_transmissibility(grid, prob.mobility, axis, np.array([cell]))[0]
    return float(T * (vals[k] - p[cell]))


def boundary_fluxes(prob, p):
    """Per-face inflow arrays ``{(axis, side): (cells, flux)}`` over the Dirichlet faces."""
    out = {}
    for (ax, side) in sorted(prob.dirichlet):
        cells, vals = prob.face_values(ax, side)
        T = boundary_transmissibility(prob.grid, prob.mobility, ax, cells)
        out[(ax, side)] = (cells, T * (vals - p[cells]))
    return out


def global_balance(prob, p):
    """Boundary inflow + sources - reaction uptake; zero for a converged solve."""
    inflow = sum(float(np.sum(f)) for _, f in boundary_fluxes(prob, p).values())
    V = prob.grid.cell_volume
    return inflow + float(np.sum(prob.source) * V) - float(np.sum(prob.reaction * p) * V)
