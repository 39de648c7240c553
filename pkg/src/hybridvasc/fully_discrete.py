"""Monolithic 3D-1D model: tissue Darcy flow coupled to the full vessel network.

Unknowns are ordered ``[tissue cells, free network nodes]``. Each wall
station exchanges ``E = L_cap rho_int |surface| (p_v - pbar_t - oncotic_gap)``
with the tissue: ``+E`` leaves the owner node's balance and ``E`` is spread
as a source over the cells of the station's circle stencil.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .darcy import DarcyProblem, darcy_triplets
from .exceptions import SingularSystemError
from .linalg import TripletBuilder, solve
from .network import split_by_threshold
from .params import Numerics, PhysicalParams
from .vgm import (assemble_vgm, check_dirichlet_reachable, edge_flux, graph_laplacian_triplets,
                  network_conductance, solve_vgm, wall_stations)


# ---------------------------------------------------------------------------
# circle average
# ---------------------------------------------------------------------------
def orthonormal_frame(tangents):
    """Two unit vectors perpendicular to each tangent and to each other."""
    t = np.atleast_2d(tangents)
    # cross with the coordinate axis least aligned with t
    ref = np.zeros_like(t)
    ref[np.arange(len(t)), np.argmin(np.abs(t), axis=1)] = 1.0
    n1 = np.cross(t, ref)
    n1 /= np.linalg.norm(n1, axis=1)[:, None]
    n2 = np.cross(t, n1)
    return n1, n2


def circle_points(centers, tangents, radii, n_theta):
    """Sample points ``c + R (cos th n1 + sin th n2)``, shape ``(m, n_theta, 3)``."""
    n1, n2 = orthonormal_frame(tangents)
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    r = np.asarray(radii, dtype=float)[:, None, None]
    return (np.asarray(centers)[:, None, :]
            + r * (np.cos(th)[None, :, None] * n1[:, None, :]
                   + np.sin(th)[None, :, None] * n2[:, None, :]))


@dataclass(frozen=True)
class CircleAverageStencil:
    """Cells and weights of every station's circle samples, shape ``(m, k)``.

    Each sample contributes one column per cell it reads. Samples outside
    the domain carry weight 0 (and cell 0); the remaining weights of each
    station sum to one.
    """

    cells: np.ndarray
    weights: np.ndarray

    @property
    def n_stations(self):
        return self.cells.shape[0]


def build_circle_stencils(grid, centers, tangents, radii, n_theta=8, sampling="trilinear"):
    """Equal-weight circle quadrature of a cell field.

    With ``sampling="trilinear"`` every sample interpolates the cell-centred
    values; with ``"nearest"`` it takes its owning cell, and a sample on an
    interior face is shared by the cells on both sides. Samples outside the
    domain are dropped and the remaining weights renormalised.
    """
    if sampling not in ("trilinear", "nearest"):
        raise ValueError(f"unknown circle sampling {sampling!r}")
    pts = circle_points(centers, tangents, radii, n_theta)
    m = pts.shape[0]
    locate = grid.interpolation_weights if sampling == "trilinear" else grid.locate_shared
    cells, w = locate(pts.reshape(-1, 3))
    cells, w = cells.reshape(m, n_theta * 8), w.reshape(m, n_theta * 8)
    used = np.any(w > 0, axis=0)
    cells, w = cells[:, used], w[:, used]
    total = w.sum(axis=1)
    if np.any(total == 0):
        bad = np.flatnonzero(total == 0)
        raise ValueError("every circle sample lies outside the domain for stations "
                         f"{bad[:10].tolist()}")
    return CircleAverageStencil(cells, w / total[:, None])


def circle_average(field, stencil):
    """Weighted mean of cell values over each station's circle samples."""
    return np.sum(np.asarray(field)[stencil.cells] * stencil.weights, axis=1)


# ---------------------------------------------------------------------------
# problem, assembly, solve
# ---------------------------------------------------------------------------
@dataclass
class FdProblem:
    """Fully-discrete model setup.

    ``capillary_ids`` selects the permeable segments; by default every
    segment with radius below ``params.R_T``.
    """

    net: object
    grid: object
    params: PhysicalParams = field(default_factory=PhysicalParams)
    numerics: Numerics = field(default_factory=Numerics)
    capillary_ids: frozenset | None = None
    stations_per_half_edge: int = 1

    def __post_init__(self):
        if self.capillary_ids is None:
            self.capillary_ids = split_by_threshold(self.net, self.params.R_T)[1]

    @property
    def capillary_mask(self):
        ids = np.fromiter(self.capillary_ids, dtype=np.int64)
        return np.isin(self.net.segment_ids, ids)


@dataclass
class FdSystem:
    A: object
    b: np.ndarray
    n_cells: int
    node_to_unknown: np.ndarray
    unknowns: np.ndarray
    conductance: np.ndarray
    stations: object
    stencil: CircleAverageStencil
    exchange_coef: np.ndarray
    builder: TripletBuilder

    def coupling_sums(self):
        return self.builder.family_sums()


def tissue_problem(grid, params):
    mob = params.rho_int * params.K_t / params.mu_int
    return DarcyProblem(grid, mob)


def assemble_fd(prob):
    """Block system over ``[p_t cells, free p_v nodes]``."""
    net, grid, params = prob.net, prob.grid, prob.params
    fixed_mask = net.is_boundary
    check_dirichlet_reachable(net.n_nodes, net.conn, fixed_mask)
    nc = grid.n_cells
    unknowns = np.flatnonzero(~fixed_mask)
    node_to_unknown = -np.ones(net.n_nodes, dtype=np.int64)
    node_to_unknown[unknowns] = nc + np.arange(len(unknowns))
    n = nc + len(unknowns)
    builder = TripletBuilder(n)
    rhs = np.zeros(n)

    darcy_triplets(builder, tissue_problem(grid, params), 0, rhs)
    g = network_conductance(net, params)
    graph_laplacian_triplets(builder, net.conn, g, node_to_unknown, net.boundary_pressure, rhs)

    st = wall_stations(net, prob.capillary_mask, prob.stations_per_half_edge, fixed_mask)
    stencil = build_circle_stencils(grid, st.position, st.tangent, st.radius,
                                    prob.numerics.n_theta, prob.numerics.circle_sampling)
    coef = params.L_cap * params.rho_int * st.surface
    if st.n and params.L_cap > 0:
        _add_exchange(builder, rhs, st, stencil, coef, node_to_unknown, net.boundary_pressure,
                      params.oncotic_gap)
    return FdSystem(builder.tocsr(), rhs, nc, node_to_unknown, unknowns, g, st, stencil, coef,
                    builder)


def _add_exchange(builder, rhs, st, stencil, coef, node_to_unknown, fixed, gap):
    """Per (station, cell) pieces of the wall exchange, in exactly opposite pairs."""
    m, nth = stencil.cells.shape
    w_cell = stencil.weights
    keep = w_cell > 0
    s_idx = np.repeat(np.arange(m), nth).reshape(m, nth)[keep]
    cell = stencil.cells[keep]
    f = coef[s_idx] * w_cell[keep]          # share of station s spread to this cell
    row_v = node_to_unknown[st.owner[s_idx]]
    row_t = cell

    for nodes, w in ((st.owner, st.w_owner), (st.other, 1.0 - st.w_owner)):
        col = node_to_unknown[nodes[s_idx]]
        val = f * w[s_idx]
        free = col >= 0
        builder.add_coupling("exchange", row_v[free], row_t[free], col[free], val[free])
        d = ~free
        builder.add_rhs_coupling("exchange", rhs, row_t[d], row_v[d],
                                 val[d] * fixed[nodes[s_idx][d]])
    # tissue side of the circle average: every sample cell of the same station
    for q in range(nth):
        wq = w_cell[s_idx, q]
        use = wq > 0
        col = stencil.cells[s_idx, q]
        builder.add_coupling("exchange", row_t[use], row_v[use], col[use], f[use] * wq[use])
    builder.add_rhs_coupling("exchange", rhs, row_v, row_t, f * gap)


@dataclass
class FdSolution:
    p_v: np.ndarray
    p_t: np.ndarray
    system: FdSystem | None
    tissue_singular: bool
    residual: float
    audit: dict


def station_exchange(system, p_v, p_t, gap):
    """Wall filtration [kg/s] leaving the vessel at every station."""
    st = system.stations
    pv = st.w_owner * p_v[st.owner] + (1.0 - st.w_owner) * p_v[st.other]
    return system.exchange_coef * (pv - circle_average(p_t, system.stencil) - gap)


def boundary_node_flux(net, p_v, conductance):
    """Flux into the network at each boundary node (0 elsewhere)."""
    f = edge_flux(net, p_v, conductance)
    out = np.zeros(net.n_nodes)
    np.add.at(out, net.conn[:, 0], f)
    np.add.at(out, net.conn[:, 1], -f)
    return np.where(net.is_boundary, out, 0.0)


def solve_fd(prob):
    """Solve the coupled system and audit mass conservation.

    With ``L_cap = 0`` the tissue has no source and no Dirichlet data; the
    network is solved alone and ``p_t`` is returned as nan with
    ``tissue_singular`` set.
    """
    net, params, num = prob.net, prob.params, prob.numerics
    if params.L_cap == 0:
        sys_v = assemble_vgm(net, params)
        p_v, info = solve_vgm(sys_v, num, return_info=True)
        inflow = boundary_node_flux(net, p_v, sys_v.conductance)
        audit = _audit(inflow, np.zeros(0), edge_flux(net, p_v, sys_v.conductance))
        return FdSolution(p_v, np.full(prob.grid.n_cells, np.nan), None, True, info.residual, audit)
    system = assemble_fd(prob)
    x, info = solve(system.A, system.b, tol=num.tol, max_iter=num.max_iter,
                    preconditioner=num.preconditioner, method=num.method, return_info=True)
    p_t = x[:system.n_cells]
    p_v = net.boundary_pressure.copy()
    p_v[system.unknowns] = x[system.n_cells:]
    E = station_exchange(system, p_v, p_t, params.oncotic_gap)
    inflow = boundary_node_flux(net, p_v, system.conductance)
    audit = _audit(inflow, E, edge_flux(net, p_v, system.conductance))
    return FdSolution(p_v, p_t, system, False, info.residual, audit)


def _audit(inflow, exchange, edge_f):
    mf_in = math.fsum(np.maximum(inflow, 0.0).tolist())
    mf_out = math.fsum(np.maximum(-inflow, 0.0).tolist())
    net_ex = math.fsum(np.asarray(exchange).tolist())
    scale = max(float(np.max(np.abs(edge_f))) if len(edge_f) else 0.0, mf_in, mf_out)
    imbalance = abs(mf_in - mf_out - net_ex)
    return {"inflow": mf_in, "outflow": mf_out, "net_exchange": net_ex,
            "max_flux": scale, "imbalance": imbalance,
            "relative_imbalance": imbalance / scale if scale > 0 else 0.0}


def require_tissue(solution):
    if solution.tissue_singular:
        raise SingularSystemError("tissue pressure is undetermined without wall exchange")
