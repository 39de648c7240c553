"""Hybrid model: 1D large vessels, homogenised capillary continuum and tissue continuum.

Unknowns are ordered ``[free large-vessel nodes, p_cap cells, p_t cells,
P_j]`` where ``P_j`` is an auxiliary unknown per REV holding the volume
average of ``p_cap`` over that REV. Large-vessel terminals inside the domain
exchange ``alpha_v (p_k - P_j)`` with the capillary continuum of their REV,
spread uniformly over the REV cells; capillaries and tissue exchange
``rho_int S_j L_cap / |REV_j| (p_t - p_cap + oncotic_gap)`` per unit volume.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .darcy import DarcyProblem, boundary_fluxes, darcy_triplets
from .exceptions import ModelDefinitionError, SingularSystemError
from .linalg import TripletBuilder, solve
from .network import large_vessel_terminals, split_by_threshold
from .params import Numerics, PhysicalParams
from .upscaling import capillary_boundary_field, compute_rev_coefficients
from .vgm import edge_flux, graph_laplacian_triplets, network_conductance, _components


def coupling_coefficient(R_k, alpha, Kv_bar, mu_up, L_j, rho_bl=PhysicalParams().rho_bl):
    """Terminal-to-continuum conductance ``rho_bl pi R_k^2 alpha Kv_bar / (mu_up L_j)``."""
    return rho_bl * np.pi * np.asarray(R_k) ** 2 * alpha * np.asarray(Kv_bar) / (
        np.asarray(mu_up) * np.asarray(L_j))


@dataclass
class HybridSetup:
    """Everything the hybrid model needs that does not depend on ``alpha``."""

    net: object
    revs: object
    params: PhysicalParams = field(default_factory=PhysicalParams)
    numerics: Numerics = field(default_factory=Numerics)
    large_ids: frozenset | None = None
    capillary_ids: frozenset | None = None
    coefficients: object = None
    boundary_field: object = None

    def __post_init__(self):
        if self.large_ids is None or self.capillary_ids is None:
            large, cap = split_by_threshold(self.net, self.params.R_T)
            self.large_ids = large if self.large_ids is None else self.large_ids
            self.capillary_ids = cap if self.capillary_ids is None else self.capillary_ids
        if self.coefficients is None:
            self.coefficients = compute_rev_coefficients(
                self.net, self.revs, self.capillary_ids, self.params, self.numerics)
        if self.boundary_field is None:
            self.boundary_field = capillary_boundary_field(
                self.net, self.revs, self.capillary_ids, self.numerics.eps_d)
        net = self.net
        lmask = np.isin(net.segment_ids, np.fromiter(self.large_ids, np.int64))
        self.large_mask = lmask
        self.large_nodes = np.flatnonzero(np.bincount(net.conn[lmask].ravel(),
                                                      minlength=net.n_nodes) > 0)
        grid = self.revs.grid
        self.terminals = large_vessel_terminals(net, self.large_ids, (grid.lo, grid.hi))
        self.terminal_rev = self.revs.rev_of_point(net.positions[self.terminals])
        if np.any(self.terminal_rev < 0):
            raise ModelDefinitionError("a large-vessel terminal lies outside every REV")
        # radius of the single large segment ending at each terminal
        R = np.zeros(net.n_nodes)
        for end in (0, 1):
            np.maximum.at(R, net.conn[lmask, end], net.radius[lmask])
        self.terminal_radius = R[self.terminals]
        self.large_conductance = np.where(lmask, network_conductance(net, self.params), 0.0)

    @property
    def grid(self):
        return self.revs.grid

    def terminal_coefficients(self, alpha):
        c = self.coefficients
        j = self.terminal_rev
        return coupling_coefficient(self.terminal_radius, alpha, c.Kv_bar[j], c.mu_up[j],
                                    c.L_min[j], self.params.rho_bl)

    def capillary_problem(self):
        c = self.coefficients
        rev = self.revs.rev_of_cell()
        mob = self.params.rho_bl * c.K[rev] / c.mu_up[rev][:, None]
        return DarcyProblem(self.grid, mob, self.boundary_field.as_dirichlet())

    def tissue_problem(self):
        p = self.params
        return DarcyProblem(self.grid, p.rho_int * p.K_t / p.mu_int)

    def exchange_density(self):
        """``rho_int S_j L_cap / |REV_j|`` per cell [kg/(Pa s m^3)]."""
        c = self.coefficients
        rev = self.revs.rev_of_cell()
        return self.params.rho_int * c.S[rev] * self.params.L_cap / c.volume[rev]


@dataclass
class HybridSystem:
    A: object
    b: np.ndarray
    layout: dict
    node_to_unknown: np.ndarray
    terminal_coef: np.ndarray
    builder: TripletBuilder

    def coupling_sums(self):
        return self.builder.family_sums()


def assemble_hybrid(setup, alpha):
    """Block system of the hybrid model for coupling parameter ``alpha``."""
    if not 0.0 <= alpha:
        raise ValueError("alpha must be non-negative")
    net, grid = setup.net, setup.grid
    nc = grid.n_cells
    fixed = net.boundary_pressure
    lconn = net.conn[setup.large_mask]
    coef = setup.terminal_coefficients(alpha)

    free = np.zeros(net.n_nodes, dtype=bool)
    free[setup.large_nodes] = True
    free &= ~net.is_boundary
    if lconn.size:
        ncomp, labels = _components(net.n_nodes, lconn)
        anchored = np.zeros(ncomp, dtype=bool)
        anchored[labels[setup.large_nodes[net.is_boundary[setup.large_nodes]]]] = True
        anchored[labels[setup.terminals[coef > 0]]] = True
        if not anchored[labels[setup.large_nodes]].all():
            raise SingularSystemError("a large-vessel component has neither Dirichlet data "
                                      "nor an active terminal coupling")
    unknowns = np.flatnonzero(free)
    nv = len(unknowns)
    node_to_unknown = -np.ones(net.n_nodes, dtype=np.int64)
    node_to_unknown[unknowns] = np.arange(nv)
    off_cap, off_t, off_aux = nv, nv + nc, nv + 2 * nc
    n_rev = setup.revs.n_rev
    n = off_aux + n_rev
    builder = TripletBuilder(n)
    rhs = np.zeros(n)

    graph_laplacian_triplets(builder, lconn, setup.large_conductance[setup.large_mask],
                             node_to_unknown, fixed, rhs)
    darcy_triplets(builder, setup.capillary_problem(), off_cap, rhs)
    darcy_triplets(builder, setup.tissue_problem(), off_t, rhs)

    rev = setup.revs.rev_of_cell()
    V = grid.cell_volume
    vol = setup.coefficients.volume

    # auxiliary rows: P_j - sum_c (V_c / |REV_j|) p_cap_c = 0, scaled by the
    # mean cell transmissibility so all rows share one magnitude
    scale = float(np.mean(setup.capillary_problem().mobility)) * float(np.mean(grid.h))
    cells = np.arange(nc)
    builder.add(off_aux + np.arange(n_rev), off_aux + np.arange(n_rev), scale)
    builder.add(off_aux + rev, off_cap + cells, -scale * V / vol[rev])

    # terminal coupling, split into one piece per REV cell
    for t, k in enumerate(setup.terminals):
        if coef[t] == 0:
            continue
        j = setup.terminal_rev[t]
        rc = np.flatnonzero(rev == j)
        piece = np.full(len(rc), coef[t] * V / vol[j])
        row_v = np.full(len(rc), node_to_unknown[k])
        builder.add_coupling("terminal", row_v, off_cap + rc, row_v, piece)
        builder.add_coupling("terminal", off_cap + rc, row_v, np.full(len(rc), off_aux + j), piece)

    # capillary-tissue exchange, cell by cell
    beta = setup.exchange_density() * V
    use = beta > 0
    cu = cells[use]
    builder.add_coupling("exchange", off_t + cu, off_cap + cu, off_t + cu, beta[use])
    builder.add_coupling("exchange", off_cap + cu, off_t + cu, off_cap + cu, beta[use])
    builder.add_rhs_coupling("exchange", rhs, off_cap + cu, off_t + cu,
                             beta[use] * setup.params.oncotic_gap)

    layout = {"v": (0, nv), "cap": (off_cap, off_cap + nc), "t": (off_t, off_t + nc),
              "aux": (off_aux, n)}
    return HybridSystem(builder.tocsr(), rhs, layout, node_to_unknown, coef, builder)


@dataclass
class HybridSolution:
    alpha: float
    p_v: np.ndarray       # per network node (nan off the large-vessel subgraph)
    p_cap: np.ndarray
    p_t: np.ndarray
    p_rev: np.ndarray     # auxiliary REV averages of p_cap
    terminal_flux: np.ndarray
    residual: float
    audit: dict
    system: HybridSystem | None = None


def solve_hybrid(setup, alpha, keep_system=False):
    """Solve the hybrid model and audit mass conservation of every block."""
    system = assemble_hybrid(setup, alpha)
    num = setup.numerics
    x, info = solve(system.A, system.b, tol=num.tol, max_iter=num.max_iter,
                    preconditioner=num.preconditioner, method=num.method, return_info=True)
    lay = system.layout
    net = setup.net
    p_v = np.full(net.n_nodes, np.nan)
    bl = setup.large_nodes[net.is_boundary[setup.large_nodes]]
    p_v[bl] = net.boundary_pressure[bl]
    free = system.node_to_unknown >= 0
    p_v[free] = x[system.node_to_unknown[free]]
    p_cap = x[slice(*lay["cap"])]
    p_t = x[slice(*lay["t"])]
    p_rev = x[slice(*lay["aux"])]
    transfer = system.terminal_coef * (p_v[setup.terminals] - p_rev[setup.terminal_rev])
    audit = hybrid_audit(setup, p_v, p_cap, p_t, transfer)
    return HybridSolution(alpha, p_v, p_cap, p_t, p_rev, transfer, info.residual, audit,
                          system if keep_system else None)


def large_vessel_boundary_flux(setup, p_v):
    """Flux into the large-vessel network at each of its boundary nodes."""
    net = setup.net
    f = np.where(setup.large_mask, edge_flux(net, np.nan_to_num(p_v), setup.large_conductance), 0.0)
    out = np.zeros(net.n_nodes)
    np.add.at(out, net.conn[:, 0], f)
    np.add.at(out, net.conn[:, 1], -f)
    mask = np.zeros(net.n_nodes, dtype=bool)
    mask[setup.large_nodes] = True
    return np.where(mask & net.is_boundary, out, 0.0)


def hybrid_audit(setup, p_v, p_cap, p_t, transfer):
    inflow = large_vessel_boundary_flux(setup, p_v)
    lv_in = math.fsum(np.maximum(inflow, 0.0).tolist())
    lv_out = math.fsum(np.maximum(-inflow, 0.0).tolist())
    to_cap = math.fsum(transfer.tolist())
    cap_bnd = boundary_fluxes(setup.capillary_problem(), p_cap)
    cap_in = math.fsum(np.concatenate([f for _, f in cap_bnd.values()]).tolist())
    beta = setup.exchange_density() * setup.grid.cell_volume
    to_tissue = math.fsum((beta * (p_cap - p_t - setup.params.oncotic_gap)).tolist())
    scale = max(lv_in, lv_out, abs(to_cap), max(abs(f).max() for _, f in cap_bnd.values()))
    imb = {
        "network": abs(lv_in - lv_out - to_cap),
        "capillary": abs(cap_in + to_cap - to_tissue),
        "tissue": abs(to_tissue),
    }
    return {"lv_inflow": lv_in, "lv_outflow": lv_out, "terminal_transfer": to_cap,
            "capillary_boundary_net": cap_in, "capillary_to_tissue": to_tissue,
            "max_flux": scale, **{f"imbalance_{k}": v for k, v in imb.items()},
            "relative_imbalance": max(imb.values()) / scale if scale > 0 else 0.0}
