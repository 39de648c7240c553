"""Boundary mass fluxes, REV net fluxes, exchange totals, REV pressures and objectives.

All fluxes are in kg/s. Node-level fluxes are rectified per node; REV-level
net fluxes are summed first and rectified afterwards.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .darcy import boundary_fluxes
from .fully_discrete import station_exchange
from .grid import clipped_lengths
from .hybrid import large_vessel_boundary_flux
from .vgm import edge_flux, network_conductance


def rectify(value):
    """``(value, max(value, 0), |min(value, 0)|)``."""
    v = float(value)
    return v, max(v, 0.0), max(-v, 0.0)


def _sum(values):
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


@dataclass
class FluxReport:
    """Boundary and exchange mass fluxes of one model solution [kg/s].

    ``rev_cap`` and ``rev_cap_t`` map REV id to ``(NF, NF_in, NF_out)`` for
    the capillary boundary flux and the tissue-to-capillary exchange.
    """

    provenance: str
    MF_LV_in: float
    MF_LV_out: float
    MF_cap_in: float
    MF_cap_out: float
    MF_cap_t_in: float
    MF_cap_t_out: float
    MF_cap_t_net: float
    rev_cap: dict = field(default_factory=dict)
    rev_cap_t: dict = field(default_factory=dict)

    def totals(self):
        return {k: getattr(self, k) for k in ("MF_LV_in", "MF_LV_out", "MF_cap_in", "MF_cap_out",
                                              "MF_cap_t_in", "MF_cap_t_out", "MF_cap_t_net")}


# ---------------------------------------------------------------------------
# node and REV fluxes
# ---------------------------------------------------------------------------
def node_mass_flux(net, p_v, conductance, node):
    """Signed flux into the network at boundary node index ``node``, rectified.

    Returns ``(MF, MF_in, MF_out)``.
    """
    if not net.is_boundary[node]:
        raise ValueError(f"node {int(net.node_ids[node])} is not a boundary node")
    seg = np.flatnonzero((net.conn[:, 0] == node) | (net.conn[:, 1] == node))
    f = edge_flux(net, p_v, conductance)[seg]
    sign = np.where(net.conn[seg, 0] == node, 1.0, -1.0)
    return rectify(_sum(sign * f))


def boundary_node_fluxes(net, p_v, conductance, nodes):
    """Signed inflow at each of the given boundary node indices."""
    f = edge_flux(net, p_v, conductance)
    out = np.zeros(net.n_nodes)
    np.add.at(out, net.conn[:, 0], f)
    np.add.at(out, net.conn[:, 1], -f)
    return out[nodes]


def rev_boundary_cells(revs, rev_id):
    """``{(axis, side): cells}`` of the REV lying on each domain face it touches."""
    faces = revs.boundary_faces(rev_id)
    if not faces:
        raise ValueError(f"REV {rev_id} does not touch the domain boundary")
    cells = set(revs.rev_cells(rev_id).tolist())
    out = {}
    for ax, side in faces:
        bc = revs.grid.boundary_cells(ax, side)
        out[(ax, side)] = np.array([c for c in bc if c in cells], dtype=np.int64)
    return out


def rev_net_flux(prob, p_cap, revs, rev_id, _fluxes=None):
    """Net Darcy inflow through the REV's part of the domain boundary, rectified."""
    faces = rev_boundary_cells(revs, rev_id)
    fluxes = boundary_fluxes(prob, p_cap) if _fluxes is None else _fluxes
    total = []
    for key, cells in faces.items():
        if key not in fluxes:
            continue
        bc, f = fluxes[key]
        total.append(f[np.isin(bc, cells)])
    return rectify(_sum(np.concatenate(total)) if total else 0.0)


def fd_rev_capillary_flux(net, p_v, conductance, revs, rev_id, capillary_nodes):
    """Capillary boundary inflow of the network within REV ``rev_id``, rectified after summing."""
    if not revs.boundary_faces(rev_id):
        raise ValueError(f"REV {rev_id} does not touch the domain boundary")
    owner = revs.rev_of_point(net.positions[capillary_nodes])
    mine = capillary_nodes[owner == rev_id]
    return rectify(_sum(boundary_node_fluxes(net, p_v, conductance, mine)))


def _boundary_node_sets(net, large_mask):
    bnd = np.flatnonzero(net.is_boundary)
    lv = np.zeros(net.n_nodes, dtype=bool)
    lv[net.conn[large_mask].ravel()] = True
    return bnd[lv[bnd]], bnd[~lv[bnd]]


# ---------------------------------------------------------------------------
# capillary-tissue exchange
# ---------------------------------------------------------------------------
def cap_tissue_exchange_fd(fd_solution, revs, oncotic_gap):
    """Tissue-to-capillary exchange per REV from the assembled wall stations."""
    system = fd_solution.system
    n = revs.n_rev
    if system is None:
        return np.zeros(n)
    E = station_exchange(system, fd_solution.p_v, fd_solution.p_t, oncotic_gap)
    owner = revs.rev_of_point(system.stations.position)
    return np.array([-_sum(E[owner == j]) for j in range(n)])


def cap_tissue_exchange_hy(setup, p_cap, p_t):
    """Tissue-to-capillary exchange per REV, ``sum_c beta_c (p_t - p_cap + gap)``."""
    beta = setup.exchange_density() * setup.grid.cell_volume
    density = beta * (p_t - p_cap + setup.params.oncotic_gap)
    rev = setup.revs.rev_of_cell()
    return np.array([_sum(density[rev == j]) for j in range(setup.revs.n_rev)])


def _rectified_totals(per_rev):
    parts = [rectify(v) for v in per_rev]
    return (_sum([p[1] for p in parts]), _sum([p[2] for p in parts]), _sum(per_rev),
            {j: parts[j] for j in range(len(parts))})


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------
def fd_flux_report(prob, fd_solution, revs, large_ids):
    """Flux report of a fully-discrete solution on the REV partition ``revs``."""
    net = prob.net
    lmask = np.isin(net.segment_ids, np.fromiter(large_ids, np.int64))
    lv_nodes, cap_nodes = _boundary_node_sets(net, lmask)
    g = network_conductance(net, prob.params)
    lv = boundary_node_fluxes(net, fd_solution.p_v, g, lv_nodes)
    owner = revs.rev_of_point(net.positions[cap_nodes])
    capf = boundary_node_fluxes(net, fd_solution.p_v, g, cap_nodes)
    per_rev = np.array([_sum(capf[owner == j]) for j in range(revs.n_rev)])
    c_in, c_out, _, rev_cap = _rectified_totals(per_rev)
    ex = cap_tissue_exchange_fd(fd_solution, revs, prob.params.oncotic_gap)
    t_in, t_out, t_net, rev_t = _rectified_totals(ex)
    return FluxReport("FD", _sum(np.maximum(lv, 0)), _sum(np.maximum(-lv, 0)), c_in, c_out,
                      t_in, t_out, t_net, rev_cap, rev_t)


def hybrid_flux_report(setup, solution):
    """Flux report of a hybrid solution."""
    net = setup.net
    lv_nodes, _ = _boundary_node_sets(net, setup.large_mask)
    lv = large_vessel_boundary_flux(setup, solution.p_v)[lv_nodes]
    prob = setup.capillary_problem()
    fluxes = boundary_fluxes(prob, solution.p_cap)
    revs = setup.revs
    per_rev = np.zeros(revs.n_rev)
    for j in range(revs.n_rev):
        if revs.boundary_faces(j):
            per_rev[j] = rev_net_flux(prob, solution.p_cap, revs, j, fluxes)[0]
    c_in, c_out, _, rev_cap = _rectified_totals(per_rev)
    ex = cap_tissue_exchange_hy(setup, solution.p_cap, solution.p_t)
    t_in, t_out, t_net, rev_t = _rectified_totals(ex)
    return FluxReport("HY", _sum(np.maximum(lv, 0)), _sum(np.maximum(-lv, 0)), c_in, c_out,
                      t_in, t_out, t_net, rev_cap, rev_t)


# ---------------------------------------------------------------------------
# REV pressures
# ---------------------------------------------------------------------------
def relative_error(p_hy, p_fd):
    """``|p_hy - p_fd| / p_hy`` (the hybrid value is the reference)."""
    p_hy, p_fd = np.asarray(p_hy, dtype=float), np.asarray(p_fd, dtype=float)
    return np.abs(p_hy - p_fd) / p_hy


@dataclass
class RevPressureReport:
    p_cap_hy: np.ndarray
    p_t_hy: np.ndarray
    p_cap_fd: np.ndarray
    p_t_fd: np.ndarray

    @property
    def E_cap(self):
        return relative_error(self.p_cap_hy, self.p_cap_fd)

    @property
    def E_t(self):
        return relative_error(self.p_t_hy, self.p_t_fd)


def cell_means(values, revs):
    rev = revs.rev_of_cell()
    return np.array([float(np.mean(values[rev == j])) for j in range(revs.n_rev)])


def fd_capillary_average(net, p_v, revs, capillary_mask):
    """Length-weighted mean of the piecewise-linear vessel pressure over clipped capillaries."""
    a, b = net.conn[:, 0], net.conn[:, 1]
    out = np.zeros(revs.n_rev)
    for j, box in enumerate(revs.boxes):
        length, t0, t1 = clipped_lengths(net, box.lo, box.hi, capillary_mask, revs.grid.hi)
        m = length > 0
        if not m.any():
            out[j] = np.nan
            continue
        tm = 0.5 * (np.clip(t0[m], 0, 1) + np.clip(t1[m], 0, 1))
        pm = (1.0 - tm) * p_v[a[m]] + tm * p_v[b[m]]
        out[j] = _sum(pm * length[m]) / _sum(length[m])
    return out


def rev_pressures(hy_solution, fd_solution, setup):
    """REV-averaged pressures of both models on the hybrid REV partition."""
    revs = setup.revs
    cap = np.isin(setup.net.segment_ids, np.fromiter(setup.capillary_ids, np.int64))
    return RevPressureReport(
        p_cap_hy=cell_means(hy_solution.p_cap, revs),
        p_t_hy=cell_means(hy_solution.p_t, revs),
        p_cap_fd=fd_capillary_average(setup.net, fd_solution.p_v, revs, cap),
        p_t_fd=cell_means(fd_solution.p_t, revs),
    )


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------
_F1_KEYS = ("MF_LV_in", "MF_LV_out", "MF_cap_in", "MF_cap_out")


def objective_f1(hy, fd):
    """``sqrt(sum over LV/cap and in/out of (HY - FD)^2 / 2)``."""
    return math.hypot(*(getattr(hy, k) - getattr(fd, k) for k in _F1_KEYS)) / math.sqrt(2.0)


def objective_f2(hy, fd):
    """``|MF_LV_in(HY) - MF_LV_in(FD)| / sqrt(2)``."""
    return abs(hy.MF_LV_in - fd.MF_LV_in) / math.sqrt(2.0)
