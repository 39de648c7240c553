"""Vascular graph model: nodal mass balance with Poiseuille edge fluxes.

Every non-Dirichlet node carries a pressure unknown and one balance row
``sum_j g_kj (p_k - p_j) + sum_stations E = 0`` where ``g_kj`` is the mass
conductance of the joining edge and ``E`` the optional wall filtration of the
node's half-edges. Dirichlet nodes are eliminated into the right-hand side.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .exceptions import ExperimentInfeasibleError, SingularSystemError
from .linalg import TripletBuilder, solve
from .params import Numerics, PhysicalParams
from .rheology import segment_viscosity


def edge_conductance(radius, length, mu, rho=1.0):
    """Poiseuille conductance ``rho pi R^4 / (8 mu L)``."""
    return rho * np.pi * np.asarray(radius) ** 4 / (8.0 * np.asarray(mu) * np.asarray(length))


def network_conductance(net, params=PhysicalParams(), volumetric=False):
    """Per-segment conductance with the in vivo viscosity of each segment."""
    mu = segment_viscosity(net.radius, params.rheology)
    rho = 1.0 if volumetric else params.rho_bl
    return edge_conductance(net.radius, net.length, mu, rho)


# ---------------------------------------------------------------------------
# wall stations
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class WallStations:
    """Quadrature stations on the half-edges of permeable segments.

    Station ``s`` lies on segment ``segment[s]`` inside the control volume
    of node ``owner[s]``; the linear interpolant of the vessel pressure there
    is ``w_owner * p[owner] + (1 - w_owner) * p[other]`` and the station
    represents the lateral surface ``surface[s]``.
    """

    segment: np.ndarray
    owner: np.ndarray
    other: np.ndarray
    w_owner: np.ndarray
    position: np.ndarray
    tangent: np.ndarray
    radius: np.ndarray
    surface: np.ndarray

    @property
    def n(self):
        return len(self.segment)


def wall_stations(net, segment_mask, per_half_edge=1, fixed_mask=None):
    """Stations at the midpoints of ``per_half_edge`` equal pieces of each half-edge.

    With ``fixed_mask`` (nodes without a balance row), stations on a half-edge
    of a fixed node are handed to the free node at the other end; segments
    with two fixed ends carry no station.
    """
    seg = np.flatnonzero(np.asarray(segment_mask, dtype=bool))
    if fixed_mask is not None:
        fixed_mask = np.asarray(fixed_mask, dtype=bool)
        seg = seg[~(fixed_mask[net.conn[seg, 0]] & fixed_mask[net.conn[seg, 1]])]
    q = int(per_half_edge)
    if q < 1:
        raise ValueError("need at least one station per half-edge")
    a, b = net.conn[seg, 0], net.conn[seg, 1]
    frac = (np.arange(q) + 0.5) / (2.0 * q)  # arc fraction from the owner node
    seg_s, own, oth, t = [], [], [], []
    for end, (o, x) in enumerate(((a, b), (b, a))):
        for f in frac:
            seg_s.append(seg)
            own.append(o)
            oth.append(x)
            t.append(np.full(len(seg), f if end == 0 else 1.0 - f))
    seg_s = np.concatenate(seg_s)
    own = np.concatenate(own)
    oth = np.concatenate(oth)
    t = np.concatenate(t)
    # stable order: by segment, then along the segment
    order = np.lexsort((t, seg_s))
    seg_s, own, oth, t = seg_s[order], own[order], oth[order], t[order]
    pa, pb = net.positions[net.conn[seg_s, 0]], net.positions[net.conn[seg_s, 1]]
    pos = pa + t[:, None] * (pb - pa)
    if fixed_mask is not None:
        swap = fixed_mask[own]
        own, oth = np.where(swap, oth, own), np.where(swap, own, oth)
    dist_from_owner = np.where(own == net.conn[seg_s, 0], t, 1.0 - t)
    R = net.radius[seg_s]
    L = net.length[seg_s]
    return WallStations(
        segment=seg_s, owner=own, other=oth, w_owner=1.0 - dist_from_owner,
        position=pos, tangent=net.tangents[seg_s], radius=R,
        surface=2.0 * np.pi * R * L / (2.0 * q),
    )


@dataclass(frozen=True)
class WallExchangeSpec:
    """Wall filtration against a prescribed tissue pressure at each station."""

    stations: WallStations
    tissue_pressure: np.ndarray
    L_cap: float
    rho_int: float
    oncotic_gap: float

    @property
    def coefficient(self):
        return self.L_cap * self.rho_int * self.stations.surface


def wall_flux(spec, p):
    """Filtration [kg/s] out of the vessel at each station for node pressures ``p``."""
    st = spec.stations
    pv = st.w_owner * p[st.owner] + (1.0 - st.w_owner) * p[st.other]
    return spec.coefficient * (pv - spec.tissue_pressure - spec.oncotic_gap)


# ---------------------------------------------------------------------------
# assembly and solve
# ---------------------------------------------------------------------------
@dataclass
class VgmSystem:
    A: sp.csr_matrix
    b: np.ndarray
    unknowns: np.ndarray          # node indices carrying an unknown
    node_to_unknown: np.ndarray   # -1 for Dirichlet / inactive nodes
    fixed: np.ndarray             # Dirichlet pressures (nan elsewhere)
    conductance: np.ndarray       # per segment (0 for inactive)
    active: np.ndarray            # per-segment mask
    wall: WallExchangeSpec | None = None


def graph_laplacian_triplets(builder, conn, g, node_to_unknown, fixed, rhs):
    """Add edge balance terms ``g (p_k - p_j)`` to the rows of unknown nodes."""
    for k, j in ((0, 1), (1, 0)):
        rk = node_to_unknown[conn[:, k]]
        rj = node_to_unknown[conn[:, j]]
        ok = rk >= 0
        builder.add(rk[ok], rk[ok], g[ok])
        both = ok & (rj >= 0)
        builder.add(rk[both], rj[both], -g[both])
        dir_ = ok & (rj < 0)
        np.add.at(rhs, rk[dir_], g[dir_] * fixed[conn[dir_, j]])


def check_dirichlet_reachable(n_nodes, conn, fixed_mask):
    """Raise if a connected component carries no Dirichlet node."""
    ncomp, labels = _components(n_nodes, conn)
    used = np.zeros(n_nodes, dtype=bool)
    used[conn.ravel()] = True
    has = np.zeros(ncomp, dtype=bool)
    has[labels[fixed_mask & used]] = True
    bad = np.unique(labels[used & ~has[labels]])
    if bad.size:
        raise SingularSystemError(
            f"{bad.size} network component(s) have no Dirichlet node; pressure is undetermined")
    return labels


def _components(n_nodes, conn):
    g = sp.coo_matrix((np.ones(len(conn)), (conn[:, 0], conn[:, 1])), shape=(n_nodes, n_nodes))
    return connected_components(g, directed=False)


def assemble_vgm(net, params=PhysicalParams(), active_segments=None, wall_exchange=None,
                 fixed=None):
    """Assemble the nodal balance system of the active subgraph.

    Parameters
    ----------
    net : VascularNetwork
    params : PhysicalParams
    active_segments : iterable of segment ids, optional
        Defaults to every segment.
    wall_exchange : WallExchangeSpec, optional
        Adds the wall filtration of each station to its owner node row.
    fixed : ndarray, optional
        Dirichlet pressure per node (nan = free); defaults to the boundary
        pressures stored on the network.
    """
    if active_segments is None:
        active = np.ones(net.n_segments, dtype=bool)
    else:
        ids = np.fromiter(active_segments, dtype=np.int64)
        active = np.isin(net.segment_ids, ids)
    fixed = net.boundary_pressure if fixed is None else np.asarray(fixed, dtype=float)
    conn = net.conn[active]
    used = np.zeros(net.n_nodes, dtype=bool)
    used[conn.ravel()] = True
    fixed_mask = np.isfinite(fixed)
    check_dirichlet_reachable(net.n_nodes, conn, fixed_mask)

    free = used & ~fixed_mask
    unknowns = np.flatnonzero(free)
    node_to_unknown = -np.ones(net.n_nodes, dtype=np.int64)
    node_to_unknown[unknowns] = np.arange(len(unknowns))

    g = np.zeros(net.n_segments)
    g[active] = network_conductance(net.subnetwork(active), params) if active.any() else 0.0
    builder = TripletBuilder(len(unknowns))
    rhs = np.zeros(len(unknowns))
    graph_laplacian_triplets(builder, conn, g[active], node_to_unknown, fixed, rhs)

    if wall_exchange is not None:
        st = wall_exchange.stations
        c = wall_exchange.coefficient
        r = node_to_unknown[st.owner]
        ok = r >= 0
        for nodes, w in ((st.owner, st.w_owner), (st.other, 1.0 - st.w_owner)):
            col = node_to_unknown[nodes]
            m = ok & (col >= 0)
            builder.add(r[m], col[m], c[m] * w[m])
            d = ok & (col < 0)
            np.add.at(rhs, r[d], -c[d] * w[d] * fixed[nodes[d]])
        const = c * (wall_exchange.tissue_pressure + wall_exchange.oncotic_gap)
        np.add.at(rhs, r[ok], const[ok])

    fixed_out = np.where(fixed_mask & used, fixed, np.nan)
    return VgmSystem(builder.tocsr(), rhs, unknowns, node_to_unknown, fixed_out, g, active,
                     wall_exchange)


def solve_vgm(system, numerics=Numerics(), return_info=False):
    """Node pressures [Pa]; Dirichlet nodes echo their data, inactive nodes are nan."""
    x, info = solve(system.A, system.b, tol=numerics.tol, max_iter=numerics.max_iter,
                    preconditioner=numerics.preconditioner, method=numerics.method,
                    return_info=True)
    p = system.fixed.copy()
    p[system.unknowns] = x
    return (p, info) if return_info else p


def edge_flux(net, p, conductance):
    """Signed flux from ``conn[:, 0]`` to ``conn[:, 1]`` of every segment."""
    return conductance * (p[net.conn[:, 0]] - p[net.conn[:, 1]])


def node_outflow(net, p, conductance, segment_mask=None):
    """Sum over incident edges of the flux leaving each node through that edge."""
    f = edge_flux(net, p, conductance)
    if segment_mask is not None:
        f = np.where(segment_mask, f, 0.0)
    out = np.zeros(net.n_nodes)
    np.add.at(out, net.conn[:, 0], f)
    np.add.at(out, net.conn[:, 1], -f)
    return out


# ---------------------------------------------------------------------------
# permeability experiment
# ---------------------------------------------------------------------------
def facet_nodes(positions, lo, hi, axis, side, eps_d):
    """Nodes within ``eps_d`` of facet ``(axis, side)`` of the box ``[lo, hi]``."""
    plane = lo[axis] if side == 0 else hi[axis]
    near = np.abs(positions[:, axis] - plane) < eps_d
    others = [a for a in range(3) if a != axis]
    within = np.all((positions[:, others] >= np.asarray(lo)[others] - eps_d)
                    & (positions[:, others] <= np.asarray(hi)[others] + eps_d), axis=1)
    return near & within


def permeability_experiment(subnet, axis, p_in, p_out, box, params=PhysicalParams(),
                            numerics=Numerics()):
    """Volume flux [m^3/s] leaving through the outflow facet of ``box``.

    Nodes within ``eps_d`` of the low facet along ``axis`` are held at
    ``p_in``, those near the high facet at ``p_out``; all other nodes are
    free. Components without any held node carry no flow and are ignored.

    Raises
    ------
    ExperimentInfeasibleError
        If either facet has no vessel node.
    """
    if isinstance(axis, str):
        axis = "xyz".index(axis)
    lo, hi = (np.asarray(v, dtype=float) for v in box)
    pos = subnet.positions
    inlet = facet_nodes(pos, lo, hi, axis, 0, numerics.eps_d)
    outlet = facet_nodes(pos, lo, hi, axis, 1, numerics.eps_d) & ~inlet
    if not inlet.any() or not outlet.any():
        raise ExperimentInfeasibleError(f"no vessel nodes on the {'xyz'[axis]} facets")
    fixed = np.full(subnet.n_nodes, np.nan)
    fixed[inlet] = p_in
    fixed[outlet] = p_out

    ncomp, labels = _components(subnet.n_nodes, subnet.conn)
    held = np.zeros(ncomp, dtype=bool)
    held[labels[inlet | outlet]] = True
    seg_keep = held[labels[subnet.conn[:, 0]]]
    if not seg_keep.any():
        return 0.0
    system = assemble_vgm(subnet, params, subnet.segment_ids[seg_keep], fixed=fixed)
    p = solve_vgm(system, numerics)
    g = network_conductance(subnet, params, volumetric=True)
    f = edge_flux(subnet, p, g)
    a, b = subnet.conn[:, 0], subnet.conn[:, 1]
    into_outlet = (np.where(outlet[b] & ~outlet[a], f, 0.0)
                   - np.where(outlet[a] & ~outlet[b], f, 0.0))
    return float(np.sum(into_outlet[seg_keep]))
