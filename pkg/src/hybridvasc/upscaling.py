"""Homogenised capillary coefficients per REV and the capillary boundary field."""
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ExperimentInfeasibleError, ModelDefinitionError
from .grid import clip_segments, clipped_lengths, segment_box_membership
from .network import VascularNetwork
from .params import Numerics, PhysicalParams
from .rheology import segment_viscosity
from .vgm import permeability_experiment


def _mask(net, segment_ids):
    if segment_ids is None:
        return np.ones(net.n_segments, dtype=bool)
    ids = np.fromiter(segment_ids, dtype=np.int64)
    return np.isin(net.segment_ids, ids)


def clip_to_box(net, lo, hi, segment_mask=None, snap=1.0e-9):
    """Sub-network of the segment pieces lying inside the closed box.

    Endpoints inside the box keep their node; cut points become new nodes
    (fresh ids) on the box surface. Clip parameters within ``snap`` of an
    end are moved onto it, and pieces spanning less than ``snap`` of their
    segment (a vertex merely touching the box) are dropped; such slivers
    would otherwise carry conductances many orders above the rest.
    """
    sel = np.ones(net.n_segments, dtype=bool) if segment_mask is None else segment_mask
    a = net.positions[net.conn[:, 0]]
    b = net.positions[net.conn[:, 1]]
    t0, t1 = clip_segments(a, b, lo, hi)
    t0 = np.where(np.abs(t0) <= snap, 0.0, t0)
    t1 = np.where(np.abs(t1 - 1.0) <= snap, 1.0, t1)
    keep = sel & (t1 - t0 > snap) & (net.length > 0)
    seg = np.flatnonzero(keep)
    next_id = int(net.node_ids.max()) + 1 if net.n_nodes else 0
    index = {}
    ids, pos = [], []

    def node_for(orig, point):
        key = ("n", int(orig)) if orig is not None else ("c", len(ids))
        if key in index:
            return index[key]
        index[key] = len(ids)
        pos.append(point)
        ids.append(int(net.node_ids[orig]) if orig is not None else None)
        return index[key]

    conn = []
    for s in seg:
        na, nb = net.conn[s]
        ends = []
        for t, orig in ((t0[s], na), (t1[s], nb)):
            whole = (t == 0.0 and orig == na) or (t == 1.0 and orig == nb)
            point = a[s] + t * (b[s] - a[s])
            ends.append(node_for(orig if whole else None, point))
        conn.append(ends)
    for k, v in enumerate(ids):
        if v is None:
            ids[k] = next_id
            next_id += 1
    n = len(ids)
    return VascularNetwork(ids, np.asarray(pos).reshape(-1, 3), np.full(n, np.nan),
                           np.full(n, "capillary", dtype=object), net.segment_ids[seg],
                           np.asarray(conn, dtype=np.int64).reshape(-1, 2), net.radius[seg])


def upscale_viscosity(net, segment_ids, params=PhysicalParams()):
    """Unweighted mean of the in vivo viscosity over the given segments."""
    m = _mask(net, segment_ids)
    if not m.any():
        raise ModelDefinitionError("cannot average viscosity over an empty segment set")
    return float(np.mean(segment_viscosity(net.radius[m], params.rheology)))


def upscale_permeability(net, lo, hi, segment_ids=None, params=PhysicalParams(),
                         numerics=Numerics(), mu_up=None, return_flux=False):
    """Diagonal permeability ``(k_x, k_y, k_z)`` [m^2] of the vessels in a box.

    For each axis a pressure drop ``numerics.dp_upscale`` is imposed between
    opposite facets of the clipped sub-network and
    ``k = VF mu_up L_axis / (L_perp1 L_perp2 dp)``. Axes without a
    facet-to-facet path get ``numerics.k_floor`` and a warning.
    """
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    m = _mask(net, segment_ids)
    member = segment_box_membership(net, lo, hi, m)
    if mu_up is None:
        mu_up = upscale_viscosity(net, net.segment_ids[member], params)
    sub = clip_to_box(net, lo, hi, m)
    L = hi - lo
    dp = numerics.dp_upscale
    k = np.full(3, numerics.k_floor)
    flux = np.zeros(3)
    for ax in range(3):
        try:
            vf = permeability_experiment(sub, ax, dp, 0.0, (lo, hi), params, numerics) \
                if sub.n_segments else 0.0
        except ExperimentInfeasibleError:
            vf = 0.0
        flux[ax] = vf
        others = [a for a in range(3) if a != ax]
        if vf > 0:
            k[ax] = vf * mu_up * L[ax] / (L[others[0]] * L[others[1]] * dp)
        else:
            warnings.warn(f"no {'xyz'[ax]} flow path between facets of box {lo}-{hi}; "
                          f"using k floor {numerics.k_floor:g}", RuntimeWarning, stacklevel=2)
    return (k, flux) if return_flux else k


def blood_volume_fraction(net, lo, hi, segment_ids=None, domain_hi=None):
    """Clipped vessel volume in the box divided by the box volume."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    length, _, _ = clipped_lengths(net, lo, hi, _mask(net, segment_ids), domain_hi)
    return float(np.sum(np.pi * net.radius**2 * length) / np.prod(hi - lo))


def surface_area(net, lo, hi, segment_ids=None, domain_hi=None):
    """Lateral wall area ``sum 2 pi R |clipped length|`` inside the box."""
    length, _, _ = clipped_lengths(net, lo, hi, _mask(net, segment_ids), domain_hi)
    return float(np.sum(2.0 * np.pi * net.radius * length))


@dataclass(frozen=True)
class RevCoefficients:
    """Homogenised coefficients, one row per REV (ordered by REV id)."""

    K: np.ndarray            # (n, 3) diagonal permeability [m^2]
    mu_up: np.ndarray        # [Pa s]
    S: np.ndarray            # wall surface area [m^2]
    bvf: np.ndarray          # blood volume fraction [-]
    Kv_bar: np.ndarray       # mean R^2/8 of member capillaries [m^2]
    edge_lengths: np.ndarray  # (n, 3) [m]
    L_min: np.ndarray        # smallest edge length [m]
    volume: np.ndarray       # [m^3]
    radius_mean: np.ndarray
    radius_std: np.ndarray
    n_capillaries: np.ndarray

    @property
    def n_rev(self):
        return len(self.mu_up)


def compute_rev_coefficients(net, revs, capillary_ids, params=PhysicalParams(),
                             numerics=Numerics()):
    """Upscale every REV of a decomposition.

    Raises
    ------
    ModelDefinitionError
        If an REV contains no capillary segment.
    """
    cap = _mask(net, capillary_ids)
    dom_hi = revs.grid.hi
    rows = []
    empty = [b.id for b in revs.boxes if not b.capillary_segment_ids]
    if empty:
        raise ModelDefinitionError(f"REVs without capillaries: {empty}")
    for box in revs.boxes:
        members = _mask(net, box.capillary_segment_ids)
        R = net.radius[members]
        mu_up = upscale_viscosity(net, box.capillary_segment_ids, params)
        k = upscale_permeability(net, box.lo, box.hi, net.segment_ids[cap], params, numerics,
                                 mu_up=mu_up)
        rows.append((k, mu_up,
                     surface_area(net, box.lo, box.hi, net.segment_ids[cap], dom_hi),
                     blood_volume_fraction(net, box.lo, box.hi, net.segment_ids[cap], dom_hi),
                     float(np.mean(R**2 / 8.0)), box.edge_lengths,
                     float(np.min(box.edge_lengths)), box.volume,
                     float(np.mean(R)), float(np.std(R)), int(members.sum())))
    cols = list(zip(*rows))
    return RevCoefficients(
        K=np.array(cols[0]), mu_up=np.array(cols[1]), S=np.array(cols[2]), bvf=np.array(cols[3]),
        Kv_bar=np.array(cols[4]), edge_lengths=np.array(cols[5]), L_min=np.array(cols[6]),
        volume=np.array(cols[7]), radius_mean=np.array(cols[8]), radius_std=np.array(cols[9]),
        n_capillaries=np.array(cols[10]),
    )


# ---------------------------------------------------------------------------
# REV growth study
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class GrowthRow:
    size: tuple
    k_x: float
    k_y: float
    k_z: float
    bvf: float


def rev_growth_study(net, center, sizes, capillary_ids=None, params=PhysicalParams(),
                     numerics=Numerics(), domain=None):
    """Permeability and blood volume fraction of boxes of growing size.

    ``sizes`` is a sequence of edge-length 3-vectors (or scalars for cubes);
    each box is centred on ``center``. Boxes containing no vessel yield
    all-zero rows.
    """
    center = np.asarray(center, dtype=float)
    cap = _mask(net, capillary_ids)
    out = []
    for size in sizes:
        size = np.broadcast_to(np.asarray(size, dtype=float), (3,))
        lo, hi = center - size / 2, center + size / 2
        if domain is not None:
            dlo, dhi = (np.asarray(v, dtype=float) for v in domain)
            if np.any(lo < dlo - 1e-15) or np.any(hi > dhi + 1e-15):
                raise ValueError(f"growth box of size {size} leaves the domain")
        member = segment_box_membership(net, lo, hi, cap)
        if not member.any():
            out.append(GrowthRow(tuple(size), 0.0, 0.0, 0.0, 0.0))
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            k = upscale_permeability(net, lo, hi, net.segment_ids[cap], params, numerics)
        bvf = blood_volume_fraction(net, lo, hi, net.segment_ids[cap])
        out.append(GrowthRow(tuple(size), float(k[0]), float(k[1]), float(k[2]), bvf))
    return out


# ---------------------------------------------------------------------------
# capillary boundary pressure field
# ---------------------------------------------------------------------------
def _interp2(u_nodes, v_nodes, values, u, v):
    """Bilinear interpolation on a tensor lattice, clamped at the outer nodes."""
    u = np.clip(u, u_nodes[0], u_nodes[-1])
    v = np.clip(v, v_nodes[0], v_nodes[-1])
    along_u = np.array([np.interp(u, u_nodes, values[:, j]) for j in range(len(v_nodes))])
    return np.array([np.interp(v[i], v_nodes, along_u[:, i]) for i in range(len(u))])


@dataclass(frozen=True)
class CapillaryBoundaryField:
    """Averaged capillary pressure per boundary REV face, bilinearly interpolated.

    ``planes[(axis, side)]`` holds ``(u_centres, v_centres, values, counts)``
    where ``u``/``v`` are the two in-plane axes in increasing order and
    ``counts`` the number of matched nodes (0 for filled-in faces).
    """

    planes: dict

    def __call__(self, axis, side, points):
        u_c, v_c, vals, _ = self.planes[(axis, side)]
        ua, va = [a for a in range(3) if a != axis]
        points = np.atleast_2d(points)
        return _interp2(u_c, v_c, vals, points[:, ua], points[:, va])

    def face_value(self, axis, side, iu, iv):
        return float(self.planes[(axis, side)][2][iu, iv])

    def as_dirichlet(self):
        return {key: (lambda pts, key=key: self(key[0], key[1], pts)) for key in self.planes}


def capillary_boundary_field(net, revs, capillary_ids=None, eps_d=Numerics().eps_d):
    """Mean capillary boundary pressure on each boundary REV face.

    Faces with no boundary node within ``eps_d`` take the mean of the filled
    faces nearest to them in the same boundary plane.
    """
    cap = _mask(net, capillary_ids)
    touch = np.zeros(net.n_nodes, dtype=bool)
    touch[net.conn[cap].ravel()] = True
    nodes = np.flatnonzero(touch & net.is_boundary)
    pos = net.positions[nodes]
    pval = net.boundary_pressure[nodes]
    grid = revs.grid
    counts = revs.counts
    planes = {}
    for axis in range(3):
        ua, va = [a for a in range(3) if a != axis]
        for side in (0, 1):
            plane = grid.lo[axis] if side == 0 else grid.hi[axis]
            near = np.abs(pos[:, axis] - plane) < eps_d
            vals = np.full((counts[ua], counts[va]), np.nan)
            cnt = np.zeros((counts[ua], counts[va]), dtype=np.int64)
            u_c = np.zeros(counts[ua])
            v_c = np.zeros(counts[va])
            for box in revs.boxes:
                r = [box.cell_range[a][0] // revs.cells_per_rev[a] for a in range(3)]
                if r[axis] != (0 if side == 0 else counts[axis] - 1):
                    continue
                iu, iv = r[ua], r[va]
                u_c[iu], v_c[iv] = box.center[ua], box.center[va]
                lo, hi = np.array(box.lo), np.array(box.hi)
                inside = near & np.all((pos[:, [ua, va]] >= lo[[ua, va]] - eps_d)
                                       & (pos[:, [ua, va]] <= hi[[ua, va]] + eps_d), axis=1)
                cnt[iu, iv] = int(inside.sum())
                if cnt[iu, iv]:
                    vals[iu, iv] = float(np.mean(pval[inside]))
            if not np.isfinite(vals).any():
                raise ModelDefinitionError(
                    f"no capillary boundary node on any REV face of plane "
                    f"{'xyz'[axis]}={'lo' if side == 0 else 'hi'}")
            planes[(axis, side)] = (u_c, v_c, _fill_nearest(vals), cnt)
    return CapillaryBoundaryField(planes)


def _fill_nearest(vals):
    """Replace nan entries by the mean of the closest (Chebyshev) finite entries."""
    out = vals.copy()
    known = np.argwhere(np.isfinite(vals))
    for iu, iv in np.argwhere(~np.isfinite(vals)):
        d = np.max(np.abs(known - [iu, iv]), axis=1)
        near = known[d == d.min()]
        out[iu, iv] = float(np.mean(vals[near[:, 0], near[:, 1]]))
    return out
