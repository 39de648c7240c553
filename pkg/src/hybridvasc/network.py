"""Vascular graph data model, JSON ingestion and graph preprocessing."""
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .exceptions import NetworkFormatError, NetworkValidationError

VESSEL_CLASSES = ("arterial", "venous", "capillary", "unlabeled")
MERGE_TOL = 1.0e-12

_LENGTH_UNITS = {"m": 1.0, "mm": 1.0e-3, "um": 1.0e-6}
_PRESSURE_UNITS = {"Pa": 1.0, "mmHg": 133.322387415}


@dataclass(frozen=True)
class NetworkNode:
    id: int
    position: tuple
    kind: str
    boundary_pressure: float | None
    vessel_class: str


@dataclass(frozen=True)
class Segment:
    id: int
    endpoints: tuple
    radius: float
    length: float

    @property
    def permeability(self):
        return self.radius**2 / 8.0


class VascularNetwork:
    """Straight-segment vessel graph with prescribed boundary pressures.

    Nodes and segments are stored as read-only arrays; ``conn`` holds node
    *indices* (positions in the node arrays), while ``node_ids`` and
    ``segment_ids`` carry the external identifiers. A node is a boundary node
    iff its ``boundary_pressure`` entry is finite.
    """

    def __init__(self, node_ids, positions, boundary_pressure, vessel_class,
                 segment_ids, conn, radius):
        self.node_ids = _frozen(np.asarray(node_ids, dtype=np.int64))
        self.positions = _frozen(np.asarray(positions, dtype=float).reshape(-1, 3))
        self.boundary_pressure = _frozen(np.asarray(boundary_pressure, dtype=float))
        self.vessel_class = _frozen(np.asarray(vessel_class, dtype=object))
        self.segment_ids = _frozen(np.asarray(segment_ids, dtype=np.int64))
        self.conn = _frozen(np.asarray(conn, dtype=np.int64).reshape(-1, 2))
        self.radius = _frozen(np.asarray(radius, dtype=float))

        n, m = len(self.node_ids), len(self.segment_ids)
        if self.positions.shape[0] != n or self.boundary_pressure.shape != (n,):
            raise NetworkValidationError("node arrays have inconsistent lengths")
        if self.conn.shape[0] != m or self.radius.shape != (m,):
            raise NetworkValidationError("segment arrays have inconsistent lengths")
        if m and (self.conn.min() < 0 or self.conn.max() >= n):
            raise NetworkValidationError("segment references an unknown node")
        d = self.positions[self.conn[:, 1]] - self.positions[self.conn[:, 0]]
        self.length = _frozen(np.linalg.norm(d, axis=1))
        self._index = {int(i): k for k, i in enumerate(self.node_ids)}
        self._seg_index = {int(i): k for k, i in enumerate(self.segment_ids)}
        self._incidence = None

    # -- sizes and lookups -------------------------------------------------
    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_segments(self):
        return len(self.segment_ids)

    def node_index(self, node_id):
        return self._index[int(node_id)]

    def segment_index(self, segment_id):
        return self._seg_index[int(segment_id)]

    def segment_indices(self, segment_ids):
        return np.array(sorted(self._seg_index[int(s)] for s in segment_ids), dtype=np.int64)

    @property
    def is_boundary(self):
        return np.isfinite(self.boundary_pressure)

    @property
    def tangents(self):
        d = self.positions[self.conn[:, 1]] - self.positions[self.conn[:, 0]]
        return d / self.length[:, None]

    @property
    def permeability(self):
        """Per-segment ``R^2 / 8`` [m^2]."""
        return self.radius**2 / 8.0

    @property
    def incidence(self):
        """Sparse node-by-segment incidence matrix (CSR, 0/1 entries)."""
        if self._incidence is None:
            m = self.n_segments
            rows = self.conn.ravel()
            cols = np.repeat(np.arange(m), 2)
            inc = sp.csr_matrix((np.ones(2 * m), (rows, cols)), shape=(self.n_nodes, m))
            self._incidence = inc
        return self._incidence

    def degree(self, segment_mask=None):
        if segment_mask is None:
            return np.bincount(self.conn.ravel(), minlength=self.n_nodes)
        return np.bincount(self.conn[segment_mask].ravel(), minlength=self.n_nodes)

    def adjacency(self):
        """Mapping node id -> list of incident segment ids."""
        out = {int(i): [] for i in self.node_ids}
        for s, (a, b) in zip(self.segment_ids, self.conn):
            out[int(self.node_ids[a])].append(int(s))
            out[int(self.node_ids[b])].append(int(s))
        return out

    def components(self, segment_mask=None):
        """Connected component label per node (isolated nodes get their own)."""
        conn = self.conn if segment_mask is None else self.conn[segment_mask]
        n = self.n_nodes
        g = sp.coo_matrix((np.ones(len(conn)), (conn[:, 0], conn[:, 1])), shape=(n, n))
        return connected_components(g, directed=False)

    # -- derived views --------------------------------------------------------
    @property
    def nodes(self):
        return [
            NetworkNode(
                id=int(i),
                position=tuple(float(v) for v in x),
                kind="boundary" if np.isfinite(p) else "interior",
                boundary_pressure=float(p) if np.isfinite(p) else None,
                vessel_class=str(c),
            )
            for i, x, p, c in zip(self.node_ids, self.positions, self.boundary_pressure,
                                  self.vessel_class)
        ]

    @property
    def segments(self):
        return [
            Segment(int(s), (int(self.node_ids[a]), int(self.node_ids[b])), float(r), float(L))
            for s, (a, b), r, L in zip(self.segment_ids, self.conn, self.radius, self.length)
        ]

    # -- derived networks --------------------------------------------------
    def subnetwork(self, segment_mask):
        """Network restricted to the masked segments and their endpoints."""
        segment_mask = np.asarray(segment_mask, dtype=bool)
        conn = self.conn[segment_mask]
        keep = np.zeros(self.n_nodes, dtype=bool)
        keep[conn.ravel()] = True
        remap = -np.ones(self.n_nodes, dtype=np.int64)
        remap[keep] = np.arange(keep.sum())
        return VascularNetwork(
            self.node_ids[keep], self.positions[keep], self.boundary_pressure[keep],
            self.vessel_class[keep], self.segment_ids[segment_mask], remap[conn],
            self.radius[segment_mask],
        )

    def with_boundary_pressure(self, boundary_pressure):
        bp = np.asarray(boundary_pressure, dtype=float)
        if bp.shape != (self.n_nodes,) or np.any(np.isfinite(bp) != self.is_boundary):
            raise NetworkValidationError("boundary pressures must keep the boundary node set")
        return VascularNetwork(self.node_ids, self.positions, bp, self.vessel_class,
                               self.segment_ids, self.conn, self.radius)

    def to_dict(self):
        nodes = []
        for i, x, p, c in zip(self.node_ids, self.positions, self.boundary_pressure,
                              self.vessel_class):
            rec = {"id": int(i), "x": float(x[0]), "y": float(x[1]), "z": float(x[2])}
            if np.isfinite(p):
                rec["boundary_pressure"] = float(p)
            if c != "unlabeled":
                rec["class"] = str(c)
            nodes.append(rec)
        segments = [
            {"id": int(s), "n1": int(self.node_ids[a]), "n2": int(self.node_ids[b]),
             "radius": float(r)}
            for s, (a, b), r in zip(self.segment_ids, self.conn, self.radius)
        ]
        return {"nodes": nodes, "segments": segments}

    def __repr__(self):
        return f"VascularNetwork(n_nodes={self.n_nodes}, n_segments={self.n_segments})"


def _frozen(a):
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------
def network_from_dict(data, *, source="<dict>", check_connected=True):
    """Build and validate a network from the JSON document structure."""
    if not isinstance(data, dict) or "nodes" not in data or "segments" not in data:
        raise NetworkFormatError(f"{source}: expected an object with 'nodes' and 'segments'")
    units = data.get("units", {})
    try:
        lscale = _LENGTH_UNITS[units.get("length", "m")]
        pscale = _PRESSURE_UNITS[units.get("pressure", "Pa")]
    except KeyError as exc:
        raise NetworkFormatError(f"{source}: unsupported unit {exc}") from None

    ids, pos, bp, cls = [], [], [], []
    for k, rec in enumerate(data["nodes"]):
        try:
            nid = int(rec["id"])
            x = [float(rec["x"]), float(rec["y"]), float(rec["z"])]
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkFormatError(f"{source}: node record {k}: {exc!r}") from None
        p = rec.get("boundary_pressure")
        c = rec.get("class", "unlabeled")
        if c not in VESSEL_CLASSES:
            raise NetworkFormatError(f"{source}: node record {k}: unknown class {c!r}")
        ids.append(nid)
        pos.append(x)
        bp.append(math.nan if p is None else float(p) * pscale)
        cls.append(c)
    if len(set(ids)) != len(ids):
        raise NetworkFormatError(f"{source}: duplicate node ids")
    pos = np.asarray(pos, dtype=float).reshape(-1, 3) * lscale
    index = {nid: k for k, nid in enumerate(ids)}

    sids, conn, rad = [], [], []
    for k, rec in enumerate(data["segments"]):
        try:
            sid, n1, n2, r = int(rec["id"]), int(rec["n1"]), int(rec["n2"]), float(rec["radius"])
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkFormatError(f"{source}: segment record {k}: {exc!r}") from None
        for n in (n1, n2):
            if n not in index:
                raise NetworkValidationError(f"{source}: segment {sid}: unknown node {n}")
        if not r > 0:
            raise NetworkValidationError(
                f"{source}: segment {sid}: radius must be positive, got {r}")
        sids.append(sid)
        conn.append((index[n1], index[n2]))
        rad.append(r * lscale)
    if len(set(sids)) != len(sids):
        raise NetworkFormatError(f"{source}: duplicate segment ids")

    conn = np.asarray(conn, dtype=np.int64).reshape(-1, 2)
    pos, bp, conn = _merge_duplicate_nodes(pos, np.asarray(bp), conn)
    net = VascularNetwork(ids, pos, bp, cls, sids, conn, rad)
    if net.n_segments:
        lengths = net.length
        bad = np.flatnonzero(lengths <= 0)
        if bad.size:
            raise NetworkValidationError(
                f"{source}: segments with zero length: {net.segment_ids[bad].tolist()}")
    net = _drop_unreferenced(net)
    validate_network(net, check_connected=check_connected)
    return net


def load_network(path, *, check_connected=True):
    """Read a network JSON file (SI units unless a ``units`` block says otherwise)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return network_from_dict(data, source=str(path), check_connected=check_connected)


def save_network(net, path):
    Path(path).write_text(json.dumps(net.to_dict(), indent=1, sort_keys=True) + "\n")


def _merge_duplicate_nodes(pos, bp, conn):
    """Redirect segments from nodes within MERGE_TOL of an earlier node."""
    n = len(pos)
    if n == 0:
        return pos, bp, conn
    order = np.lexsort(pos.T[::-1])
    target = np.arange(n)
    # neighbouring entries in lexicographic order are the only merge candidates
    # for sub-tolerance distances along the leading coordinate; scan a window
    for a_pos in range(n):
        a = order[a_pos]
        if target[a] != a:
            continue
        b_pos = a_pos + 1
        while b_pos < n and pos[order[b_pos], 0] - pos[a, 0] <= MERGE_TOL:
            b = order[b_pos]
            if target[b] == b and np.linalg.norm(pos[b] - pos[a]) <= MERGE_TOL:
                keep, drop = (a, b) if a < b else (b, a)
                target[drop] = keep
                if not np.isfinite(bp[keep]) and np.isfinite(bp[drop]):
                    bp = bp.copy()
                    bp[keep] = bp[drop]
            b_pos += 1
    target = target[target]
    if conn.size:
        conn = target[conn]
    merged = target != np.arange(n)
    if merged.any():
        bp = bp.copy()
        bp[merged] = np.nan
    return pos, bp, conn


def _drop_unreferenced(net):
    """Remove nodes that no segment references (merged or isolated nodes)."""
    used = np.zeros(net.n_nodes, dtype=bool)
    used[net.conn.ravel()] = True
    if used.all():
        return net
    remap = -np.ones(net.n_nodes, dtype=np.int64)
    remap[used] = np.arange(used.sum())
    return VascularNetwork(net.node_ids[used], net.positions[used], net.boundary_pressure[used],
                           net.vessel_class[used], net.segment_ids, remap[net.conn], net.radius)


def validate_network(net, *, domain=None, check_connected=True):
    """Check structural invariants; raise :class:`NetworkValidationError`."""
    if net.n_segments == 0:
        raise NetworkValidationError("network has no segments")
    if np.any(net.radius <= 0):
        raise NetworkValidationError("segment radii must be positive")
    if np.any(net.length <= 0):
        raise NetworkValidationError("segment lengths must be positive")
    if np.any(net.conn[:, 0] == net.conn[:, 1]):
        raise NetworkValidationError("segments must join two distinct nodes")
    deg = net.degree()
    bad = net.is_boundary & (deg != 1)
    if bad.any():
        raise NetworkValidationError(
            f"boundary nodes must have degree 1: {net.node_ids[bad].tolist()}")
    if check_connected:
        ncomp, labels = net.components()
        if ncomp > 1:
            groups = [net.node_ids[labels == c].tolist() for c in range(ncomp)]
            preview = [g[:5] for g in groups]
            raise NetworkValidationError(
                f"network is disconnected into {ncomp} components (first node ids: {preview})")
    if domain is not None:
        lo, hi = (np.asarray(v, dtype=float) for v in domain)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(hi))))
        outside = np.any((net.positions < lo - tol) | (net.positions > hi + tol), axis=1)
        if outside.any():
            raise NetworkValidationError(
                f"nodes outside the domain box: {net.node_ids[outside][:10].tolist()}")


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------
def prune_dead_ends(net, return_sweeps=False):
    """Iteratively strip interior degree-1 nodes and their segments.

    Boundary nodes are never removed while they still carry a segment.
    With ``return_sweeps`` the number of removal sweeps is returned as well.
    """
    seg_keep = np.ones(net.n_segments, dtype=bool)
    interior = ~net.is_boundary
    sweeps = 0
    while True:
        deg = net.degree(seg_keep)
        dead = interior & (deg == 1)
        if not dead.any():
            break
        hit = dead[net.conn[:, 0]] | dead[net.conn[:, 1]]
        seg_keep &= ~hit
        sweeps += 1
    if not seg_keep.any():
        raise NetworkValidationError("pruning removed every segment")
    out = net if seg_keep.all() else net.subnetwork(seg_keep)
    return (out, sweeps) if return_sweeps else out


def split_by_threshold(net, R_T):
    """Split segment ids into large vessels (R >= R_T) and capillaries."""
    if R_T < 0:
        raise ValueError("R_T must be non-negative")
    large = net.radius >= R_T
    return (frozenset(net.segment_ids[large].tolist()),
            frozenset(net.segment_ids[~large].tolist()))


def large_vessel_terminals(net, large_ids, domain):
    """Node indices where the large-vessel subgraph ends inside the domain.

    A terminal is a degree-1 node of the large-vessel subgraph lying strictly
    inside the domain box and touching at least one capillary segment.
    """
    lo, hi = (np.asarray(v, dtype=float) for v in domain)
    large = np.isin(net.segment_ids, np.fromiter(large_ids, dtype=np.int64, count=len(large_ids)))
    deg_l = net.degree(large)
    deg_c = net.degree(~large)
    inside = np.all((net.positions > lo) & (net.positions < hi), axis=1)
    return np.flatnonzero((deg_l == 1) & inside & (deg_c > 0) & ~net.is_boundary)
