"""Uniform cell-centred grid over the domain box and its REV partition."""
from dataclasses import dataclass, field

import numpy as np

from .network import large_vessel_terminals

AXES = "xyz"


@dataclass(frozen=True)
class UniformGrid:
    """Cell-centred hexahedral grid; flat cell index ``i + nx * (j + ny * k)``."""

    lo: tuple
    hi: tuple
    shape: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        shape = tuple(int(v) for v in self.shape)
        if len(lo) != 3 or len(hi) != 3 or len(shape) != 3:
            raise ValueError("grid needs 3-vectors for lo, hi and shape")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("grid extent must be strictly positive")
        if any(n < 1 for n in shape):
            raise ValueError("grid needs at least one cell per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)

    @property
    def origin(self):
        return np.array(self.lo)

    @property
    def extent(self):
        return np.array(self.hi) - np.array(self.lo)

    @property
    def h(self):
        return self.extent / np.array(self.shape)

    @property
    def n_cells(self):
        nx, ny, nz = self.shape
        return nx * ny * nz

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def face_areas(self):
        hx, hy, hz = self.h
        return np.array([hy * hz, hx * hz, hx * hy])

    def ijk(self, flat=None):
        """Integer (i, j, k) arrays for the given (or all) flat indices."""
        nx, ny, _ = self.shape
        flat = np.arange(self.n_cells) if flat is None else np.asarray(flat)
        return flat % nx, (flat // nx) % ny, flat // (nx * ny)

    def flat(self, i, j, k):
        nx, ny, _ = self.shape
        return np.asarray(i) + nx * (np.asarray(j) + ny * np.asarray(k))

    def centers(self, flat=None):
        i, j, k = self.ijk(flat)
        return self.origin + (np.stack([i, j, k], axis=-1) + 0.5) * self.h

    def locate(self, points):
        """Flat index of the cell owning each point; -1 for points outside.

        Points on an interior face belong to the upper cell; points on the
        upper domain boundary belong to the last cell.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - self.origin) / self.h
        n = np.array(self.shape)
        tol = 1e-9
        inside = np.all((rel >= -tol) & (rel <= n + tol), axis=1)
        idx = np.clip(np.floor(rel).astype(np.int64), 0, n - 1)
        out = self.flat(idx[:, 0], idx[:, 1], idx[:, 2])
        return np.where(inside, out, -1)

    def locate_shared(self, points, tol=1e-9):
        """Owning cells with weights, splitting points that lie on interior faces.

        A point on an interior face (within ``tol`` cell widths) is shared
        equally by the two cells across it, so a point on an edge or corner is
        shared by four or eight cells. Returns ``(cells, weights)`` of shape
        ``(n, 8)``; unused slots and points outside carry weight 0 and cell 0.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - self.origin) / self.h
        n = np.array(self.shape)
        inside = np.all((rel >= -tol) & (rel <= n + tol), axis=1)
        near = np.rint(rel)
        tie = (np.abs(rel - near) <= tol) & (near > 0) & (near < n)
        base = np.clip(np.floor(rel).astype(np.int64), 0, n - 1)
        base = np.where(tie, near.astype(np.int64) - 1, base)
        cells = np.zeros((len(pts), 8), dtype=np.int64)
        weights = np.zeros((len(pts), 8))
        for c in range(8):
            shift = np.array([(c >> a) & 1 for a in range(3)])
            # the upper neighbour is only used along tied axes
            ok = np.all(tie | (shift == 0), axis=1) & inside
            idx = base + shift
            cells[:, c] = np.where(ok, self.flat(idx[:, 0], idx[:, 1], idx[:, 2]), 0)
            weights[:, c] = np.where(ok, 0.5 ** tie.sum(axis=1), 0.0)
        return cells, weights

    def interpolation_weights(self, points, tol=1e-9):
        """Trilinear interpolation of cell-centred values at ``points``.

        Within half a cell of the domain boundary the value is held constant
        along the normal. Returns ``(cells, weights)`` of shape ``(n, 8)``;
        points outside carry weight 0.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - self.origin) / self.h
        n = np.array(self.shape)
        inside = np.all((rel >= -tol) & (rel <= n + tol), axis=1)
        s = rel - 0.5
        i0 = np.clip(np.floor(s).astype(np.int64), 0, np.maximum(n - 2, 0))
        t = np.clip(s - i0, 0.0, 1.0)
        t = np.where(n > 1, t, 0.0)
        cells = np.zeros((len(pts), 8), dtype=np.int64)
        weights = np.zeros((len(pts), 8))
        for c in range(8):
            shift = np.array([(c >> a) & 1 for a in range(3)])
            idx = np.minimum(i0 + shift, n - 1)
            w = np.prod(np.where(shift == 1, t, 1.0 - t), axis=1)
            cells[:, c] = self.flat(idx[:, 0], idx[:, 1], idx[:, 2])
            weights[:, c] = np.where(inside, w, 0.0)
        return cells, weights

    def contains(self, points, strict=False):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = np.array(self.lo), np.array(self.hi)
        if strict:
            return np.all((pts > lo) & (pts < hi), axis=1)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def boundary_cells(self, axis, side):
        """Flat indices of the cells touching face ``(axis, side)`` (side 0 = low)."""
        n = self.shape
        ranges = [np.arange(v) for v in n]
        ranges[axis] = np.array([0 if side == 0 else n[axis] - 1])
        i, j, k = np.meshgrid(*ranges, indexing="ij")
        return np.sort(self.flat(i.ravel(), j.ravel(), k.ravel()))

    def face_centers(self, axis, side, flat):
        c = self.centers(flat)
        c[:, axis] = self.lo[axis] if side == 0 else self.hi[axis]
        return c


# ---------------------------------------------------------------------------
# segment / box clipping
# ---------------------------------------------------------------------------
def clip_segments(p0, p1, lo, hi):
    """Liang-Barsky clipping of segments against a closed axis-aligned box.

    Returns parameter arrays ``t0 <= t1`` of the part inside the box, with
    ``t0 > t1`` (empty) for segments that miss it.
    """
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    d = np.atleast_2d(np.asarray(p1, dtype=float)) - p0
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m = len(p0)
    t0 = np.zeros(m)
    t1 = np.ones(m)
    for ax in range(3):
        da = d[:, ax]
        para = da == 0
        outside = para & ((p0[:, ax] < lo[ax]) | (p0[:, ax] > hi[ax]))
        t0[outside] = 1.0
        t1[outside] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo[ax] - p0[:, ax]) / da
            tb = (hi[ax] - p0[:, ax]) / da
        enter = np.where(da > 0, ta, tb)
        leave = np.where(da > 0, tb, ta)
        nz = ~para
        t0[nz] = np.maximum(t0[nz], enter[nz])
        t1[nz] = np.minimum(t1[nz], leave[nz])
    return t0, t1


def segment_box_membership(net, lo, hi, segment_mask=None):
    """Segments with positive overlap or an endpoint in the closed box."""
    conn = net.conn
    a, b = net.positions[conn[:, 0]], net.positions[conn[:, 1]]
    t0, t1 = clip_segments(a, b, lo, hi)
    lo, hi = np.asarray(lo), np.asarray(hi)
    inside_a = np.all((a >= lo) & (a <= hi), axis=1)
    inside_b = np.all((b >= lo) & (b <= hi), axis=1)
    member = ((t1 - t0) * net.length > 0) | inside_a | inside_b
    if segment_mask is not None:
        member &= segment_mask
    return member


def clipped_lengths(net, lo, hi, segment_mask=None, domain_hi=None):
    """Length of each segment inside the box, partitioned between boxes.

    A sub-segment lying entirely in an upper face plane of the box that is
    not also a domain face is attributed to the neighbouring box, so that
    summing over a tiling counts every length once.
    """
    a = net.positions[net.conn[:, 0]]
    b = net.positions[net.conn[:, 1]]
    t0, t1 = clip_segments(a, b, lo, hi)
    span = np.clip(t1 - t0, 0.0, None)
    length = span * net.length
    if domain_hi is not None:
        hi = np.asarray(hi, dtype=float)
        dom = np.asarray(domain_hi, dtype=float)
        tmid = 0.5 * (t0 + t1)
        mid = a + tmid[:, None] * (b - a)
        d = b - a
        tol = 1e-12 * max(1.0, float(np.max(np.abs(hi))))
        for ax in range(3):
            if abs(hi[ax] - dom[ax]) <= tol:
                continue
            on_face = (np.abs(mid[:, ax] - hi[ax]) <= tol) & (np.abs(d[:, ax]) <= tol)
            length[on_face] = 0.0
    if segment_mask is not None:
        length = np.where(segment_mask, length, 0.0)
    return length, t0, t1


# ---------------------------------------------------------------------------
# REV decomposition
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RevBox:
    id: int
    lo: tuple
    hi: tuple
    cell_range: tuple
    capillary_segment_ids: frozenset = field(default_factory=frozenset)
    large_terminal_node_ids: frozenset = field(default_factory=frozenset)

    @property
    def center(self):
        return 0.5 * (np.array(self.lo) + np.array(self.hi))

    @property
    def edge_lengths(self):
        return np.array(self.hi) - np.array(self.lo)

    @property
    def volume(self):
        return float(np.prod(self.edge_lengths))


@dataclass(frozen=True)
class RevDecomposition:
    grid: UniformGrid
    counts: tuple
    boxes: tuple

    @property
    def n_rev(self):
        return len(self.boxes)

    @property
    def cells_per_rev(self):
        return tuple(n // m for n, m in zip(self.grid.shape, self.counts))

    def rev_of_cell(self):
        """REV id for every grid cell (flat ordering)."""
        i, j, k = self.grid.ijk()
        ci, cj, ck = self.cells_per_rev
        mx, my, _ = self.counts
        return (i // ci) + mx * ((j // cj) + my * (k // ck))

    def rev_of_point(self, points):
        cell = self.grid.locate(points)
        out = -np.ones(len(cell), dtype=np.int64)
        ok = cell >= 0
        out[ok] = self.rev_of_cell()[cell[ok]]
        return out

    def rev_cells(self, rev_id):
        return np.flatnonzero(self.rev_of_cell() == rev_id)

    def boundary_faces(self, rev_id):
        """(axis, side) pairs of the REV faces lying on the domain boundary."""
        box = self.boxes[rev_id]
        out = []
        for ax in range(3):
            if box.cell_range[ax][0] == 0:
                out.append((ax, 0))
            if box.cell_range[ax][1] == self.grid.shape[ax] - 1:
                out.append((ax, 1))
        return out


def decompose_revs(grid, counts, net=None, capillary_ids=(), large_ids=()):
    """Partition the grid into ``mx * my * mz`` REVs aligned with cell faces.

    When a network is given, each box records the capillary segments meeting
    it and the large-vessel terminals it contains.
    """
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or any(c < 1 for c in counts):
        raise ValueError("REV counts must be three positive integers")
    if any(n % m for n, m in zip(grid.shape, counts)):
        raise ValueError(f"REV counts {counts} must divide the grid shape {grid.shape}")
    per = [n // m for n, m in zip(grid.shape, counts)]
    h = grid.h
    lo0 = np.array(grid.lo)
    mx, my, mz = counts

    cap_mask = None
    terminals = np.array([], dtype=np.int64)
    if net is not None:
        cap_ids = np.fromiter(capillary_ids, np.int64, len(capillary_ids))
        cap_mask = np.isin(net.segment_ids, cap_ids)
        if len(large_ids):
            terminals = large_vessel_terminals(net, large_ids, (grid.lo, grid.hi))

    boxes = []
    term_rev = None
    if terminals.size:
        cell = grid.locate(net.positions[terminals])
        i, j, k = grid.ijk(cell)
        term_rev = (i // per[0]) + mx * ((j // per[1]) + my * (k // per[2]))
    for rk in range(mz):
        for rj in range(my):
            for ri in range(mx):
                rid = ri + mx * (rj + my * rk)
                r = (ri, rj, rk)
                cell_range = tuple((r[a] * per[a], (r[a] + 1) * per[a] - 1) for a in range(3))
                # face coordinates from integer indices keep the tiling exact
                lo = tuple(float(lo0[a] + r[a] * per[a] * h[a]) for a in range(3))
                hi = tuple(float(grid.hi[a]) if r[a] == counts[a] - 1
                           else float(lo0[a] + (r[a] + 1) * per[a] * h[a]) for a in range(3))
                caps, terms = frozenset(), frozenset()
                if net is not None:
                    member = segment_box_membership(net, lo, hi, cap_mask)
                    caps = frozenset(net.segment_ids[member].tolist())
                    if term_rev is not None:
                        terms = frozenset(net.node_ids[terminals[term_rev == rid]].tolist())
                boxes.append(RevBox(rid, lo, hi, cell_range, caps, terms))
    return RevDecomposition(grid, counts, tuple(boxes))
