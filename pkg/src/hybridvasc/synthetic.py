"""Synthetic capillary lattices with penetrating large vessels."""
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import NetworkValidationError
from .network import VascularNetwork, validate_network


@dataclass(frozen=True)
class PenetratingVessel:
    """Large vessel entering through the top face (``z = hi``) at ``(x, y)``.

    The vessel descends to ``depth`` below the top face and ends in a
    terminal joined by capillaries to its ``n_links`` nearest lattice nodes.
    With ``through=True`` it continues to the bottom face as a second
    boundary node held at ``exit_pressure``.
    """

    x: float
    y: float
    depth: float
    kind: str = "arterial"
    pressure: float = 8000.0
    radius: float = 10.0e-6
    n_links: int = 4
    through: bool = False
    exit_pressure: float | None = None


@dataclass(frozen=True)
class SyntheticSpec:
    """Box, capillary lattice and large vessels of a synthetic network.

    Lattice nodes sit at ``lo + pitch (i + 1/2)`` along each axis; the outer
    layer is joined to the box faces by short stubs whose face nodes carry
    ``capillary_pressure`` (plus a uniform jitter of half-width
    ``capillary_pressure_spread``). Capillary radii are uniform in
    ``[r_min, r_max)``; interior lattice nodes are displaced uniformly by up
    to ``jitter * pitch`` per axis.
    """

    lo: tuple = (0.0, 0.0, 0.0)
    hi: tuple = (4.0e-4, 4.0e-4, 4.0e-4)
    pitch: float = 5.0e-5
    r_min: float = 2.5e-6
    r_max: float = 3.5e-6
    jitter: float = 0.0
    capillary_pressure: float = 4000.0
    capillary_pressure_spread: float = 0.0
    vessels: tuple = ()

    def to_dict(self):
        d = asdict(self)
        d["vessels"] = [asdict(v) for v in self.vessels]
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["vessels"] = tuple(PenetratingVessel(**v) for v in data.get("vessels", ()))
        for key in ("lo", "hi"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def lattice_shape(spec):
    ext = np.asarray(spec.hi) - np.asarray(spec.lo)
    n = np.floor(ext / spec.pitch + 1e-9).astype(int)
    if np.any(n < 1):
        raise NetworkValidationError("box is smaller than one lattice pitch")
    return tuple(int(v) for v in n)


def generate_synthetic(spec, seed=0):
    """Build the network described by ``spec``; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(spec.lo, dtype=float), np.asarray(spec.hi, dtype=float)
    nx, ny, nz = lattice_shape(spec)
    # centre the lattice in the box so stubs on opposite faces are equally long
    margin = (hi - lo - spec.pitch * np.array([nx, ny, nz])) / 2.0
    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ijk = np.stack([ii.ravel(order="F"), jj.ravel(order="F"), kk.ravel(order="F")], axis=1)
    pos = lo + margin + spec.pitch * (ijk + 0.5)
    if spec.jitter > 0:
        interior = np.all((ijk > 0) & (ijk < np.array([nx, ny, nz]) - 1), axis=1)
        shift = rng.uniform(-spec.jitter, spec.jitter, size=pos.shape) * spec.pitch
        pos[interior] += shift[interior]

    def flat(i, j, k):
        return i + nx * (j + ny * k)

    positions = [p for p in pos]
    bp = [np.nan] * len(positions)
    cls = ["capillary"] * len(positions)
    conn = []

    for ax in range(3):
        step = np.zeros(3, dtype=int)
        step[ax] = 1
        ok = ijk[:, ax] < (nx, ny, nz)[ax] - 1
        a = np.flatnonzero(ok)
        b = flat(*(ijk[a] + step).T)
        conn.extend(zip(a.tolist(), b.tolist()))

    for ax in range(3):
        for side, layer in ((0, 0), (1, (nx, ny, nz)[ax] - 1)):
            for a in np.flatnonzero(ijk[:, ax] == layer):
                p = pos[a].copy()
                p[ax] = lo[ax] if side == 0 else hi[ax]
                positions.append(p)
                bp.append(spec.capillary_pressure
                          + spec.capillary_pressure_spread * rng.uniform(-1.0, 1.0))
                cls.append("capillary")
                conn.append((int(a), len(positions) - 1))

    n_cap = len(conn)
    radii = list(rng.uniform(spec.r_min, spec.r_max, size=n_cap))

    lattice = pos
    for v in spec.vessels:
        top = np.array([v.x, v.y, hi[2]])
        term = np.array([v.x, v.y, hi[2] - v.depth])
        if not (np.all(term > lo) and np.all(term < hi)):
            raise NetworkValidationError(f"vessel terminal {term} is not inside the box")
        positions.append(top)
        bp.append(float(v.pressure))
        cls.append(v.kind)
        positions.append(term)
        bp.append(np.nan)
        cls.append(v.kind)
        t_idx = len(positions) - 1
        conn.append((t_idx - 1, t_idx))
        radii.append(v.radius)
        d = np.linalg.norm(lattice - term, axis=1)
        for a in np.argsort(d, kind="stable")[:v.n_links]:
            conn.append((t_idx, int(a)))
            radii.append(rng.uniform(spec.r_min, spec.r_max))
        if v.through:
            if v.exit_pressure is None:
                raise ValueError("through vessels need an exit pressure")
            positions.append(np.array([v.x, v.y, lo[2]]))
            bp.append(float(v.exit_pressure))
            cls.append(v.kind)
            conn.append((t_idx, len(positions) - 1))
            radii.append(v.radius)

    n = len(positions)
    net = VascularNetwork(np.arange(n), np.asarray(positions), np.asarray(bp, dtype=float),
                          np.asarray(cls, dtype=object), np.arange(len(conn)),
                          np.asarray(conn, dtype=np.int64), np.asarray(radii))
    validate_network(net, domain=(lo, hi))
    return net


def reference_spec(**overrides):
    """The synthetic setup used by the calibration and convergence checks.

    A 0.4 mm cube with a 50 um capillary lattice, two penetrating arterioles
    at 8 kPa and two penetrating venules at 2 kPa, capillary boundary
    pressure 4 kPa.
    """
    q, h, r = 1.0e-4, 3.0e-4, 16.0e-6
    vessels = (
        PenetratingVessel(q, q, 2.6e-4, "arterial", 8000.0, radius=r),
        PenetratingVessel(h, h, 2.6e-4, "arterial", 8000.0, radius=r),
        PenetratingVessel(q, h, 2.6e-4, "venous", 2000.0, radius=r),
        PenetratingVessel(h, q, 2.6e-4, "venous", 2000.0, radius=r),
    )
    base = dict(vessels=vessels, jitter=0.15)
    base.update(overrides)
    return SyntheticSpec(**base)
