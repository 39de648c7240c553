"""CSV tables, legacy VTK files and run manifests.

Floats are written with 17 significant digits so every value round-trips
exactly. Mass fluxes are stored in kg/s and written in ug/s.
"""
import csv
import json
import platform
import time
from importlib import metadata
from pathlib import Path

import numpy as np

KG_S_TO_UG_S = 1.0e9


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Header and rows as strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_flux_report(path, *reports):
    """One row per report: provenance and all totals in ug/s."""
    keys = list(reports[0].totals())
    rows = [[r.provenance] + [r.totals()[k] * KG_S_TO_UG_S for k in keys] for r in reports]
    return write_csv(path, ["model"] + [f"{k}_ug_s" for k in keys], rows)


def write_rev_fluxes(path, report):
    """Per-REV capillary boundary and exchange net fluxes with rectified parts [ug/s]."""
    rows = []
    for j in sorted(report.rev_cap):
        c, t = report.rev_cap[j], report.rev_cap_t.get(j, (0.0, 0.0, 0.0))
        rows.append([j] + [v * KG_S_TO_UG_S for v in (*c, *t)])
    return write_csv(path, ["rev", "NF_cap", "NF_cap_in", "NF_cap_out",
                            "NF_cap_t", "NF_cap_t_in", "NF_cap_t_out"], rows)


def write_rev_pressures(path, rp, centers):
    rows = [[j, *centers[j], rp.p_cap_hy[j], rp.p_cap_fd[j], rp.E_cap[j] * 100.0,
             rp.p_t_hy[j], rp.p_t_fd[j], rp.E_t[j] * 100.0] for j in range(len(rp.p_cap_hy))]
    return write_csv(path, ["rev", "center_x_m", "center_y_m", "center_z_m", "p_cap_HY_Pa",
                            "p_cap_FD_Pa", "E_cap_percent", "p_t_HY_Pa", "p_t_FD_Pa",
                            "E_t_percent"], rows)


def write_node_pressures(path, net, p_v, nodes=None):
    """Node id and pressure [Pa] for the given node indices (all by default)."""
    nodes = np.arange(net.n_nodes) if nodes is None else np.asarray(nodes)
    return write_csv(path, ["node_id", "p_v_Pa"],
                     [[int(net.node_ids[k]), p_v[k]] for k in nodes])


def write_alpha_scan(path, scan):
    rows = [[r.alpha, r.f1 * KG_S_TO_UG_S, r.f2 * KG_S_TO_UG_S, r.MF_LV_in * KG_S_TO_UG_S]
            for r in scan.rows]
    return write_csv(path, ["alpha", "f1_ug_s", "f2_ug_s", "MF_LV_in_HY_ug_s"], rows)


def write_sensitivity(path, rows):
    return write_csv(path, ["i", "alpha_star", "delta_Pa"],
                     [[r.fraction, r.alpha_star, r.delta] for r in rows])


def write_growth(path, rows):
    return write_csv(path, ["size_x_m", "size_y_m", "size_z_m", "k_x", "k_y", "k_z", "bvf"],
                     [[*r.size, r.k_x, r.k_y, r.k_z, r.bvf] for r in rows])


# ---------------------------------------------------------------------------
# legacy VTK
# ---------------------------------------------------------------------------
def write_vtk_cells(path, grid, fields, title="hybridvasc"):
    """Cell fields on a uniform grid as ASCII STRUCTURED_POINTS.

    ``fields`` maps names to arrays of length ``grid.n_cells`` in the grid's
    flat (x fastest) order, which is also VTK's order.
    """
    nx, ny, nz = grid.shape
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}",
             "ORIGIN " + " ".join(fmt(v) for v in grid.lo),
             "SPACING " + " ".join(fmt(v) for v in grid.h),
             f"CELL_DATA {grid.n_cells}"]
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_cells,):
            raise ValueError(f"field {name!r} has shape {values.shape}, expected ({grid.n_cells},)")
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in values]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_vtk_network(path, net, point_data=None, cell_data=None, title="hybridvasc network"):
    """Vessel graph as ASCII POLYDATA lines with radius as cell data."""
    point_data = dict(point_data or {})
    cell_data = {"radius": net.radius, **(cell_data or {})}
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA",
             f"POINTS {net.n_nodes} double"]
    lines += [" ".join(fmt(v) for v in p) for p in net.positions]
    lines.append(f"LINES {net.n_segments} {3 * net.n_segments}")
    lines += [f"2 {a} {b}" for a, b in net.conn]
    for header, n, data in (("POINT_DATA", net.n_nodes, point_data),
                            ("CELL_DATA", net.n_segments, cell_data)):
        if not data:
            continue
        lines.append(f"{header} {n}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n,):
                raise ValueError(f"{name!r} has shape {values.shape}, expected ({n},)")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [fmt(v) for v in values]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------
def package_versions():
    out = {"python": platform.python_version()}
    for name in ("hybridvasc", "numpy", "scipy", "scikit-learn"):
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = None
    return out


class Manifest:
    """Collects the artifacts of a command and writes ``manifest.json`` beside them."""

    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.outputs = []
        self._t0 = time.perf_counter()

    def add(self, path):
        self.outputs.append(Path(path).name)
        return path

    def write(self, out_dir, extra=None):
        record = {
            "command": self.command,
            "config_sha256": self.config.sha256(),
            "config": self.config.to_dict(),
            "versions": package_versions(),
            "wall_time_s": time.perf_counter() - self._t0,
            "outputs": sorted(self.outputs),
        }
        if extra:
            record.update(extra)
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        return path
