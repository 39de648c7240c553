"""Scan of the terminal coupling parameter and its sensitivity to boundary pressures."""
from dataclasses import dataclass

import numpy as np

from .exceptions import HybridVascError
from .fully_discrete import FdProblem, solve_fd
from .hybrid import HybridSetup, solve_hybrid
from .metrics import fd_flux_report, hybrid_flux_report, objective_f1, objective_f2


class CalibrationAborted(HybridVascError, RuntimeError):
    """A hybrid solve failed during a scan; ``partial`` holds the rows done so far."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def default_alpha_grid(step=0.01, lo=0.05, hi=0.95):
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


@dataclass(frozen=True)
class ScanRow:
    alpha: float
    f1: float
    f2: float
    MF_LV_in: float


@dataclass(frozen=True)
class ScanResult:
    rows: tuple
    argmin_f1: float
    argmin_f2: float

    @property
    def alphas(self):
        return np.array([r.alpha for r in self.rows])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])


def _argmin(alphas, values):
    # rows are sorted by alpha, so the first minimum is the smallest alpha
    return float(alphas[int(np.argmin(values))])


def calibrate_alpha(setup, fd_report, alphas=None):
    """One hybrid solve per alpha; objectives against the fully-discrete report.

    The grid is sorted before scanning, so the table and the argmins do not
    depend on the order in which ``alphas`` is given. Ties go to the smaller
    alpha.
    """
    alphas = default_alpha_grid() if alphas is None else np.asarray(alphas, dtype=float)
    alphas = np.unique(alphas)
    if alphas.size == 0 or np.any(alphas <= 0) or np.any(alphas >= 1):
        raise ValueError("alpha grid must be a non-empty subset of (0, 1)")
    rows = []
    for a in alphas:
        try:
            sol = solve_hybrid(setup, float(a))
        except Exception as exc:
            raise CalibrationAborted(f"hybrid solve failed at alpha={a:g}: {exc}",
                                     tuple(rows)) from exc
        rep = hybrid_flux_report(setup, sol)
        rows.append(ScanRow(float(a), objective_f1(rep, fd_report), objective_f2(rep, fd_report),
                            rep.MF_LV_in))
    f1 = np.array([r.f1 for r in rows])
    f2 = np.array([r.f2 for r in rows])
    return ScanResult(tuple(rows), _argmin(alphas, f1), _argmin(alphas, f2))


def boundary_delta(net, large_ids):
    """``|mean venous - mean arterial|`` over the large-vessel boundary pressures.

    Returns ``(delta, arterial_nodes, venous_nodes)``.
    """
    lmask = np.isin(net.segment_ids, np.fromiter(large_ids, np.int64))
    touch = np.zeros(net.n_nodes, dtype=bool)
    touch[net.conn[lmask].ravel()] = True
    nodes = np.flatnonzero(touch & net.is_boundary)
    cls = net.vessel_class[nodes]
    bad = nodes[(cls != "arterial") & (cls != "venous")]
    if bad.size:
        raise ValueError(f"large-vessel boundary nodes without an arterial/venous label: "
                         f"{net.node_ids[bad].tolist()}")
    art, ven = nodes[cls == "arterial"], nodes[cls == "venous"]
    if art.size == 0 or ven.size == 0:
        raise ValueError("need both arterial and venous large-vessel boundary nodes")
    p = net.boundary_pressure
    return abs(float(np.mean(p[ven])) - float(np.mean(p[art]))), art, ven


def shift_boundary(net, large_ids, fraction):
    """Raise arterial and lower venous boundary pressures by ``delta * fraction / 2``."""
    delta, art, ven = boundary_delta(net, large_ids)
    bp = net.boundary_pressure.copy()
    bp[art] += 0.5 * delta * fraction
    bp[ven] -= 0.5 * delta * fraction
    return net.with_boundary_pressure(bp), delta


@dataclass(frozen=True)
class SensitivityRow:
    fraction: float
    alpha_star: float
    delta: float


def boundary_sensitivity(setup, fractions, alphas=None, fd_grid=None):
    """Calibrated alpha (objective f2) for shifted large-vessel boundary pressures.

    The fully-discrete reference is recomputed for every shift; the
    upscaled coefficients and the capillary boundary field do not depend on
    the shifted pressures and are reused.
    """
    grid = setup.grid if fd_grid is None else fd_grid
    rows = []
    for i in sorted(float(f) for f in fractions):
        net_i, delta = shift_boundary(setup.net, setup.large_ids, i)
        setup_i = HybridSetup(net_i, setup.revs, setup.params, setup.numerics, setup.large_ids,
                              setup.capillary_ids, setup.coefficients, setup.boundary_field)
        fd_prob = FdProblem(net_i, grid, setup.params, setup.numerics, setup.capillary_ids)
        fd_rep = fd_flux_report(fd_prob, solve_fd(fd_prob), setup.revs, setup.large_ids)
        scan = calibrate_alpha(setup_i, fd_rep, alphas)
        rows.append(SensitivityRow(i, scan.argmin_f2, delta))
    return tuple(rows)
