"""Estimator-style wrappers around the functional core.

``fit`` takes a :class:`VascularNetwork` instead of a feature matrix; the
fitted state lives in trailing-underscore attributes. ``predict`` maps query
points of shape ``(n, 3)`` to pressures of the cell containing them.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .calibration import calibrate_alpha, default_alpha_grid
from .fully_discrete import FdProblem, solve_fd
from .grid import UniformGrid, decompose_revs
from .hybrid import HybridSetup, solve_hybrid
from .metrics import fd_flux_report, hybrid_flux_report
from .network import VascularNetwork, split_by_threshold
from .params import Numerics, PhysicalParams


def _check_network(net):
    if not isinstance(net, VascularNetwork):
        raise TypeError(f"expected a VascularNetwork, got {type(net).__name__}")
    return net


def _domain(net, domain):
    if domain is not None:
        return tuple(map(float, domain[0])), tuple(map(float, domain[1]))
    return tuple(net.positions.min(axis=0)), tuple(net.positions.max(axis=0))


def _cell_values(grid, field, X):
    X = check_array(X, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"expected points of shape (n, 3), got {X.shape}")
    cells = grid.locate(X)
    out = np.full(len(X), np.nan)
    ok = cells >= 0
    out[ok] = field[cells[ok]]
    return out


class _ModelBase(BaseEstimator):
    def _params(self):
        return self.params if self.params is not None else PhysicalParams()

    def _numerics(self):
        return self.numerics if self.numerics is not None else Numerics()

    def _grid(self, net):
        lo, hi = _domain(net, self.domain)
        return UniformGrid(lo, hi, self.grid_shape)

    def _split(self, net):
        return split_by_threshold(net, self._params().R_T)


class RevUpscaler(_ModelBase):
    """Homogenised capillary coefficients of every REV.

    Fitted attributes: ``revs_``, ``coefficients_``, ``K_`` (n_rev, 3) and
    ``bvf_``.
    """

    def __init__(self, rev_counts=(2, 2, 2), grid_shape=(16, 16, 16), domain=None,
                 params=None, numerics=None):
        self.rev_counts = rev_counts
        self.grid_shape = grid_shape
        self.domain = domain
        self.params = params
        self.numerics = numerics

    def fit(self, net, y=None):
        net = _check_network(net)
        large, cap = self._split(net)
        self.revs_ = decompose_revs(self._grid(net), self.rev_counts, net, cap, large)
        self.setup_ = HybridSetup(net, self.revs_, self._params(), self._numerics(), large, cap)
        self.coefficients_ = self.setup_.coefficients
        self.K_ = self.coefficients_.K
        self.bvf_ = self.coefficients_.bvf
        return self

    def transform(self, net=None):
        """Per-REV table ``[k_x, k_y, k_z, mu_up, S, bvf]``."""
        check_is_fitted(self, "coefficients_")
        c = self.coefficients_
        return np.column_stack([c.K, c.mu_up, c.S, c.bvf])


class FullyDiscreteModel(_ModelBase):
    """Tissue continuum coupled to every vessel of the network.

    Fitted attributes: ``grid_``, ``solution_``, ``p_v_``, ``p_t_``.
    """

    def __init__(self, grid_shape=(16, 16, 16), domain=None, params=None, numerics=None):
        self.grid_shape = grid_shape
        self.domain = domain
        self.params = params
        self.numerics = numerics

    def fit(self, net, y=None):
        net = _check_network(net)
        self.grid_ = self._grid(net)
        self.problem_ = FdProblem(net, self.grid_, self._params(), self._numerics(),
                                  self._split(net)[1])
        self.solution_ = solve_fd(self.problem_)
        self.p_v_ = self.solution_.p_v
        self.p_t_ = self.solution_.p_t
        return self

    def predict(self, X):
        """Tissue pressure at the points ``X`` (nan outside the domain)."""
        check_is_fitted(self, "solution_")
        return _cell_values(self.grid_, self.p_t_, X)

    def flux_report(self, revs, large_ids=None):
        check_is_fitted(self, "solution_")
        large = self._split(self.problem_.net)[0] if large_ids is None else large_ids
        return fd_flux_report(self.problem_, self.solution_, revs, large)


class HybridModel(_ModelBase):
    """Large vessels as a graph, capillaries and tissue as two continua.

    Fitted attributes: ``setup_``, ``solution_``, ``p_v_``, ``p_cap_``,
    ``p_t_``.
    """

    def __init__(self, alpha=0.4, rev_counts=(2, 2, 2), grid_shape=(16, 16, 16), domain=None,
                 params=None, numerics=None):
        self.alpha = alpha
        self.rev_counts = rev_counts
        self.grid_shape = grid_shape
        self.domain = domain
        self.params = params
        self.numerics = numerics

    def fit(self, net, y=None, setup=None):
        """Solve on ``net``; pass a ready ``setup`` to skip the upscaling."""
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if setup is None:
            upscaler = RevUpscaler(self.rev_counts, self.grid_shape, self.domain, self.params,
                                   self.numerics).fit(net)
            setup = upscaler.setup_
        self.setup_ = setup
        self.solution_ = solve_hybrid(setup, float(self.alpha))
        self.p_v_ = self.solution_.p_v
        self.p_cap_ = self.solution_.p_cap
        self.p_t_ = self.solution_.p_t
        return self

    def predict(self, X):
        """Capillary and tissue pressure at ``X``, shape ``(n, 2)``."""
        check_is_fitted(self, "solution_")
        g = self.setup_.grid
        return np.column_stack([_cell_values(g, self.p_cap_, X), _cell_values(g, self.p_t_, X)])

    def flux_report(self):
        check_is_fitted(self, "solution_")
        return hybrid_flux_report(self.setup_, self.solution_)


class AlphaCalibrator(_ModelBase):
    """Scan of the terminal coupling parameter against the fully-discrete model.

    Fitted attributes: ``scan_``, ``alpha_`` (argmin of ``objective``),
    ``fd_report_``.
    """

    def __init__(self, alphas=None, objective="f2", rev_counts=(2, 2, 2),
                 grid_shape=(16, 16, 16), domain=None, params=None, numerics=None):
        self.alphas = alphas
        self.objective = objective
        self.rev_counts = rev_counts
        self.grid_shape = grid_shape
        self.domain = domain
        self.params = params
        self.numerics = numerics

    def fit(self, net, y=None):
        if self.objective not in ("f1", "f2"):
            raise ValueError(f"objective must be 'f1' or 'f2', got {self.objective!r}")
        up = RevUpscaler(self.rev_counts, self.grid_shape, self.domain, self.params,
                         self.numerics).fit(net)
        setup = up.setup_
        fd = FullyDiscreteModel(self.grid_shape, self.domain, self.params, self.numerics).fit(net)
        self.setup_ = setup
        self.fd_report_ = fd.flux_report(setup.revs, setup.large_ids)
        alphas = default_alpha_grid() if self.alphas is None else self.alphas
        self.scan_ = calibrate_alpha(setup, self.fd_report_, alphas)
        self.alpha_ = self.scan_.argmin_f1 if self.objective == "f1" else self.scan_.argmin_f2
        return self

    def score(self, net=None, y=None):
        """Negative objective at the calibrated alpha (larger is better)."""
        check_is_fitted(self, "scan_")
        col = self.scan_.column(self.objective)
        return -float(col[np.searchsorted(self.scan_.alphas, self.alpha_)])
