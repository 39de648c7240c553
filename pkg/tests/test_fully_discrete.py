import numpy as np
import pytest

from conftest import make_network
from hybridvasc.exceptions import SingularSystemError
from hybridvasc.fully_discrete import (FdProblem, assemble_fd, build_circle_stencils,
                                       circle_average, require_tissue, solve_fd)
from hybridvasc.grid import UniformGrid
from hybridvasc.params import Numerics, PhysicalParams
from hybridvasc.vgm import assemble_vgm, solve_vgm

CUBE = ((0.0, 0.0, 0.0), (1e-4, 1e-4, 1e-4))


def one_capillary(p_in=4000.0, p_out=3000.0, R=3e-6):
    """A straight capillary along x through the middle of a 100 um cube."""
    nodes = [(0, 5.1e-5, 4.9e-5), (2.5e-5, 5.1e-5, 4.9e-5), (5e-5, 5.1e-5, 4.9e-5),
             (7.5e-5, 5.1e-5, 4.9e-5), (1e-4, 5.1e-5, 4.9e-5)]
    return make_network(nodes, [(i, i + 1, R) for i in range(4)],
                        bp=[p_in, np.nan, np.nan, np.nan, p_out])


# -- circle average ----------------------------------------------------------
def test_uniform_field():
    g = UniformGrid(*CUBE, (8, 8, 8))
    st = build_circle_stencils(g, [[5e-5, 5e-5, 5e-5]], [[0, 0, 1.0]], [3e-6])
    assert circle_average(np.full(g.n_cells, 7.0), st)[0] == pytest.approx(7.0)
    np.testing.assert_allclose(st.weights.sum(axis=1), 1.0)


def test_linear_field_symmetric_circle():
    g = UniformGrid(*CUBE, (8, 8, 8))
    field = 3.0 * g.centers()[:, 0]
    # circle around a cell centre spanning its neighbours: opposite samples
    # fall into mirror cells of the x-linear field
    c = g.centers([g.flat(4, 4, 4)])
    st = build_circle_stencils(g, c, [[0, 0, 1.0]], [0.8 * g.h[0]], n_theta=8, sampling="nearest")
    assert len(np.unique(st.cells)) > 1
    assert circle_average(field, st)[0] == pytest.approx(3.0 * c[0, 0], rel=1e-12)


def test_trilinear_reproduces_linear_field():
    g = UniformGrid(*CUBE, (8, 8, 8))
    x = g.centers()
    field = 2.0 + 3e4 * x[:, 0] - 1e4 * x[:, 1] + 5e3 * x[:, 2]
    rng = np.random.default_rng(4)
    c = rng.uniform(2e-5, 8e-5, (20, 3))
    t = rng.normal(size=(20, 3))
    t /= np.linalg.norm(t, axis=1)[:, None]
    st = build_circle_stencils(g, c, t, np.full(20, 4e-6), n_theta=3)
    exact = 2.0 + 3e4 * c[:, 0] - 1e4 * c[:, 1] + 5e3 * c[:, 2]
    np.testing.assert_allclose(circle_average(field, st), exact, rtol=1e-12)
    assert np.all(st.weights >= 0)


def test_nearest_shares_samples_on_faces():
    g = UniformGrid(*CUBE, (4, 4, 4))
    field = np.arange(64.0)
    # both samples (offset along y) lie on the x face between cells 1 and 2,
    # so each one averages the two cells across it
    c = [[5e-5, 5e-5, 3.75e-5]]
    st = build_circle_stencils(g, c, [[0, 0, 1.0]], [1e-5], n_theta=2, sampling="nearest")
    assert st.weights.sum() == pytest.approx(1.0)
    cells = set(st.cells[st.weights > 0].tolist())
    assert len(cells) == 4
    ring = [g.flat(1, 1, 1), g.flat(1, 2, 1), g.flat(2, 1, 1), g.flat(2, 2, 1)]
    assert circle_average(field, st)[0] == pytest.approx(field[ring].mean())


@pytest.mark.parametrize("sampling", ["trilinear", "nearest"])
def test_quadrature_refinement_on_smooth_field(sampling):
    g = UniformGrid(*CUBE, (16, 16, 16))
    x = g.centers()
    field = 1e8 * ((x[:, 0] - 4e-5) ** 2 + 0.5 * (x[:, 1] - 6e-5) ** 2) + x[:, 2] * 1e4
    rng = np.random.default_rng(0)
    c = rng.uniform(2e-5, 8e-5, (30, 3))
    t = rng.normal(size=(30, 3))
    t /= np.linalg.norm(t, axis=1)[:, None]
    a = circle_average(field, build_circle_stencils(g, c, t, np.full(30, 3e-6), 8, sampling))
    b = circle_average(field, build_circle_stencils(g, c, t, np.full(30, 3e-6), 256, sampling))
    h = g.h[0]
    grad = 1e8 * 2 * 6e-5 + 1e4
    assert np.max(np.abs(a - b)) <= grad * h


@pytest.mark.parametrize("sampling", ["trilinear", "nearest"])
def test_outside_points_dropped_and_renormalized(sampling):
    g = UniformGrid(*CUBE, (4, 4, 4))
    st = build_circle_stencils(g, [[0.0, 5.1e-5, 5.1e-5]], [[0, 0, 1.0]], [3e-6], 8, sampling)
    full = build_circle_stencils(g, [[5e-6, 5.1e-5, 5.1e-5]], [[0, 0, 1.0]], [3e-6], 8, sampling)
    assert st.weights[0].sum() == pytest.approx(1.0)
    # half the samples leave the domain, so each survivor carries twice the weight
    assert st.weights[0].max() > full.weights[0].max()
    with pytest.raises(ValueError):
        build_circle_stencils(g, [[-1e-3, 5e-5, 5e-5]], [[0, 0, 1.0]], [3e-6])
    with pytest.raises(ValueError):
        build_circle_stencils(g, [[5e-5] * 3], [[0, 0, 1.0]], [3e-6], sampling="cubic")


# -- model -------------------------------------------------------------------
def test_switch_off_limit():
    net = one_capillary()
    g = UniformGrid(*CUBE, (4, 4, 4))
    sol = solve_fd(FdProblem(net, g, PhysicalParams(L_cap=0.0)))
    assert sol.tissue_singular and np.all(np.isnan(sol.p_t))
    with pytest.raises(SingularSystemError):
        require_tissue(sol)
    p = solve_vgm(assemble_vgm(net, PhysicalParams(L_cap=0.0)))
    np.testing.assert_array_equal(sol.p_v, p)


def test_global_equilibrium():
    net = one_capillary(3500.0, 3500.0)
    g = UniformGrid(*CUBE, (4, 4, 4))
    params = PhysicalParams(pi_p=1000.0, pi_int=1000.0)
    sol = solve_fd(FdProblem(net, g, params))
    # tissue rows are ~1e-5 the size of network rows, so the norm-wise
    # residual contract pins p_t to about 1e-8 relative
    np.testing.assert_allclose(sol.p_v, 3500.0, rtol=1e-9)
    np.testing.assert_allclose(sol.p_t, 3500.0, rtol=1e-6)
    # the leftover exchange amounts to well under a millipascal of wall pressure drop
    assert abs(sol.audit["net_exchange"]) <= 1e-3 * sol.system.exchange_coef.sum()


def test_manufactured_equilibrium_with_oncotic_gap():
    net = one_capillary(3500.0, 3500.0)
    g = UniformGrid(*CUBE, (4, 4, 4))
    params = PhysicalParams()
    sol = solve_fd(FdProblem(net, g, params))
    np.testing.assert_allclose(sol.p_v, 3500.0, rtol=1e-9)
    np.testing.assert_allclose(sol.p_t, 3500.0 - params.oncotic_gap, rtol=1e-6)


def test_single_capillary_tissue_bound():
    net = one_capillary()
    g = UniformGrid(*CUBE, (8, 8, 8))
    params = PhysicalParams()
    sol = solve_fd(FdProblem(net, g, params))
    lo = np.nanmin(sol.p_v) - params.oncotic_gap
    hi = np.nanmax(sol.p_v) - params.oncotic_gap
    assert np.all(sol.p_t >= lo - 1e-6) and np.all(sol.p_t <= hi + 1e-6)


def test_antisymmetric_coupling(fd16):
    prob, sol, _ = fd16
    sums = sol.system.coupling_sums()
    assert set(sums) == {"exchange", "exchange:rhs"}
    assert all(v == 0.0 for v in sums.values())


def test_conservation_audit(fd16):
    _, sol, _ = fd16
    a = sol.audit
    assert a["relative_imbalance"] <= 1e-8
    assert a["inflow"] - a["outflow"] == pytest.approx(a["net_exchange"], rel=1e-6)


def test_no_exchange_reproduces_vgm_bit_for_bit(reference_net):
    g = UniformGrid((0, 0, 0), (4e-4,) * 3, (4, 4, 4))
    sys_fd = assemble_fd(FdProblem(reference_net, g, capillary_ids=frozenset()))
    sys_v = assemble_vgm(reference_net, PhysicalParams())
    nc = g.n_cells
    Av = sys_fd.A[nc:, nc:]
    assert (Av != sys_v.A).nnz == 0
    assert sys_fd.A[nc:, :nc].nnz == 0 and sys_fd.A[:nc, nc:].nnz == 0
    assert np.array_equal(sys_fd.b[nc:], sys_v.b)


def test_tissue_block_diagonal_augmented():
    net = one_capillary()
    g = UniformGrid(*CUBE, (4, 4, 4))
    with_ex = assemble_fd(FdProblem(net, g))
    without = assemble_fd(FdProblem(net, g, capillary_ids=frozenset()))
    d = with_ex.A.diagonal()[:g.n_cells] - without.A.diagonal()[:g.n_cells]
    assert np.all(d >= 0) and np.any(d > 0)


def test_more_stations_converge():
    net = one_capillary()
    g = UniformGrid(*CUBE, (8, 8, 8))
    ex = [solve_fd(FdProblem(net, g, stations_per_half_edge=q)).audit["net_exchange"]
          for q in (1, 4)]
    assert ex[1] == pytest.approx(ex[0], rel=0.05)


def test_direct_and_iterative_agree():
    net = one_capillary()
    g = UniformGrid(*CUBE, (4, 4, 4))
    a = solve_fd(FdProblem(net, g))
    b = solve_fd(FdProblem(net, g, numerics=Numerics(method="direct")))
    np.testing.assert_allclose(a.p_t, b.p_t, rtol=1e-6)
    np.testing.assert_allclose(a.p_v, b.p_v, rtol=1e-9)
