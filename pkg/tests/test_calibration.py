import numpy as np
import pytest

import hybridvasc.calibration as calib
from conftest import make_network
from hybridvasc.calibration import (CalibrationAborted, boundary_delta, boundary_sensitivity,
                                    calibrate_alpha, default_alpha_grid, shift_boundary)
from hybridvasc.exceptions import ConvergenceError

GRID = [0.3, 0.4, 0.42, 0.5]


def star_network(art=(4000.0,), ven=(1000.0,)):
    """Large vessels from a centre node to labelled boundary nodes."""
    nodes = [(5e-5, 5e-5, 5e-5)] + [(0, 1e-5 * k, 0) for k in range(len(art) + len(ven))]
    bp = [np.nan, *art, *ven]
    cls = ["capillary"] + ["arterial"] * len(art) + ["venous"] * len(ven)
    segs = [(0, k, 1e-5) for k in range(1, len(nodes))]
    return make_network(nodes, segs, bp=bp, cls=cls)


def test_default_grid():
    g = default_alpha_grid()
    assert g.size == 91 and g[0] == 0.05 and g[-1] == 0.95
    assert np.allclose(np.diff(g), 0.01)


def test_singleton_grid(setup16, fd16):
    scan = calibrate_alpha(setup16, fd16[2], [0.4])
    assert scan.argmin_f1 == scan.argmin_f2 == 0.4
    assert len(scan.rows) == 1


def test_order_invariance_and_determinism(setup16, fd16):
    a = calibrate_alpha(setup16, fd16[2], GRID)
    b = calibrate_alpha(setup16, fd16[2], GRID[::-1])
    c = calibrate_alpha(setup16, fd16[2], GRID)
    assert a == b == c
    np.testing.assert_array_equal(a.alphas, sorted(GRID))
    assert a.argmin_f2 in GRID


def test_invalid_grid(setup16, fd16):
    for bad in ([], [0.0, 0.4], [0.5, 1.0], [-0.1]):
        with pytest.raises(ValueError):
            calibrate_alpha(setup16, fd16[2], bad)


def test_aborted_scan_keeps_partial_rows(setup16, fd16, monkeypatch):
    real = calib.solve_hybrid

    def flaky(setup, alpha, **kw):
        if alpha > 0.41:
            raise ConvergenceError("stalled", 1.0)
        return real(setup, alpha, **kw)

    monkeypatch.setattr(calib, "solve_hybrid", flaky)
    with pytest.raises(CalibrationAborted) as exc:
        calibrate_alpha(setup16, fd16[2], GRID)
    assert [r.alpha for r in exc.value.partial] == [0.3, 0.4]


def test_boundary_delta_example():
    delta, art, ven = boundary_delta(star_network(), {0, 1})
    assert delta == 3000.0 and art.size == 1 and ven.size == 1
    d2, _, _ = boundary_delta(star_network((8000.0, 6000.0), (2000.0,)), {0, 1, 2})
    assert d2 == 5000.0


def test_shift_boundary():
    net = star_network()
    same, _ = shift_boundary(net, {0, 1}, 0.0)
    np.testing.assert_array_equal(same.boundary_pressure, net.boundary_pressure)
    up, delta = shift_boundary(net, {0, 1}, 0.1)
    assert up.boundary_pressure[1] == 4000.0 + 150.0
    assert up.boundary_pressure[2] == 1000.0 - 150.0


def test_unlabelled_boundary_rejected():
    net = star_network()
    cls = net.vessel_class.copy()
    cls[2] = "capillary"
    bad = make_network(net.positions, [(0, 1, 1e-5), (0, 2, 1e-5)],
                       bp=net.boundary_pressure, cls=cls)
    with pytest.raises(ValueError):
        boundary_delta(bad, {0, 1})


def test_sensitivity_zero_shift_is_baseline(setup16, fd16):
    base = calibrate_alpha(setup16, fd16[2], GRID)
    rows = boundary_sensitivity(setup16, [0.0], GRID)
    assert rows[0].alpha_star == base.argmin_f2
    assert rows[0].delta == pytest.approx(6000.0)
