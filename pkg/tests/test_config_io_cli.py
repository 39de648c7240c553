import json
import subprocess
import sys

import numpy as np
import pytest

from hybridvasc import io
from hybridvasc.cli import run
from hybridvasc.config import RunConfig, load_config, save_config
from hybridvasc.estimators import AlphaCalibrator, FullyDiscreteModel, HybridModel, RevUpscaler
from hybridvasc.grid import UniformGrid
from hybridvasc.params import PhysicalParams

REFERENCE_DEFAULTS = {"H": 0.45, "K_t": 1e-18, "mu_int": 1.3e-3, "mu_p": 1e-3,
                      "rho_bl": 1030.0, "rho_int": 1000.0, "pi_p": 3300.0, "pi_int": 666.0,
                      "L_cap": 1e-12}


# -- configuration -----------------------------------------------------------
def test_defaults_match_reference_table():
    d = PhysicalParams().to_dict()
    for k, v in REFERENCE_DEFAULTS.items():
        assert d[k] == v


def test_config_round_trip_bit_exact(tmp_path):
    cfg = RunConfig()
    save_config(cfg, tmp_path / "c.json")
    back = load_config(tmp_path / "c.json")
    assert back == cfg and back.dumps() == cfg.dumps() and back.sha256() == cfg.sha256()
    for k, v in REFERENCE_DEFAULTS.items():
        assert getattr(back.params, k) == v
    other = RunConfig.from_dict({**cfg.to_dict(), "alpha": 0.41})
    assert other.sha256() != cfg.sha256()


def test_config_top_level_params_and_errors():
    cfg = RunConfig.from_dict({"H": 0.3, "grid": [8, 8, 8]})
    assert cfg.params.H == 0.3 and cfg.grid == (8, 8, 8)
    for bad in ({"nonsense": 1}, {"grid": [8, 8, 7]}, {"alpha": 1.5},
                {"params": {"K_t": -1.0}}, {"domain": {"lo": [0, 0, 0], "hi": [1, 0, 1]}}):
        with pytest.raises(ValueError):
            RunConfig.from_dict(bad)


# -- tables and VTK -----------------------------------------------------------
def test_csv_round_trips_floats(tmp_path):
    vals = [np.pi, 1e-300, -2.5e-17, 1.0 / 3.0]
    io.write_csv(tmp_path / "a.csv", ["v"], [[v] for v in vals])
    header, rows = io.read_csv(tmp_path / "a.csv")
    assert header == ["v"] and [float(r[0]) for r in rows] == vals
    io.write_csv(tmp_path / "b.csv", ["v"], [[v] for v in vals])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert io.fmt(3) == "3" and io.fmt(None) == ""


def test_vtk_headers(tmp_path, two_node):
    g = UniformGrid((0, 0, 0), (1, 2, 3), (2, 3, 4))
    text = io.write_vtk_cells(tmp_path / "c.vtk", g, {"p": np.arange(24.0)}).read_text()
    lines = text.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "DIMENSIONS 3 4 5" in lines and "CELL_DATA 24" in lines
    with pytest.raises(ValueError):
        io.write_vtk_cells(tmp_path / "d.vtk", g, {"p": np.zeros(3)})
    text = io.write_vtk_network(tmp_path / "n.vtk", two_node, {"p_v": [1.0, 2.0]}).read_text()
    assert "POINTS 2 double" in text and "LINES 1 3" in text and "POINT_DATA 2" in text


# -- command line ---------------------------------------------------------------
def small_config(tmp_path, **kw):
    cfg = RunConfig.from_dict({"grid": [8, 8, 8], "output_dir": str(tmp_path / "out"), **kw})
    save_config(cfg, tmp_path / "cfg.json")
    return str(tmp_path / "cfg.json")


def test_net_info_on_file(tmp_path, two_node_doc, capsys):
    (tmp_path / "net.json").write_text(json.dumps(two_node_doc))
    cfg = small_config(tmp_path, network=str(tmp_path / "net.json"),
                       domain={"lo": [0, -1e-4, -1e-4], "hi": [1e-4, 1e-4, 1e-4]})
    assert run(["net-info", "--config", cfg]) == 0
    info = json.loads((tmp_path / "out" / "net_info.json").read_text())
    assert info["n_nodes"] == 2 and info["n_segments"] == 1 and info["n_boundary_nodes"] == 2
    assert info["radius_min_m"] == 4e-6
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["command"] == "net-info" and man["outputs"] == ["net_info.json"]


def test_solve_hybrid_manifest_and_reproducibility(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "out"
    assert run(["solve-hybrid", "--config", cfg, "--no-vtk"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["params"]["H"] == 0.45 and man["config"]["params"]["L_cap"] == 1e-12
    assert man["config_sha256"] == load_config(cfg).sha256()
    first = (out / "hybrid_fluxes.csv").read_bytes()
    assert run(["solve-hybrid", "--config", cfg, "--no-vtk"]) == 0
    assert (out / "hybrid_fluxes.csv").read_bytes() == first
    header, rows = io.read_csv(out / "hybrid_fluxes.csv")
    assert header[0] == "model" and rows[0][0] == "HY"


def test_error_exit_codes(tmp_path, capsys):
    assert run(["no-such-command"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"
    assert run(["net-info", "--config", str(tmp_path / "missing.json")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"
    # a network file without a domain box fails while solving
    (tmp_path / "bad.json").write_text('{"nodes": [], "segments": []}')
    assert run(["upscale", "--network", str(tmp_path / "bad.json"),
                "--out", str(tmp_path / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "runtime"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hybridvasc", "net-info", "--out",
                        str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["n_segments"] > 0


# -- estimators ---------------------------------------------------------------
def test_estimators_on_reference(reference_net, setup16):
    up = RevUpscaler().fit(reference_net)
    assert up.transform().shape == (8, 6)
    np.testing.assert_array_equal(up.K_, setup16.coefficients.K)
    hy = HybridModel(alpha=0.4).fit(reference_net, setup=setup16)
    pts = np.array([[2e-4, 2e-4, 2e-4], [1.0, 1.0, 1.0]])
    pred = hy.predict(pts)
    assert pred.shape == (2, 2) and np.all(np.isfinite(pred[0])) and np.all(np.isnan(pred[1]))
    assert hy.get_params()["alpha"] == 0.4
    with pytest.raises(ValueError):
        HybridModel(alpha=1.0).fit(reference_net, setup=setup16)


def test_alpha_calibrator_small(reference_net):
    cal = AlphaCalibrator(alphas=[0.3, 0.5], grid_shape=(8, 8, 8)).fit(reference_net)
    assert cal.alpha_ in (0.3, 0.5) and cal.score() <= 0
    fd = FullyDiscreteModel(grid_shape=(8, 8, 8)).fit(reference_net)
    assert fd.p_t_.shape == (512,)
