"""Command-line driver.

Every subcommand writes its artifacts and a ``manifest.json`` into the
output directory. Failures print one JSON error record on stderr and exit
nonzero (2 for usage or configuration errors, 1 otherwise).
"""
import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .calibration import boundary_sensitivity, calibrate_alpha
from .config import RunConfig, load_config
from .exceptions import HybridVascError
from .fully_discrete import FdProblem, solve_fd
from .grid import UniformGrid, decompose_revs
from .hybrid import HybridSetup, solve_hybrid
from .metrics import fd_flux_report, hybrid_flux_report, rev_pressures
from .network import load_network, save_network, split_by_threshold
from .synthetic import generate_synthetic
from .upscaling import rev_growth_study

COMMANDS = ("net-info", "generate", "upscale", "solve-fd", "solve-hybrid", "calibrate-alpha",
            "sensitivity", "rev-study")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="hybridvasc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="run configuration JSON (defaults when omitted)")
        s.add_argument("--network", help="network JSON file; overrides the config")
        s.add_argument("--out", help="output directory; overrides the config")
        s.add_argument("--seed", type=int, help="synthetic network seed; overrides the config")
        if name in ("solve-hybrid",):
            s.add_argument("--alpha", type=float, help="coupling parameter; overrides the config")
            s.add_argument("--compare", action="store_true",
                           help="also solve the fully-discrete model and report REV pressures")
        if name in ("solve-fd", "solve-hybrid", "generate"):
            s.add_argument("--no-vtk", action="store_true", help="skip the VTK files")
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.network is not None:
        changes["network"] = args.network
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "alpha", None) is not None:
        changes["alpha"] = args.alpha
    return replace(cfg, **changes) if changes else cfg


# ---------------------------------------------------------------------------
# shared setup
# ---------------------------------------------------------------------------
def _network(cfg):
    if cfg.network is not None:
        return load_network(cfg.network)
    return generate_synthetic(cfg.synthetic, cfg.seed)


def _box(cfg, net):
    if cfg.domain is None and cfg.network is not None:
        raise ValueError("a network file needs an explicit domain box in the config")
    return cfg.box


def _hybrid_setup(cfg, net):
    lo, hi = _box(cfg, net)
    grid = UniformGrid(lo, hi, cfg.grid)
    large, cap = split_by_threshold(net, cfg.params.R_T)
    revs = decompose_revs(grid, cfg.rev, net, cap, large)
    return HybridSetup(net, revs, cfg.params, cfg.numerics, large, cap)


def _fd(cfg, net, setup):
    prob = FdProblem(net, setup.grid, cfg.params, cfg.numerics, setup.capillary_ids)
    sol = solve_fd(prob)
    return prob, sol, fd_flux_report(prob, sol, setup.revs, setup.large_ids)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def cmd_net_info(cfg, args, out, man):
    net = _network(cfg)
    large, cap = split_by_threshold(net, cfg.params.R_T)
    info = {
        "n_nodes": int(net.n_nodes),
        "n_segments": int(net.n_segments),
        "n_boundary_nodes": int(net.is_boundary.sum()),
        "radius_min_m": float(net.radius.min()),
        "radius_max_m": float(net.radius.max()),
        "n_large_segments": len(large),
        "n_capillary_segments": len(cap),
        "bounding_box_m": [net.positions.min(axis=0).tolist(), net.positions.max(axis=0).tolist()],
    }
    print(json.dumps(info, indent=2))
    path = out / "net_info.json"
    path.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    man.add(path)


def cmd_generate(cfg, args, out, man):
    net = generate_synthetic(cfg.synthetic, cfg.seed)
    save_network(net, out / "network.json")
    man.add(out / "network.json")
    if not args.no_vtk:
        man.add(io.write_vtk_network(out / "network.vtk", net))
    print(f"wrote {net.n_nodes} nodes and {net.n_segments} segments to {out}")


def cmd_upscale(cfg, args, out, man):
    net = _network(cfg)
    setup = _hybrid_setup(cfg, net)
    c = setup.coefficients
    rows = [[b.id, *b.center, *c.K[j], c.mu_up[j], c.S[j], c.bvf[j], c.Kv_bar[j],
             c.radius_mean[j], c.radius_std[j], c.n_capillaries[j]]
            for j, b in enumerate(setup.revs.boxes)]
    man.add(io.write_csv(out / "rev_coefficients.csv",
                         ["rev", "center_x", "center_y", "center_z", "k_x", "k_y", "k_z",
                          "mu_up", "S", "bvf", "Kv_bar", "radius_mean", "radius_std",
                          "n_capillaries"], rows))


def cmd_solve_fd(cfg, args, out, man):
    net = _network(cfg)
    setup = _hybrid_setup(cfg, net)
    prob, sol, rep = _fd(cfg, net, setup)
    man.add(io.write_flux_report(out / "fd_fluxes.csv", rep))
    man.add(io.write_rev_fluxes(out / "fd_rev_fluxes.csv", rep))
    man.add(io.write_node_pressures(out / "fd_p_v.csv", net, sol.p_v))
    if not args.no_vtk:
        man.add(io.write_vtk_cells(out / "fd_tissue.vtk", prob.grid, {"p_t": sol.p_t}))
        man.add(io.write_vtk_network(out / "fd_network.vtk", net, {"p_v": sol.p_v}))
    return {"audit": sol.audit}


def cmd_solve_hybrid(cfg, args, out, man):
    net = _network(cfg)
    setup = _hybrid_setup(cfg, net)
    sol = solve_hybrid(setup, cfg.alpha)
    rep = hybrid_flux_report(setup, sol)
    reports = [rep]
    if args.compare:
        _, fd_sol, fd_rep = _fd(cfg, net, setup)
        reports.append(fd_rep)
        centers = [b.center for b in setup.revs.boxes]
        man.add(io.write_rev_pressures(out / "rev_pressures.csv",
                                       rev_pressures(sol, fd_sol, setup), centers))
    man.add(io.write_flux_report(out / "hybrid_fluxes.csv", *reports))
    man.add(io.write_rev_fluxes(out / "hybrid_rev_fluxes.csv", rep))
    man.add(io.write_node_pressures(out / "hybrid_p_v.csv", net, sol.p_v, setup.large_nodes))
    if not args.no_vtk:
        man.add(io.write_vtk_cells(out / "hybrid_fields.vtk", setup.grid,
                                   {"p_cap": sol.p_cap, "p_t": sol.p_t,
                                    "rev": setup.revs.rev_of_cell().astype(float)}))
        man.add(io.write_vtk_network(out / "hybrid_network.vtk", net.subnetwork(setup.large_mask),
                                     {"p_v": sol.p_v[setup.large_nodes]}))
    return {"audit": sol.audit}


def cmd_calibrate(cfg, args, out, man):
    net = _network(cfg)
    setup = _hybrid_setup(cfg, net)
    _, _, fd_rep = _fd(cfg, net, setup)
    scan = calibrate_alpha(setup, fd_rep, cfg.alpha_grid.array())
    man.add(io.write_alpha_scan(out / "alpha_scan.csv", scan))
    man.add(io.write_flux_report(out / "fd_fluxes.csv", fd_rep))
    print(f"alpha* (f1) = {scan.argmin_f1:g}, alpha* (f2) = {scan.argmin_f2:g}")
    return {"argmin_f1": scan.argmin_f1, "argmin_f2": scan.argmin_f2}


def cmd_sensitivity(cfg, args, out, man):
    net = _network(cfg)
    setup = _hybrid_setup(cfg, net)
    rows = boundary_sensitivity(setup, cfg.sensitivity_fractions, cfg.alpha_grid.array())
    man.add(io.write_sensitivity(out / "sensitivity.csv", rows))
    a = [r.alpha_star for r in rows]
    print(f"alpha* ranges over [{min(a):g}, {max(a):g}]")
    return {"alpha_star_min": min(a), "alpha_star_max": max(a)}


def cmd_rev_study(cfg, args, out, man):
    net = _network(cfg)
    lo, hi = _box(cfg, net)
    center = (np.add(lo, hi) / 2 if cfg.rev_study_center is None
              else np.asarray(cfg.rev_study_center))
    cap = split_by_threshold(net, cfg.params.R_T)[1]
    rows = rev_growth_study(net, center, cfg.rev_study_sizes, cap, cfg.params, cfg.numerics,
                            (lo, hi))
    man.add(io.write_growth(out / "rev_growth.csv", rows))


_HANDLERS = {
    "net-info": cmd_net_info, "generate": cmd_generate, "upscale": cmd_upscale,
    "solve-fd": cmd_solve_fd, "solve-hybrid": cmd_solve_hybrid,
    "calibrate-alpha": cmd_calibrate, "sensitivity": cmd_sensitivity, "rev-study": cmd_rev_study,
}


def _fail(kind, exc, command, code):
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc), "command": command}
    print(json.dumps(record), file=sys.stderr)
    return code


def run(argv=None):
    """Run one command; returns the process exit status."""
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        cfg = resolve_config(args)
    except UsageError as exc:
        return _fail("usage", exc, command, 2)
    except (ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        return _fail("config", exc, command, 2)
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        man = io.Manifest(command, cfg)
        extra = _HANDLERS[command](cfg, args, out, man)
        man.write(out, extra)
    except (HybridVascError, ValueError, OSError) as exc:
        return _fail("runtime", exc, command, 1)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
