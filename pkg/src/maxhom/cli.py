"""Command-line interface: effective coefficients, germ analysis, band
dispersion, single propagation runs, and convergence sweeps, all driven
by one TOML configuration file."""

import argparse
import inspect
import json
import os
import sys

import numpy as np

from . import __version__
from .cell import SolverError, solve_cell_problems
from .coefficients import FAMILIES
from .config import ConfigError, RunConfig
from .fields import norm_l2
from .germ import analyze_germ, germ_spectrum
from .bloch import branch_fit, fiber_spectrum_sweep
from .harness import band_limited_field, sweep
from .lattice import Lattice
from .wave import TorusProblem, propagate_eps, propagate_homogenized

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4


def build_coefficients(cfg):
    family = cfg["coefficients"]["family"]
    builder = FAMILIES[family]
    kwargs = dict(cfg["coefficients"]["parameters"])
    basis = np.asarray(cfg["lattice"]["basis"], dtype=float)
    default_basis = 2.0 * np.pi * np.eye(3)
    if "lattice" in inspect.signature(builder).parameters:
        kwargs["lattice"] = Lattice(basis)
    elif not np.allclose(basis, default_basis):
        raise ConfigError(
            f"coefficient family {family!r} only supports the default cubic cell"
        )
    return builder(shape=tuple(int(s) for s in cfg["coefficients"]["cell_shape"]), **kwargs)


def _stamp(cfg, payload):
    payload["config_hash"] = cfg.hash()
    payload["version"] = __version__
    return payload


def _emit(cfg, payload, default_name):
    """Print a JSON summary and write it to the configured output path."""
    text = json.dumps(_stamp(cfg, payload), indent=2, sort_keys=True, default=_jsonable)
    print(text)
    out_dir = cfg["output"]["directory"]
    name = cfg["output"]["json"] or default_name
    if name:
        path = os.path.join(out_dir, name)
        os.makedirs(out_dir, exist_ok=True)
        with open(path, "w") as handle:
            handle.write(text + "\n")
    return payload


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def dump_field(cfg, name, array):
    """Binary float64 dump with a JSON sidecar describing the layout."""
    base = cfg["output"]["fields"]
    if not base:
        return None
    out_dir = cfg["output"]["directory"]
    os.makedirs(out_dir, exist_ok=True)
    array = np.ascontiguousarray(array, dtype=np.float64)
    bin_path = os.path.join(out_dir, f"{base}_{name}.bin")
    array.tofile(bin_path)
    meta = {
        "shape": list(array.shape),
        "dtype": "float64",
        "order": "C",
        "config_hash": cfg.hash(),
        "version": __version__,
    }
    with open(bin_path[:-4] + ".json", "w") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
    return bin_path


def cmd_print_config(cfg, args):
    print(f"# config hash: {cfg.hash()}  (version {__version__})")
    print(cfg.to_toml())
    return 0


def cmd_effective(cfg, args):
    coeffs = build_coefficients(cfg)
    corr = solve_cell_problems(
        coeffs,
        tol=cfg["solver"]["cell_tol"],
        maxiter=cfg["solver"]["cell_maxiter"],
    )
    payload = {
        "eta0": corr.eta0,
        "nu_eff": corr.nu_eff,
        "eta_mean": coeffs.eta_mean(),
        "eta_mean_harmonic": coeffs.eta_mean_harm(),
        "corrector_norms": {
            "phi": norm_l2(coeffs.lattice, corr.phi),
            "psi": norm_l2(coeffs.lattice, corr.psi),
            "sigma": norm_l2(coeffs.lattice, corr.sigma),
            "grad_rho": norm_l2(coeffs.lattice, corr.grad_rho),
        },
        "divergence_defect": corr.divergence_defect(),
    }
    _emit(cfg, payload, "effective.json")
    return 0


def cmd_germ(cfg, args):
    coeffs = build_coefficients(cfg)
    corr = solve_cell_problems(coeffs, tol=cfg["solver"]["cell_tol"])
    report = analyze_germ(
        corr,
        n_directions=cfg["germ"]["directions"],
        f_tol_rel=cfg["germ"]["f_tol_rel"],
        gap_tol_rel=cfg["germ"]["gap_tol_rel"],
    )
    payload = {
        "eta0": report.eta0,
        "nu_eff": report.nu_eff,
        "f_matrix_sym": 0.5 * (report.f_matrix + report.f_matrix.T),
        "f_vanishes": report.f_vanishes,
        "improved_time_growth": report.f_vanishes,
        "branch_relation": report.branch_relation,
        "min_gap": report.min_gap,
        "max_gap": report.max_gap,
        "gamma_bounds_ok": report.gamma_bounds_ok,
        "crossings": [list(map(float, c)) for c in report.crossings],
    }
    _emit(cfg, payload, "germ.json")
    return 0


def cmd_bloch(cfg, args):
    coeffs = build_coefficients(cfg)
    corr = solve_cell_problems(coeffs, tol=cfg["solver"]["cell_tol"])
    theta = np.asarray(cfg["bloch"]["theta"], dtype=float)
    theta = theta / np.linalg.norm(theta)
    t0 = coeffs.t0
    t_grid = np.linspace(t0 / 16.0, t0 / 4.0, cfg["bloch"]["t_count"])
    values, labels = fiber_spectrum_sweep(
        coeffs,
        theta,
        t_grid,
        cutoff=tuple(cfg["bloch"]["cutoff"]),
        m=cfg["bloch"]["branches"],
        seed=cfg["bloch"]["seed"],
        tol=cfg["solver"]["eig_tol"],
    )
    gammas, _, _ = germ_spectrum(theta, corr.eta0, corr.nu_eff, coeffs.mu0)
    fits = [branch_fit(t_grid, values[:, j]) for j in range(values.shape[1])]
    payload = {
        "theta": theta,
        "t_grid": t_grid,
        "branch_values": values,
        "branch_labels": labels,
        "branch_fits": [{"gamma": g, "mu": m_, "quartic": q} for (g, m_, q) in fits],
        "germ_gammas": gammas,
    }
    _emit(cfg, payload, "bloch.json")
    return 0


def cmd_propagate(cfg, args):
    coeffs = build_coefficients(cfg)
    corr = solve_cell_problems(coeffs, tol=cfg["solver"]["cell_tol"])
    pc = cfg["propagate"]
    n = int(pc["n"])
    from .harness import _torus_shape

    shape = _torus_shape(coeffs, n, transverse=pc["transverse"])
    f = band_limited_field(coeffs.lattice, shape, pc["seed"], max_index=pc["data_max_index"])
    phi = np.zeros_like(f)
    problem = TorusProblem(coeffs, n, shape)
    state = propagate_eps(problem, phi, f, pc["tau"])
    ref = propagate_homogenized(coeffs, corr.eta0, corr.nu_eff, shape, phi, f, pc["tau"])
    payload = {
        "n": n,
        "grid": list(shape),
        "tau": pc["tau"],
        "diagnostics": state.diagnostics,
        "e_v": norm_l2(coeffs.lattice, state.v - ref.v),
    }
    dump_field(cfg, "v_eps", state.v)
    dump_field(cfg, "v_hom", ref.v)
    _emit(cfg, payload, "propagate.json")
    return 0


def cmd_sweep(cfg, args):
    sc = cfg["sweep"]
    report = sweep(
        family=cfg["coefficients"]["family"],
        family_params=cfg["coefficients"]["parameters"],
        cell_shape=tuple(cfg["coefficients"]["cell_shape"]),
        n_list=tuple(int(n) for n in sc["n_list"]),
        tau=sc["tau"],
        seed=sc["seed"],
        phi_zero=sc["phi_zero"],
        data_max_index=sc["data_max_index"],
        transverse=sc["transverse"],
        smoothed=sc["smoothed"],
        cell_tol=cfg["solver"]["cell_tol"],
        energy_guard=sc["energy_guard"],
        dt=sc["dt"],
    )
    payload = report.to_dict()
    _emit(cfg, payload, "sweep.json")
    csv_name = cfg["output"]["csv"]
    if csv_name:
        path = os.path.join(cfg["output"]["directory"], csv_name)
        with open(path, "w") as handle:
            handle.write(report.csv_rows())
    if args.check:
        verdict = report.passed()
        failed = sorted(k for k, ok in verdict.items() if not ok)
        if failed:
            print(f"check failed: {', '.join(failed)}", file=sys.stderr)
            return EXIT_CHECK
        print("check passed")
    return 0


COMMANDS = {
    "print-config": cmd_print_config,
    "effective": cmd_effective,
    "germ": cmd_germ,
    "bloch": cmd_bloch,
    "propagate": cmd_propagate,
    "sweep": cmd_sweep,
}


def make_parser():
    parser = argparse.ArgumentParser(
        prog="maxhom",
        description="Homogenization toolkit for periodic Maxwell media",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML configuration file")
        p.add_argument("--out", default=None, help="override output JSON filename")
        p.add_argument("--csv", default=None, help="override output CSV filename")
        if name == "sweep":
            p.add_argument("--check", action="store_true",
                           help="exit nonzero unless slope criteria are met")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        if args.out:
            cfg.data["output"]["json"] = args.out
        if args.csv:
            cfg.data["output"]["csv"] = args.csv
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
