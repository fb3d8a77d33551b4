"""Command line front end: JSON configuration, subcommands, CSV/JSON artifacts.

Subcommands
-----------
background   build the flat-nozzle shock profiles and report the jump residuals
initial      locate the approximate shock position and write the linear solution
solve        run the full nonlinear iteration
verify       recompute the residual suite on stored `solve` output
sweep        repeat `solve` while varying one configuration key over a list

Exit codes: 0 success, 1 configuration error, 2 degenerate background,
3 no admissible shock position, 4 non-convergence (including CFL and
trust-region failures).  All field files are CSV with a one-line header and
17-significant-digit values, so identical configurations produce
byte-identical output.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .background import build_background, rh_residual, write_background_csv, UpstreamSpec
from .errors import (
    CflError,
    ConfigError,
    DegenerateBackgroundError,
    NoAdmissibleShockError,
    NonConvergenceError,
    RotshockError,
)
from .iteration import (
    IterationContext,
    IterationState,
    TransonicOptions,
    residuals,
    solve_transonic,
)
from .lagrangian import Geometry, LagrangianGrid, hatted_background, inlet_maps
from .profiles import profile_from_json
from .shockfit import coefficients, initial_approximation, selection_bracket
from .supersonic import PerturbationConfig, solve_linear, solve_nonlinear
from .thermo import GasModel, GasState

SCHEMA_VERSION = 1

_DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "gas": {"gamma": 1.4, "beta": 0.0},
    "nozzle": {"L": 2.0, "g": [0.0], "sigma": 0.0},
    "upstream": {"u_minus": [2.0], "M_top": 2.0, "P_top": 1.0},
    "perturbation": {"u1_en": [0.0], "u2_en": [0.0], "S_en": [0.0],
                     "B_en": [0.0], "P_ex": [0.0]},
    "solver": {"nx": 129, "ny": 65, "tol_fp": 1e-10, "tol_res": 1e-6,
               "max_iter": 50, "defect_tol": 1e-9, "psi_bracket": None,
               "psi_bar": None},
    "output": {"dir": "out", "dump_fields": False},
}

_PROFILE_KEYS = {
    ("nozzle", "g"), ("upstream", "u_minus"),
    ("perturbation", "u1_en"), ("perturbation", "u2_en"),
    ("perturbation", "S_en"), ("perturbation", "B_en"),
    ("perturbation", "P_ex"),
}


@dataclass
class RunConfig:
    """Validated configuration plus the constructed solver objects."""

    raw: dict
    gas: GasModel
    geometry: Geometry
    upstream: UpstreamSpec
    pert: PerturbationConfig
    options: TransonicOptions
    out_dir: str
    dump_fields: bool

    def to_dict(self):
        return copy.deepcopy(self.raw)


def _merge_validate(data, base_dir):
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object")
    unknown = set(data) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {data.get('schema')}")
    merged = copy.deepcopy(_DEFAULTS)
    for section, defaults in _DEFAULTS.items():
        if section == "schema":
            continue
        given = data.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{section}: expected an object")
        extra = set(given) - set(defaults)
        if extra:
            raise ConfigError(f"{section}: unknown key(s) {sorted(extra)}")
        merged[section].update(given)
    for section, key in (("gas", "gamma"), ("gas", "beta"), ("nozzle", "L"),
                         ("nozzle", "sigma"), ("upstream", "M_top"),
                         ("upstream", "P_top")):
        v = merged[section][key]
        if not isinstance(v, (int, float)):
            raise ConfigError(f"{section}.{key}: expected a number, got {v!r}")
    s = merged["solver"]
    for key in ("nx", "ny", "max_iter"):
        if not isinstance(s[key], int) or s[key] < 3:
            raise ConfigError(f"solver.{key}: expected an integer >= 3, got {s[key]!r}")
    for key in ("tol_fp", "tol_res", "defect_tol"):
        if not isinstance(s[key], (int, float)) or s[key] <= 0:
            raise ConfigError(f"solver.{key}: expected a positive number")
    if s["psi_bracket"] is not None:
        pb = s["psi_bracket"]
        if (not isinstance(pb, list) or len(pb) != 2
                or not all(isinstance(v, (int, float)) for v in pb) or pb[0] >= pb[1]):
            raise ConfigError("solver.psi_bracket: expected [lo, hi] with lo < hi")
    if s["psi_bar"] is not None and not isinstance(s["psi_bar"], (int, float)):
        raise ConfigError("solver.psi_bar: expected a number")
    out = merged["output"]
    if not isinstance(out["dir"], str):
        raise ConfigError("output.dir: expected a string")
    if not isinstance(out["dump_fields"], bool):
        raise ConfigError("output.dump_fields: expected a boolean")
    return merged


def parse_config(path) -> RunConfig:
    """Read, validate, and instantiate a run configuration."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))
    merged = _merge_validate(data, base_dir)

    profiles = {}
    for section, key in _PROFILE_KEYS:
        profiles[key] = profile_from_json(merged[section][key], f"{section}.{key}",
                                          base_dir)
    gas = GasModel(gamma=float(merged["gas"]["gamma"]), beta=float(merged["gas"]["beta"]))
    geometry = Geometry(L=float(merged["nozzle"]["L"]), g=profiles["g"],
                        sigma=float(merged["nozzle"]["sigma"]))
    upstream = UpstreamSpec(u_minus=profiles["u_minus"],
                            M_top=float(merged["upstream"]["M_top"]),
                            P_top=float(merged["upstream"]["P_top"]))
    pert = PerturbationConfig(
        sigma=geometry.sigma, u1_en=profiles["u1_en"], u2_en=profiles["u2_en"],
        S_en=profiles["S_en"], B_en=profiles["B_en"], P_ex=profiles["P_ex"],
        geometry=geometry,
    )
    s = merged["solver"]
    options = TransonicOptions(
        nx=s["nx"], ny=s["ny"], tol_fp=float(s["tol_fp"]), tol_res=float(s["tol_res"]),
        max_iter=s["max_iter"], defect_tol=float(s["defect_tol"]),
        psi_bracket=tuple(s["psi_bracket"]) if s["psi_bracket"] else None,
        psi_bar_fallback=s["psi_bar"],
    )
    return RunConfig(raw=merged, gas=gas, geometry=geometry, upstream=upstream,
                     pert=pert, options=options,
                     out_dir=merged["output"]["dir"],
                     dump_fields=merged["output"]["dump_fields"])


def _write_json(path, obj):
    def default(v):
        if isinstance(v, (np.floating, np.integer)):
            return float(v)
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, tuple):
            return list(v)
        raise TypeError(f"not serializable: {type(v)}")
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def _write_profile_csv(path, columns):
    names = list(columns)
    arrs = [np.asarray(columns[k]).ravel() for k in names]
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*arrs):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def cmd_background(cfg: RunConfig, out):
    bg = build_background(cfg.upstream, cfg.gas)
    write_background_csv(bg, os.path.join(out, "background.csv"))
    jumps = rh_residual(
        GasState(bg.rho_m, bg.u_m, 0.0, bg.P_m),
        GasState(bg.rho_p, bg.u_p, 0.0, bg.P_p), cfg.gas,
    )
    report = {
        "m_bar": float(np.trapezoid(bg.mass_flux, bg.x2)),
        "rh_residual_mass": float(np.abs(jumps[0]).max()),
        "rh_residual_momentum": float(np.abs(jumps[1]).max()),
        "rh_residual_bernoulli": float(np.abs(jumps[2]).max()),
        "d_range": [float(bg.d.min()), float(bg.d.max())],
        "downstream_Msq_max": float((bg.u_p**2 * bg.rho_p / (cfg.gas.gamma * bg.P_p)).max()),
    }
    _write_json(os.path.join(out, "background_report.json"), report)
    print(f"background written to {out} (max RH residual "
          f"{max(report['rh_residual_mass'], report['rh_residual_momentum'], report['rh_residual_bernoulli']):.3e})")
    return 0


def cmd_initial(cfg: RunConfig, out, dump_elliptic=False):
    bg = build_background(cfg.upstream, cfg.gas)
    opts = cfg.options
    hat = hatted_background(bg, n2=opts.ny)
    m, m_bar, _, _ = inlet_maps(bg, cfg.pert, cfg.pert.sigma)
    grid = LagrangianGrid(opts.nx, opts.ny, 0.0, cfg.geometry.L, m, m_bar)
    lin, flux = solve_linear(hat, cfg.pert, grid)
    if opts.psi_bracket:
        bracket = opts.psi_bracket
    else:
        br = selection_bracket(coefficients(hat), lin, cfg.pert, hat, cfg.geometry.L)
        bracket = (br.lo, br.hi)
    mid = 0.5 * (bracket[0] + bracket[1])
    n1_sub = max(9, int(round((cfg.geometry.L - mid) / grid.h1)) + 1)
    init = initial_approximation(hat, cfg.pert, lin, m, cfg.geometry.L, n1_sub,
                                 bracket=bracket, defect_tol=opts.defect_tol)
    rec = {k: init.diagnostics[k] for k in
           ("psi_bar", "J2", "J1_at_psi_bar", "bracket", "defect")}
    rec["flux_identity_violation"] = flux.max_violation
    _write_json(os.path.join(out, "initial.json"), rec)
    _write_profile_csv(os.path.join(out, "shock_slope.csv"),
                       {"y2": init.coeffs.y2, "psi_prime": init.front.psi_prime})
    lin.V.write_csv(os.path.join(out, "linear_minus.csv"))
    init.V_plus.write_csv(os.path.join(out, "linear_plus.csv"))
    print(f"initial approximation: psi_bar = {init.diagnostics['psi_bar']:.10f} "
          f"(defect {init.diagnostics['defect']:.3e}) -> {out}")
    return 0


def _solve(cfg: RunConfig):
    bg = build_background(cfg.upstream, cfg.gas)
    return bg, solve_transonic(bg, cfg.pert, cfg.options)


def cmd_solve(cfg: RunConfig, out, dump_elliptic=False):
    bg, res = _solve(cfg)
    x2m, x2p = res.eulerian_heights()
    res.sup.V.write_csv(os.path.join(out, "fields_minus.csv"),
                        extra_columns={"x2": x2m})
    ctx = res.ctx
    down = res.downstream_field()
    z1 = ctx.grid_plus.y1
    psi_vals = res.front.psi()
    Y1 = z1[:, None] + (ctx.L - z1)[:, None] * (psi_vals - ctx.grid_plus.y1a)[None, :] \
        / (ctx.L - ctx.grid_plus.y1a)
    down.write_csv(os.path.join(out, "fields_plus.csv"),
                   extra_columns={"x2": x2p, "y1_phys": Y1})
    _write_profile_csv(os.path.join(out, "front.csv"),
                       {"y2": res.front.y2, "psi": psi_vals,
                        "psi_prime": res.front.psi_prime})
    with open(os.path.join(out, "iteration_log.csv"), "w") as fh:
        fh.write("iter,update_norm,psi_sharp,defect,kappa_estimate\n")
        for row in res.log:
            fh.write(f"{row['iter']},{row['update_norm']:.17g},"
                     f"{row['psi_sharp']:.17g},{row['defect']:.17g},"
                     f"{row['kappa_estimate']:.17g}\n")
    rep = res.report
    _write_json(os.path.join(out, "report.json"), {
        "psi_bar": res.psi_bar, "psi_sharp": res.psi_sharp,
        "iterations": len(res.log), "C1_measured": res.C1_measured,
        "kappa_final": res.kappa_final,
        "pde_residual": rep.pde_residual, "rh_residual": rep.rh_residual,
        "exit_residual": rep.exit_residual, "wall_residual": rep.wall_residual,
        "defect": rep.defect, "pde_residual_raw": rep.pde_residual_raw,
        "details": rep.details,
    })
    if dump_elliptic or cfg.dump_fields:
        _write_profile_csv(os.path.join(out, "hatted_profiles.csv"), {
            "y2": ctx.hat.y2, "x2": ctx.hat.x2,
            "u_m": ctx.hat["m", "u"], "u_p": ctx.hat["p", "u"],
            "P_m": ctx.hat["m", "P"], "P_p": ctx.hat["p", "P"],
        })
    ok = rep.pde_residual <= cfg.options.tol_res and rep.rh_residual <= cfg.options.tol_res
    print(f"solve: psi_bar={res.psi_bar:.10f} psi_sharp={res.psi_sharp:.10f} "
          f"iters={len(res.log)} pde={rep.pde_residual:.3e} rh={rep.rh_residual:.3e} "
          f"{'OK' if ok else 'RESIDUALS ABOVE tol_res'}")
    return 0 if ok else 4


def cmd_verify(cfg: RunConfig, out):
    """Recompute the residual suite on fields stored by `solve`."""
    def read_csv(path):
        with open(path) as fh:
            names = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        return {n: data[:, i] for i, n in enumerate(names)}

    plus = read_csv(os.path.join(out, "fields_plus.csv"))
    front_csv = read_csv(os.path.join(out, "front.csv"))
    log = read_csv(os.path.join(out, "iteration_log.csv"))

    bg = build_background(cfg.upstream, cfg.gas)
    opts = cfg.options
    hat = hatted_background(bg, n2=opts.ny)
    m, m_bar, _, _ = inlet_maps(bg, cfg.pert, cfg.pert.sigma)
    grid_minus = LagrangianGrid(opts.nx, opts.ny, 0.0, cfg.geometry.L, m, m_bar)
    sup = solve_nonlinear(hat, cfg.pert, grid_minus, bg)

    n2 = opts.ny
    n1s = plus["y1"].size // n2
    psi_bar = plus["y1"].reshape(n1s, n2)[0, 0]
    grid_plus = LagrangianGrid(n1s, n2, psi_bar, cfg.geometry.L, m, m_bar)
    state = IterationState(
        u1=plus["u1"].reshape(n1s, n2) - hat["p", "u"][None, :],
        u2=plus["u2"].reshape(n1s, n2),
        S=plus["S"].reshape(n1s, n2) - hat["p", "S"][None, :],
        psi_prime=front_csv["psi_prime"],
        psi_sharp_dev=float(front_csv["psi"][-1] - psi_bar),
    )
    from scipy.interpolate import CubicSpline
    sup_splines = {k: CubicSpline(grid_minus.y1, sup.V[k], axis=0)
                   for k in ("u1", "u2", "S", "B")}
    ctx = IterationContext(
        gas=cfg.gas, hat=hat, coeffs=coefficients(hat), pert=cfg.pert, bg=bg,
        m=m, m_bar=m_bar, L=cfg.geometry.L, grid_minus=grid_minus,
        grid_plus=grid_plus, sup=sup, sup_splines=sup_splines,
        B_row=sup.V["B"][0, :] - hat["m", "B"],
        initial_state=state, opts=opts,
    )
    last_defect = log["defect"][-1] if np.ndim(log["defect"]) else float(log["defect"])
    rep = residuals(ctx, state, last_defect=last_defect)
    _write_json(os.path.join(out, "verify_report.json"), {
        "pde_residual": rep.pde_residual, "rh_residual": rep.rh_residual,
        "exit_residual": rep.exit_residual, "wall_residual": rep.wall_residual,
        "defect": rep.defect, "pde_residual_raw": rep.pde_residual_raw,
    })
    ok = rep.pde_residual <= opts.tol_res and rep.rh_residual <= opts.tol_res
    print(f"verify: pde={rep.pde_residual:.3e} rh={rep.rh_residual:.3e} "
          f"exit={rep.exit_residual:.3e} wall={rep.wall_residual:.3e} "
          f"{'OK' if ok else 'FAIL'}")
    return 0 if ok else 4


def _set_by_path(d, path, value):
    keys = path.split(".")
    cur = d
    for k in keys[:-1]:
        if k not in cur:
            raise ConfigError(f"sweep key {path}: section {k!r} not found")
        cur = cur[k]
    if keys[-1] not in cur:
        raise ConfigError(f"sweep key {path}: key {keys[-1]!r} not found")
    cur[keys[-1]] = value


def cmd_sweep(cfg: RunConfig, out, key, values, config_path):
    rows = []
    for i, val in enumerate(values):
        raw = cfg.to_dict()
        _set_by_path(raw, key, val)
        subdir = os.path.join(out, f"run_{i:03d}")
        os.makedirs(subdir, exist_ok=True)
        sub_path = os.path.join(subdir, "config.json")
        with open(sub_path, "w") as fh:
            json.dump(raw, fh, indent=2, sort_keys=True)
        sub_cfg = parse_config(sub_path)
        try:
            bg, res = _solve(sub_cfg)
            rows.append({
                "index": i, "value": val, "status": 0,
                "psi_bar": res.psi_bar, "psi_sharp": res.psi_sharp,
                "pde_residual": res.report.pde_residual,
                "rh_residual": res.report.rh_residual,
            })
        except RotshockError as exc:
            rows.append({"index": i, "value": val, "status": _exit_code(exc),
                         "psi_bar": np.nan, "psi_sharp": np.nan,
                         "pde_residual": np.nan, "rh_residual": np.nan})
            print(f"sweep {key}={val}: {exc}", file=sys.stderr)
    with open(os.path.join(out, "sweep.csv"), "w") as fh:
        fh.write("index,value,status,psi_bar,psi_sharp,pde_residual,rh_residual\n")
        for r in rows:
            fh.write(f"{r['index']},{r['value']},{r['status']},"
                     f"{r['psi_bar']:.17g},{r['psi_sharp']:.17g},"
                     f"{r['pde_residual']:.17g},{r['rh_residual']:.17g}\n")
    print(f"sweep over {key}: {len(rows)} runs -> {os.path.join(out, 'sweep.csv')}")
    return 0 if all(r["status"] == 0 for r in rows) else max(r["status"] for r in rows)


def _exit_code(exc):
    if isinstance(exc, ConfigError):
        return 1
    if isinstance(exc, DegenerateBackgroundError):
        return 2
    if isinstance(exc, NoAdmissibleShockError):
        return 3
    if isinstance(exc, (NonConvergenceError, CflError)):
        return 4
    return 4


def main(argv=None):
    ap = argparse.ArgumentParser(prog="rotshock",
                                 description="Transonic shocks in rotating nozzle flow")
    ap.add_argument("command",
                    choices=["background", "initial", "solve", "verify", "sweep"])
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", default=None, help="output directory (overrides config)")
    ap.add_argument("--dump-elliptic", action="store_true",
                    help="dump auxiliary elliptic/debug fields")
    ap.add_argument("--grid", nargs=2, type=int, metavar=("NX", "NY"),
                    help="override solver.nx solver.ny")
    ap.add_argument("--key", help="config key path for sweep (e.g. nozzle.sigma)")
    ap.add_argument("--values", help="JSON list of values for sweep")
    args = ap.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if args.grid:
            cfg.options.nx, cfg.options.ny = args.grid
            cfg.raw["solver"]["nx"], cfg.raw["solver"]["ny"] = args.grid
        out = args.out or cfg.out_dir
        os.makedirs(out, exist_ok=True)
        if args.command == "background":
            return cmd_background(cfg, out)
        if args.command == "initial":
            return cmd_initial(cfg, out, args.dump_elliptic)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.dump_elliptic)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "sweep":
            if not args.key or not args.values:
                raise ConfigError("sweep requires --key and --values")
            try:
                values = json.loads(args.values)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--values is not valid JSON: {exc}") from exc
            if not isinstance(values, list) or not values:
                raise ConfigError("--values must be a non-empty JSON list")
            return cmd_sweep(cfg, out, args.key, values, args.config)
    except RotshockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
