"""Command-line runner: ``transonic-ep <kind> --config cfg.toml [--out DIR] [--seed N]``.

Every run validates its configuration before touching the file system,
writes comma-separated series (one header line, floats as ``%.17g``) and a
``manifest.json`` listing the configuration, its hash, wall time, residuals
and a checksum of each emitted file.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as C
from .base import SubsonicBase
from .dynamics import DynamicsOptions, SubsonicDynamics, build_base, bump_initial, evolve_and_measure, \
    TRAJECTORY_HEADER
from .errors import ConfigError, SonicSingularity, TransonicError, UsageError
from .fitter import (ExitDensityMap, check_monotone, fit_shock, solution_with_shock_at,
                     structural_stability_experiment)
from .instability import find_unstable_length, growth_rate_from_trace, mode_initial_data
from .linear import (LinearOperator, LinearOptions, contraction_window, evolve_linear, fit_decay_rate,
                     project_initial, smooth_random_data, solution_operator_spectrum)
from .eos import FlowPoint
from .steady import IntegrateOptions, integrate

logger = logging.getLogger("transonic_ep")


# ---------------------------------------------------------------------------
# output helpers


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_table(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def write_json(path: Path, data: dict) -> Path:
    with open(path, "w") as fh:
        json.dump(_plain(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# shared construction


def _problem(cfg):
    return C.build_law(cfg), float(cfg["flow"]["J"]), C.build_background(cfg), float(cfg["flow"]["L"])


def _solution(cfg):
    """Transonic solution from rho_r (shock fitting) or from a prescribed shock position."""
    law, J, b, L = _problem(cfg)
    opts = C.build_fit_options(cfg)
    bd = C.build_boundary(cfg)
    if bd.rho_r is not None:
        return fit_shock(law, J, b, bd, L, opts)
    return solution_with_shock_at(law, J, b, bd.rho_l, bd.E_l, L, float(cfg["shock"]["x0"]), opts)


def _profile_rows(p):
    return np.column_stack([p.xs, p.rho, p.E, p.u, p.mach, p.b(p.xs) + 0.0 * p.xs])


PROFILE_HEADER = ["x", "rho", "E", "u", "mach", "b"]


# ---------------------------------------------------------------------------
# experiment kinds; each returns (files, residuals, summary)


def run_steady(cfg, out: Path):
    law, J, b, L = _problem(cfg)
    bd = C.build_boundary(cfg)
    s = cfg["solver"]
    io = IntegrateOptions(tol=s["tol"], tol_sonic=s["tol_sonic"], min_points=cfg["steady"]["n_points"])
    end, stopped = L, False
    try:
        prof = integrate(law, J, b, 0.0, L, FlowPoint(bd.rho_l, bd.E_l, J), io)
    except SonicSingularity as exc:
        end, stopped = 0.999 * exc.x, True
        prof = integrate(law, J, b, 0.0, end, FlowPoint(bd.rho_l, bd.E_l, J), io)
    files = [write_table(out / "profile.csv", PROFILE_HEADER, _profile_rows(prof))]
    res = {"poisson": prof.poisson_residual()}
    return files, res, {"regime": prof.regime.value, "end": end, "stopped_at_sonic": stopped,
                        "rho_end": float(prof.rho[-1]), "E_end": float(prof.E[-1])}


def run_fit(cfg, out: Path):
    law, J, b, L = _problem(cfg)
    bd = C.build_boundary(cfg)
    opts = C.build_fit_options(cfg)
    sol = fit_shock(law, J, b, bd, L, opts)
    g = ExitDensityMap(law, J, b, L, bd.rho_l, bd.E_l, opts)
    n = cfg["fit"]["n_map"]
    evals = g.scan([L * (j + 1) / (n + 1) for j in range(n)])
    try:
        check_monotone(evals)
        monotone = True
    except TransonicError:
        monotone = False
    files = [
        write_table(out / "supersonic.csv", PROFILE_HEADER, _profile_rows(sol.left)),
        write_table(out / "subsonic.csv", PROFILE_HEADER, _profile_rows(sol.right)),
        write_table(out / "exit_map.csv", ["a", "g", "E_sup", "rho_sup", "rho_sub", "flagged"],
                    [(e.a, e.rho_exit, e.E_sup, e.rho_sup, e.rho_sub, e.flagged) for e in evals]),
    ]
    res = dict(sol.residuals())
    res["exit_mismatch"] = abs(sol.exit_density - bd.rho_r)
    meta = sol.metadata()
    meta["exit_map_monotone"] = monotone
    files.append(write_json(out / "solution.json", meta))
    return files, res, {"x0": sol.x0, "field_at_shock": sol.field_at_shock, "monotone": monotone}


def run_perturb(cfg, out: Path):
    law, J, b, L = _problem(cfg)
    p = cfg["perturb"]
    rep = structural_stability_experiment(b, p["eps"], law, J, C.build_boundary(cfg), L,
                                          shapes=tuple(p["shapes"]), opts=C.build_fit_options(cfg))
    rows = [(r.shape, r.eps, r.x0, r.shift, r.ratio, r.rho_sup_dev, r.rho_sub_dev) for r in rep.rows]
    files = [write_table(out / "stability.csv",
                         ["shape", "eps", "x0", "shift", "ratio", "rho_sup_dev", "rho_sub_dev"], rows)]
    spreads = {s: rep.spread(s) for s in p["shapes"]}
    return files, {"spread_" + k: v for k, v in spreads.items()}, {"x0": rep.x0, "stable": rep.stable}


def run_evolve(cfg, out: Path):
    e, s = cfg["evolve"], cfg["solver"]
    base = build_base(_solution(cfg), s["n_cells"])
    dyn = SubsonicDynamics(base, DynamicsOptions(cfl=s["cfl"], viscosity=s["viscosity"],
                                                 boundary_tol=s["boundary_tol"], sample_dt=e["sample_dt"]))
    res = evolve_and_measure(bump_initial(base, e["amplitude"]), e["T_final"], dyn,
                             snapshot_times=e["snapshots"])
    files = [write_table(out / "trajectory.csv", TRAJECTORY_HEADER, res.trajectory)]
    for t, Y in sorted(res.snapshots.items()):
        files.append(write_table(out / f"snapshot_t{t:.6g}.csv", ["x", "Y"], np.column_stack([base.xs, Y])))
    sig = res.column("sigma")
    summary = {"lambda_fit": res.lambda_fit, "r_squared": res.r_squared, "blowup": res.blowup,
               "sigma_initial": sig[0], "sigma_final": sig[-1], "dt": res.dt,
               "field_at_shock": base.E_shock}
    files.append(write_json(out / "summary.json", summary))
    return files, {"slaving_error": res.slaving_error}, summary


def _linear_setup(cfg):
    s = cfg["solver"]
    return LinearOperator(SubsonicBase(_solution(cfg), s["n_cells"]), s["viscosity"])


def run_linear(cfg, out: Path):
    lo = cfg["linear"]
    op = _linear_setup(cfg)
    if lo["initial"] == "random":
        h1, h2 = smooth_random_data(op, cfg["seed"])
        scale = lo["amplitude"] / max(np.max(np.abs(h1)), 1e-300)
        h1, h2 = h1 * scale, h2 * scale
    else:
        st = bump_initial(op.base, lo["amplitude"])
        h1, h2 = st.Y, st.Yt
    h1 = project_initial(op, h1, h2)
    sample_dt, T_final, window = lo["sample_dt"], lo["T_final"], None
    if lo["windows"]:
        # samples must fall on window boundaries
        window = contraction_window(op)
        sample_dt = window / math.ceil(window / sample_dt - 1e-9)
        T_final = sample_dt * math.ceil(T_final / sample_dt - 1e-9)
    run = evolve_linear(op, h1, h2, T_final, LinearOptions(cfl=cfg["solver"]["cfl"], sample_dt=sample_dt))
    led = run.ledger
    files = [write_table(out / "ledger.csv", led.header(), led.to_rows())]
    fit = fit_decay_rate(led, window=window, t_start=2.0 * window if window else 0.0)
    summary = {"lambda0": fit.lambda0, "r_squared": fit.r_squared, "unstable": fit.unstable,
               "window": window, "alpha0_per_window": fit.alpha0_per_window, "dt": run.dt}
    files.append(write_json(out / "decay.json", summary))
    res = {"identity_residual_max": float(np.max(np.abs(led.identity_residual)))}
    return files, res, summary


def run_spectrum(cfg, out: Path):
    sp = cfg["spectrum"]
    op = _linear_setup(cfg)
    T = sp["T"] or contraction_window(op)
    rep = solution_operator_spectrum(op, T, n_modes=sp["n_modes"], seed=cfg["seed"], max_iter=sp["max_iter"],
                                     tol=sp["tol"], shift=sp["shift"], cfl=cfg["solver"]["cfl"])
    files = [write_table(out / "history.csv", ["iteration", "estimate"],
                         [(i + 1, v) for i, v in enumerate(rep.history)])]
    summary = {"dominant_modulus": rep.dominant_modulus, "T": rep.T, "iterations": rep.iterations,
               "shifted": rep.shifted, "ritz_values": [complex(v) for v in rep.ritz_values],
               "rate_from_modulus": -math.log(rep.dominant_modulus) / rep.T if rep.dominant_modulus > 0 else None}
    files.append(write_json(out / "spectrum.json", summary))
    return files, {"residual": rep.residual}, summary


def run_instability(cfg, out: Path):
    ins, s = cfg["instability"], cfg["solver"]
    law, J = C.build_law(cfg), float(cfg["flow"]["J"])
    lengths = [float(v) for v in ins["lengths"]]
    b = C.build_background(cfg, max(lengths))
    bd = C.build_boundary(cfg)
    found = find_unstable_length(law, J, b, bd.rho_l, bd.E_l, float(ins["x0"]), float(ins["target_E"]),
                                 lengths, n_cells=s["n_cells"], fit_opts=C.build_fit_options(cfg),
                                 n_scan=ins["n_scan"], shoot_tol=ins["shoot_tol"])
    m, base = found.mode, found.base
    files = [write_table(out / "mode.csv", ["x", "Z", "Zx"], np.column_stack([m.x, m.Z, m.Zx])),
             write_table(out / "scan.csv", ["lambda", "terminal_slope"],
                         np.column_stack([found.search.lam_grid, found.search.slopes]))]
    summary = {"lambda": m.lam, "L": found.L, "field_at_shock": found.E_shock,
               "lambda_upper": found.search.bracket[1], "terminal_slope": m.terminal_slope,
               "scanned": found.scanned}
    if ins["verify_growth"]:
        op = LinearOperator(base, s["viscosity"])
        T = 3.0 / m.lam
        Y, V = mode_initial_data(base, m)
        run = evolve_linear(op, Y, V, T, LinearOptions(cfl=s["cfl"], sample_dt=T / 60))
        summary["time_domain_rate"] = growth_rate_from_trace(run.step_times, run.trace_Y)
    files.append(write_json(out / "mode.json", summary))
    return files, {"eigen_residual": m.residual}, summary


def _sweep_child(args):
    cfg, out = args
    out.mkdir(parents=True, exist_ok=True)
    try:
        manifest = execute(cfg, out)
        scalars = {k: v for k, v in manifest["summary"].items() if isinstance(v, (int, float))}
        return {"status": "ok", **scalars}
    except TransonicError as exc:
        logger.warning("sweep member %s failed: %s", out.name, exc)
        return {"status": f"error:{type(exc).__name__}"}


def run_sweep(cfg, out: Path):
    sw = cfg["sweep"]
    section, key = sw["parameter"].split(".")
    jobs = []
    for i, v in enumerate(sw["values"]):
        child = copy.deepcopy(cfg)
        child["kind"] = sw["base_kind"]
        child.pop("sweep", None)
        child.setdefault(section, {})[key] = v
        child = C.normalize(child)
        jobs.append((child, out / f"run_{i:03d}"))
    if sw["workers"] > 1:
        with ProcessPoolExecutor(max_workers=sw["workers"]) as pool:
            results = list(pool.map(_sweep_child, jobs))
    else:
        results = [_sweep_child(j) for j in jobs]
    keys = sorted({k for r in results for k in r if k != "status"})
    rows = [[i, v, r["status"]] + [r.get(k, math.nan) for k in keys]
            for i, (v, r) in enumerate(zip(sw["values"], results))]
    files = [write_table(out / "sweep.csv", ["index", "value", "status"] + keys, rows)]
    for _, sub in jobs:
        files.extend(sorted(p for p in sub.iterdir() if p.is_file()))
    return files, {}, {"runs": len(jobs), "failed": sum(r["status"] != "ok" for r in results)}


RUNNERS = {
    "steady": run_steady, "fit": run_fit, "perturb": run_perturb, "evolve": run_evolve,
    "linear": run_linear, "spectrum": run_spectrum, "instability": run_instability, "sweep": run_sweep,
}


def execute(cfg: dict, out: Path, raw: bytes | None = None) -> dict:
    """Run a normalized configuration into ``out`` and write its manifest."""
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files, residuals, summary = RUNNERS[cfg["kind"]](cfg, out)
    raw = raw if raw is not None else json.dumps(_plain(cfg), sort_keys=True).encode()
    manifest = {
        "kind": cfg["kind"],
        "config": cfg,
        "config_hash": C.config_hash(raw),
        "seed": cfg["seed"],
        "wall_time_s": time.perf_counter() - t0,
        "residuals": residuals,
        "summary": summary,
        "files": [{"path": str(p.relative_to(out)), "sha256": _sha256(p)} for p in files],
    }
    write_json(out / "manifest.json", manifest)
    return _plain(manifest)


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transonic-ep", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in C.KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
    p = sub.add_parser("plot", help="plot columns of a series file as SVG")
    p.add_argument("--input", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True, action="append")
    p.add_argument("--y2", help="column drawn on a twin axis")
    p.add_argument("--log-y", action="store_true")
    p.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            from .plotting import plot_series
            path = plot_series(args.input, args.x, args.y, y2=args.y2, log_y=args.log_y, out=args.out)
            print(path)
            return 0
        data, raw = C.load(args.config)
        if data.get("kind", args.command) != args.command:
            raise ConfigError(f"config kind {data.get('kind')!r} does not match subcommand {args.command!r}",
                              ["kind"])
        data["kind"] = args.command
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = C.normalize(data)
        out = Path(args.out or cfg["output"]["dir"])
        manifest = execute(cfg, out, raw)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        for k in exc.keys:
            print(f"  offending key: {k}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except TransonicError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"out": str(out), "summary": manifest["summary"],
                      "residuals": manifest["residuals"]}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
