"""Experiment configuration: TOML loading, validation and object construction.

A configuration is a flat TOML document with a few sections::

    kind = "fit"            # steady | fit | perturb | evolve | linear | spectrum | instability | sweep
    seed = 0

    [law]
    kind = "gamma_law"      # or "isothermal"
    k = 1.0
    gamma = 2.0

    [flow]
    J = 1.0
    L = 1.0

    [background]            # b(x); see BackgroundCharge for the kinds
    kind = "constant"
    value = 0.5

    [boundary]
    rho_l = 0.4
    E_l = 0.2
    rho_r = 1.5225          # needed by fit and perturb

    [shock]
    x0 = 0.4                # alternative to rho_r for the dynamics kinds

    [solver]                # optional tolerances and grids
    [<kind>]                # optional kind-specific settings

All validation happens before any solve, and every problem is reported at
once in a single :class:`ConfigError`.
"""

from __future__ import annotations

import copy
import hashlib
import math

import tomli

from .eos import PressureLaw
from .errors import ConfigError
from .fitter import Boundary, FitOptions
from .steady import BackgroundCharge, IntegrateOptions

KINDS = ("steady", "fit", "perturb", "evolve", "linear", "spectrum", "instability", "sweep")
SHOCK_KINDS = ("evolve", "linear", "spectrum")

SOLVER_DEFAULTS = {
    "tol": 1e-12,
    "tol_sonic": 1e-8,
    "exit_tol": 1e-10,
    "n_scan": 64,
    "n_cells": 100,
    "cfl": 0.5,
    "viscosity": 1.0,
    "boundary_tol": 1e-12,
}

KIND_DEFAULTS = {
    "steady": {"n_points": 1025},
    "fit": {"n_map": 20},
    "perturb": {"eps": [1e-2, 1e-3, 1e-4], "shapes": ["offset", "bump", "sinusoid"]},
    "evolve": {"amplitude": 1e-3, "T_final": 20.0, "sample_dt": 0.05, "snapshots": []},
    "linear": {"T_final": 40.0, "sample_dt": 0.05, "amplitude": 1e-3, "initial": "random",
               "windows": True},
    "spectrum": {"T": 0.0, "n_modes": 1, "max_iter": 60, "tol": 1e-6, "shift": False},
    "instability": {"x0": None, "target_E": -0.5, "lengths": [], "n_scan": 128, "shoot_tol": 1e-8,
                    "verify_growth": True},
    "sweep": {"base_kind": "fit", "parameter": "", "values": [], "workers": 1},
}

_TOL_KEYS = ("tol", "tol_sonic", "exit_tol", "boundary_tol", "cfl")


def config_hash(raw: bytes) -> str:
    """Git-style blob hash of the configuration bytes."""
    return hashlib.sha1(b"blob %d\0" % len(raw) + raw).hexdigest()


def load(path) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        data = tomli.loads(raw.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", ["<file>"]) from exc
    return data, raw


def _num(cfg, section, key, bad, positive=False, required=True):
    sec = cfg.get(section, {})
    name = f"{section}.{key}"
    if key not in sec:
        if required:
            bad.append(name)
        return None
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        bad.append(name)
        return None
    if positive and not v > 0:
        bad.append(name)
        return None
    return float(v)


def normalize(cfg: dict) -> dict:
    """Validate ``cfg`` and return a copy with defaults filled in."""
    cfg = copy.deepcopy(cfg)
    bad: list[str] = []
    kind = cfg.get("kind")
    if kind not in KINDS:
        bad.append("kind")
    seed = cfg.setdefault("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        bad.append("seed")

    law = cfg.get("law", {})
    if law.get("kind") not in ("gamma_law", "isothermal"):
        bad.append("law.kind")
    _num(cfg, "law", "k", bad, positive=True)
    if law.get("kind") == "gamma_law":
        g = _num(cfg, "law", "gamma", bad)
        if g is not None and g < 1.0:
            bad.append("law.gamma")
    _num(cfg, "flow", "J", bad, positive=True)
    L = _num(cfg, "flow", "L", bad, positive=True)
    bg = cfg.get("background")
    if not isinstance(bg, dict) or "kind" not in bg:
        bad.append("background.kind")
    elif L is not None:
        try:
            BackgroundCharge.from_spec(bg, L)
        except (KeyError, ValueError, TypeError):
            bad.append("background")
    _num(cfg, "boundary", "rho_l", bad, positive=True)
    _num(cfg, "boundary", "E_l", bad)

    solver = cfg.setdefault("solver", {})
    for key, val in SOLVER_DEFAULTS.items():
        solver.setdefault(key, val)
    for key in _TOL_KEYS:
        if not isinstance(solver[key], (int, float)) or not solver[key] > 0:
            bad.append(f"solver.{key}")
    if not isinstance(solver["n_cells"], int) or solver["n_cells"] < 64:
        bad.append("solver.n_cells")
    if not isinstance(solver["n_scan"], int) or solver["n_scan"] < 4:
        bad.append("solver.n_scan")

    if kind in KINDS:
        opts = cfg.setdefault(kind, {})
        for key, val in KIND_DEFAULTS[kind].items():
            opts.setdefault(key, copy.deepcopy(val))
        _validate_kind(cfg, kind, opts, bad)

    out = cfg.setdefault("output", {})
    out.setdefault("dir", f"out-{kind}")
    if bad:
        raise ConfigError("invalid configuration keys: " + ", ".join(sorted(set(bad))), sorted(set(bad)))
    return cfg


def _validate_kind(cfg, kind, opts, bad):
    rho_r = _num(cfg, "boundary", "rho_r", [], positive=True, required=False)
    x0 = _num(cfg, "shock", "x0", [], required=False)
    if kind in ("fit", "perturb") and rho_r is None:
        bad.append("boundary.rho_r")
    if kind in SHOCK_KINDS and rho_r is None and x0 is None:
        bad.append("boundary.rho_r|shock.x0")
    if kind == "steady" and (not isinstance(opts["n_points"], int) or opts["n_points"] < 64):
        bad.append("steady.n_points")
    if kind == "perturb":
        eps = opts["eps"]
        if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
            bad.append("perturb.eps")
        if not isinstance(opts["shapes"], list) or not set(opts["shapes"]) <= {"offset", "bump", "sinusoid"}:
            bad.append("perturb.shapes")
    if kind == "evolve":
        for key in ("amplitude", "T_final", "sample_dt"):
            if not isinstance(opts[key], (int, float)) or not opts[key] > 0:
                bad.append(f"evolve.{key}")
    if kind == "linear":
        for key in ("T_final", "sample_dt", "amplitude"):
            if not isinstance(opts[key], (int, float)) or not opts[key] > 0:
                bad.append(f"linear.{key}")
        if opts["initial"] not in ("random", "bump"):
            bad.append("linear.initial")
    if kind == "spectrum":
        if not isinstance(opts["T"], (int, float)) or opts["T"] < 0:
            bad.append("spectrum.T")
        if not isinstance(opts["n_modes"], int) or opts["n_modes"] < 1:
            bad.append("spectrum.n_modes")
    if kind == "instability":
        if not isinstance(opts["x0"], (int, float)) or isinstance(opts["x0"], bool):
            bad.append("instability.x0")
        if not isinstance(opts["target_E"], (int, float)) or not opts["target_E"] < 0:
            bad.append("instability.target_E")
        ls = opts["lengths"]
        if not isinstance(ls, list) or not ls or not all(isinstance(v, (int, float)) and v > 0 for v in ls):
            bad.append("instability.lengths")
    if kind == "sweep":
        if opts["base_kind"] not in KINDS or opts["base_kind"] == "sweep":
            bad.append("sweep.base_kind")
        par = opts["parameter"]
        if not isinstance(par, str) or par.count(".") != 1:
            bad.append("sweep.parameter")
        if not isinstance(opts["values"], list) or not opts["values"]:
            bad.append("sweep.values")
        if not isinstance(opts["workers"], int) or opts["workers"] < 1:
            bad.append("sweep.workers")


# ---------------------------------------------------------------------------
# object construction


def build_law(cfg: dict) -> PressureLaw:
    law = cfg["law"]
    if law["kind"] == "isothermal":
        return PressureLaw.isothermal(law["k"])
    return PressureLaw.gamma_law(law["k"], law["gamma"])


def build_background(cfg: dict, L: float | None = None) -> BackgroundCharge:
    return BackgroundCharge.from_spec(cfg["background"], cfg["flow"]["L"] if L is None else L)


def build_boundary(cfg: dict) -> Boundary:
    bd = cfg["boundary"]
    return Boundary(float(bd["rho_l"]), float(bd["E_l"]), bd.get("rho_r"))


def build_fit_options(cfg: dict) -> FitOptions:
    s = cfg["solver"]
    return FitOptions(exit_tol=s["exit_tol"], n_scan=s["n_scan"],
                      integrate=IntegrateOptions(tol=s["tol"], tol_sonic=s["tol_sonic"]))
