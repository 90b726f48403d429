"""Command-line front end.

Every command writes its data files plus ``manifest.json`` (configuration,
library versions, wall time, exit status) into ``--out``.  A JSON config
file may supply any option; explicit flags take precedence.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from . import __version__
from . import constructions, diagnostics, dirichlet, io, model_manifold, shooting, sobolev

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULTS: dict[str, Any] = {
    "out": "out", "rtol": 1e-10, "atol": None, "rmax": 1000.0, "threads": None,
    "profile": "shifted_power", "seed": 0, "param": [],
}


class InputError(ValueError):
    """Invalid command-line or configuration input."""


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as :class:`InputError` (exit code 1, manifest written)."""

    def error(self, message):
        raise InputError(f"{message}\n{self.format_usage().strip()}")


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def parse_range(text: str) -> np.ndarray:
    """``x``, ``start:stop:step`` (inclusive) or ``start:stop:logN`` (N log points)."""
    parts = str(text).split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise InputError(f"range {text!r} must be start:stop:step or start:stop:logN")
        lo, hi = float(parts[0]), float(parts[1])
        if parts[2].startswith("log"):
            count = int(parts[2][3:])
            if lo <= 0 or hi <= 0 or count < 2:
                raise InputError(f"log range {text!r} needs positive ends and at least 2 points")
            return np.geomspace(lo, hi, count)
        step = float(parts[2])
        if step <= 0 or hi < lo:
            raise InputError(f"range {text!r} needs step > 0 and stop >= start")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(count), 12)
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"cannot parse range {text!r}") from exc


def parse_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse list {text!r}") from exc


def _param_dict(pairs: list[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in pairs or []:
        if "=" not in item:
            raise InputError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out


def profile_spec(cfg: dict) -> tuple[str, dict]:
    """``(source, params)`` with ``--alpha`` folded into the family parameters."""
    params = _param_dict(cfg.get("param"))
    if cfg.get("alpha") is not None and "alpha" not in params:
        params["alpha"] = float(cfg["alpha"])
    source = cfg.get("profile") or DEFAULTS["profile"]
    if source in ("euclidean", "hyperbolic"):
        params.pop("alpha", None)
    return source, params


def build_profile(source: str, params: dict):
    try:
        return io.load_profile(source, params)
    except KeyError as exc:
        raise InputError(f"profile {source!r} is missing parameter {exc}") from exc


def _need(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise InputError("missing required option(s): " + ", ".join("--" + k.replace("_", "-")
                                                                     for k in missing))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return "infinity" if isinstance(x, float) and math.isinf(x) else str(x)


def cmd_classify(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "alpha")
    ce = model_manifold.critical_exponents(int(cfg["n"]), cfg["alpha"])
    two_star_minus = ce.two_star - 1 if not isinstance(ce.two_star, float) else ce.two_star
    lines = [f"2~_alpha = {ce.two_tilde}",
             f"2*_alpha - 1 = {ce.two_star_alpha - 1}",
             f"2* - 1 = {_fmt(two_star_minus)}"]
    result = {"two_tilde": str(ce.two_tilde), "two_star_alpha_minus_1": str(ce.two_star_alpha - 1),
              "two_star_minus_1": _fmt(two_star_minus)}
    if cfg.get("q") is not None:
        reg = model_manifold.classify_regime(int(cfg["n"]), cfg["alpha"], cfg["q"])
        lines.append(reg.verdict)
        result.update({"regime": reg.label, "verdict": reg.verdict})
    print("\n".join(lines))
    io.write_json(out / "classify.json", result)
    return {"outputs": ["classify.json"], **result}


def _problem(cfg: dict, a: float | None = None):
    _need(cfg, "n", "q")
    psi = build_profile(*profile_spec(cfg))
    a = float(cfg["a"] if a is None else a)
    return shooting.CauchyProblem(psi, int(cfg["n"]), float(cfg["q"]), a)


def cmd_shoot(cfg: dict, out: Path) -> dict:
    _need(cfg, "a")
    traj = shooting.integrate_cauchy(_problem(cfg), cfg["rmax"], cfg["rtol"], cfg["atol"])
    res = shooting.residual(traj)
    io.write_trajectory(out / "trajectory.csv", traj, {"residual": res})
    print(f"event = {traj.event.kind}" + (f" at r = {traj.event.r!r}" if traj.event.r else ""))
    return {"outputs": ["trajectory.csv", "trajectory.json"], "event": traj.event.kind,
            "rho": traj.rho, "residual": res}


def cmd_pohozaev(cfg: dict, out: Path) -> dict:
    _need(cfg, "a")
    traj = shooting.integrate_cauchy(_problem(cfg), cfg["rmax"], cfg["rtol"], cfg["atol"])
    trace = diagnostics.pohozaev(traj)
    err = diagnostics.pohozaev_rate_identity(trace)
    mono = diagnostics.is_nondecreasing(trace)
    io.write_trace(out / "trace.csv", trace)
    print(f"event = {traj.event.kind}; identity error = {err:.3e}; nondecreasing = {mono}")
    return {"outputs": ["trace.csv"], "event": traj.event.kind, "identity_error": err,
            "nondecreasing": mono}


def cmd_branch(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "q", "a_min", "a_max")
    psi = build_profile(*profile_spec(cfg))
    br = dirichlet.branch_trace(psi, int(cfg["n"]), float(cfg["q"]), float(cfg["a_min"]),
                                float(cfg["a_max"]), int(cfg.get("count") or 64), cfg["rmax"],
                                rtol=cfg["rtol"], workers=int(cfg["threads"] or 1))
    triples = dirichlet.detect_nonuniqueness(br)
    io.write_branch(out / "branch.csv", br)
    io.write_nonuniqueness(out / "nonuniqueness.json", triples)
    print(f"{len(br.monotone_violations)} monotonicity violations; {len(triples)} radii with "
          "two solutions")
    return {"outputs": ["branch.csv", "nonuniqueness.json"],
            "violations": len(br.monotone_violations), "nonuniqueness": len(triples)}


def cmd_dirichlet(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "q", "R")
    psi = build_profile(*profile_spec(cfg))
    n, q, R = int(cfg["n"]), float(cfg["q"]), float(cfg["R"])
    if cfg.get("a_lo") is not None and cfg.get("a_hi") is not None:
        bracket = (float(cfg["a_lo"]), float(cfg["a_hi"]))
    else:
        bracket = dirichlet.find_bracket(psi, n, q, R)
    try:
        sol = dirichlet.dirichlet_solution(psi, n, q, R, bracket)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    io.write_trajectory(out / "ball.csv", sol.trajectory,
                        {"R": sol.R, "mass": sol.mass, "sobolev_quotient": sol.sobolev_quotient})
    print(f"a = {sol.a!r}; mass = {sol.mass!r}; quotient = {sol.sobolev_quotient!r}")
    return {"outputs": ["ball.csv", "ball.json"], "a": sol.a, "mass": sol.mass,
            "sobolev_quotient": sol.sobolev_quotient}


def cmd_sobolev(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "q", "R_list")
    psi = build_profile(*profile_spec(cfg))
    R = parse_list(cfg["R_list"])
    scan = sobolev.quotient_limit_scan(psi, int(cfg["n"]), float(cfg["q"]), R,
                                       int(cfg.get("mesh") or 256), rng_seed=cfg.get("seed"))
    io.write_scan(out / "scan.csv", scan)
    print(f"last relative change = {scan.relative_change_last:.3e}; "
          f"fitted power = {scan.fitted_power:.4f}")
    return {"outputs": ["scan.csv"], "relative_change_last": scan.relative_change_last,
            "fitted_power": scan.fitted_power}


def cmd_embed(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "p")
    psi = build_profile(*profile_spec(cfg))
    rep = sobolev.embedding_report(psi, int(cfg["n"]), float(cfg["p"]))
    io.write_csv(out / "ko.csv", ("r", "B"), zip(rep.radii, rep.values))
    summary = {"p": rep.p, "sup_B": rep.sup_B, "limit_0": rep.limit_0,
               "limit_inf": rep.limit_inf, "slope_0": rep.slope_0, "slope_inf": rep.slope_inf,
               "verdict": rep.verdict}
    io.write_json(out / "embedding.json", summary)
    print(rep.verdict)
    return {"outputs": ["ko.csv", "embedding.json"], **summary}


def cmd_glue(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "alpha", "q")
    n, alpha, q = int(cfg["n"]), float(cfg["alpha"]), float(cfg["q"])
    try:
        constructions._check_glue_range(n, alpha, q)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    g = constructions.glue(n, alpha, q)
    g = constructions.smooth_c1(g, cfg.get("eps"))
    g = constructions.smooth_cinf(g, cfg.get("width"))
    io.save_glued(g, out / "glued")
    failed = [k for k, ok in g.passed.items() if not ok]
    print(f"r_tilde = {g.r_tilde!r}; r_bar = {g.r_bar!r}; checks failed: {failed or 'none'}")
    if failed:
        raise RuntimeError("final profile failed: " + ", ".join(failed))
    return {"outputs": ["glued/psi.csv", "glued/u.csv", "glued/meta.json"]}


def cmd_supersol(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "alpha", "q")
    psi = build_profile(*profile_spec(cfg))
    n, alpha, q = int(cfg["n"]), float(cfg["alpha"]), float(cfg["q"])
    try:
        sup = constructions.build_supersolution(psi, n, alpha, q, cfg.get("eps"))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    chk = constructions.verify_supersolution(sup, psi, n)
    res = {"A": sup.A, "B": sup.B, "eps": sup.eps, "r_eps": sup.r_eps,
           "min_residual": chk.min_residual, "worst_r": chk.worst_r}
    io.write_json(out / "supersolution.json", res)
    print(f"A = {sup.A!r}; B = {sup.B!r}; min normalised residual = {chk.min_residual:.3e}")
    return {"outputs": ["supersolution.json"], **res}


def _sweep_cell(task: tuple) -> tuple:
    source, params, n, alpha, q, a, r_max, rtol = task
    psi = io.load_profile(source, params)
    traj = shooting.integrate_cauchy(shooting.CauchyProblem(psi, n, q, a), r_max, rtol)
    kind = {"first_zero": "zero-found", "reached_r_max": "global-positive",
            "blow_up": "blow-up", "step_underflow": "step-underflow"}[traj.event.kind]
    mono = diagnostics.is_nondecreasing(diagnostics.pohozaev(traj))
    hp4 = model_manifold.check_hp4(psi, n, q).holds
    return alpha, q, a, kind, traj.rho, mono, hp4


def cmd_sweep(cfg: dict, out: Path) -> dict:
    _need(cfg, "n", "q_range", "a_range")
    source, params = profile_spec(cfg)
    alphas = parse_range(cfg["alpha_range"]) if cfg.get("alpha_range") else [params.get("alpha")]
    qs, As = parse_range(cfg["q_range"]), parse_range(cfg["a_range"])
    tasks = []
    for al in alphas:
        p = dict(params)
        if al is not None:
            p["alpha"] = float(al)
        build_profile(source, p)
        tasks += [(source, p, int(cfg["n"]), None if al is None else float(al), float(q),
                   float(a), cfg["rmax"], cfg["rtol"]) for q in qs for a in As]
    workers = int(cfg["threads"] or os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(min(workers, len(tasks))) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    io.write_csv(out / "sweep.csv", ("alpha", "q", "a", "verdict", "rho", "pohozaev_monotone",
                                     "hp4_holds"), rows)
    counts: dict[str, int] = {}
    for r in rows:
        counts[r[3]] = counts.get(r[3], 0) + 1
    print(", ".join(f"{k}: {v}" for k, v in sorted(counts.items())))
    return {"outputs": ["sweep.csv"], "cells": len(rows), "verdicts": counts}


COMMANDS: dict[str, Callable[[dict, Path], dict]] = {
    "classify": cmd_classify, "shoot": cmd_shoot, "pohozaev": cmd_pohozaev,
    "branch": cmd_branch, "dirichlet": cmd_dirichlet, "sobolev": cmd_sobolev,
    "embed": cmd_embed, "glue": cmd_glue, "supersol": cmd_supersol, "sweep": cmd_sweep,
}


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False, allow_abbrev=False)
    S = argparse.SUPPRESS
    g = p.add_argument_group("global options")
    g.add_argument("--out", default=S, help="output directory (default: out)")
    g.add_argument("--rtol", type=float, default=S, help="integrator relative tolerance")
    g.add_argument("--atol", type=float, default=S, help="integrator absolute tolerance")
    g.add_argument("--rmax", type=float, default=S, help="integration radius (default: 1000)")
    g.add_argument("--threads", type=int, default=S, help="worker count")
    g.add_argument("--profile", default=S, help="family name, profile JSON or tabulated CSV")
    g.add_argument("--param", action="append", default=S, metavar="KEY=VALUE",
                   help="extra profile parameter (repeatable)")
    g.add_argument("--seed", type=int, default=S, help="random seed")
    g.add_argument("--config", default=S, help="JSON file with option values")
    g.add_argument("--n", type=int, default=S, help="dimension")
    g.add_argument("--alpha", type=float, default=S, help="polynomial growth exponent")
    g.add_argument("--q", type=float, default=S, help="nonlinearity exponent")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="lanemanifold", description=__doc__.splitlines()[0],
                     parents=[common], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, allow_abbrev=False)

    add("classify", "critical exponents and regime")
    for name, text in (("shoot", "integrate the radial Cauchy problem"),
                       ("pohozaev", "Pohozaev trace along a trajectory")):
        add(name, text).add_argument("--a", type=float, default=S, help="initial height u(0)")
    p = add("branch", "first-zero branch and non-uniqueness detection")
    p.add_argument("--a-min", dest="a_min", type=float, default=S)
    p.add_argument("--a-max", dest="a_max", type=float, default=S)
    p.add_argument("--count", type=int, default=S)
    p = add("dirichlet", "radial Dirichlet problem on a ball")
    p.add_argument("--R", type=float, default=S, help="ball radius")
    p.add_argument("--a-lo", dest="a_lo", type=float, default=S)
    p.add_argument("--a-hi", dest="a_hi", type=float, default=S)
    p = add("sobolev", "truncated Rayleigh quotients over a list of radii")
    p.add_argument("--R-list", dest="R_list", default=S, help="comma-separated radii")
    p.add_argument("--mesh", type=int, default=S, help="elements per minimisation")
    p = add("embed", "weighted Sobolev embedding verdict")
    p.add_argument("--p", type=float, default=S, help="target exponent")
    p = add("glue", "glued profile with a global positive solution")
    p.add_argument("--eps", type=float, default=S)
    p.add_argument("--width", type=float, default=S)
    p = add("supersol", "explicit supersolution")
    p.add_argument("--eps", type=float, default=S)
    p = add("sweep", "grid of shooting verdicts")
    p.add_argument("--alpha-range", dest="alpha_range", default=S)
    p.add_argument("--q-range", dest="q_range", default=S)
    p.add_argument("--a-range", dest="a_range", default=S)
    return parser


def resolve_config(ns: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    flags = vars(ns).copy()
    path = flags.pop("config", None)
    if path is not None:
        try:
            loaded = io.read_json(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path!r}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise InputError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    cfg.update(flags)
    for key in ("rtol", "atol"):
        if cfg.get(key) is not None and not float(cfg[key]) > 0:
            raise InputError(f"--{key} must be positive")
    return cfg


def _versions() -> dict:
    return {"lanemanifold": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _out_from_argv(argv: list[str]) -> Path:
    for k, item in enumerate(argv):
        if item == "--out" and k + 1 < len(argv):
            return Path(argv[k + 1])
        if item.startswith("--out="):
            return Path(item.split("=", 1)[1])
    return Path(DEFAULTS["out"])


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    start = time.perf_counter()
    status, summary, error = EXIT_OK, {}, None
    command = None
    cfg: dict = {}
    out = _out_from_argv(argv)
    try:
        ns = build_parser().parse_args(argv)
        command = ns.command
        cfg = resolve_config(ns)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[command](cfg, out) or {}
    except (InputError, ValueError, KeyError, FileNotFoundError) as exc:
        status, error = EXIT_INPUT, f"{type(exc).__name__}: {exc}"
        hint = f"lanemanifold {command} --help" if command else "lanemanifold --help"
        print(f"error: {exc}\nrun '{hint}' for usage", file=sys.stderr)
    except (RuntimeError, ArithmeticError) as exc:
        status, error = EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
        print(f"numerical failure: {exc}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        status, error = EXIT_INTERNAL, f"{type(exc).__name__}: {exc}"
        traceback.print_exc()
    finally:
        manifest = {"command": command, "argv": argv, "config": cfg, "versions": _versions(),
                    "wall_time": time.perf_counter() - start, "exit_code": status,
                    "error": error, "result": summary}
        try:
            io.write_json(out / "manifest.json", manifest)
        except OSError as exc:
            print(f"could not write manifest: {exc}", file=sys.stderr)
            status = status or EXIT_INTERNAL
    return status


if __name__ == "__main__":
    sys.exit(main())
