"""CSV and JSON formats for profiles, trajectories, scans and glued profiles.

Floats are written with ``repr`` so that identical runs produce identical
bytes and values round-trip exactly.  Missing values are empty cells and
infinities are written as ``inf``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .model_manifold import ModelFunction, make_profile, tabulated_profile


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(v)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([format_value(v) for v in row])
    return path


def _numeric(cell: str) -> float:
    if cell in ("true", "false"):
        return 1.0 if cell == "true" else 0.0
    return float(cell) if cell else math.nan


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns by name.

    Numeric and boolean columns become float arrays (empty cells are NaN,
    booleans 1/0); any other column is returned as an array of strings.
    """
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for k, name in enumerate(header):
        cells = [row[k] for row in body]
        try:
            cols[name] = np.array([_numeric(c) for c in cells])
        except ValueError:
            cols[name] = np.array(cells, dtype=str)
    return cols


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def load_profile(source: str | Path, params: dict | None = None) -> ModelFunction:
    """Profile from a family name, a JSON description, a tabulated CSV or a glued directory.

    JSON: ``{"family": ..., "params": {...}, "validation": {...}}``.
    CSV: columns ``r, psi, dpsi, ddpsi`` (optionally ``alpha``/``kappa`` in
    ``params``).  A directory written by :func:`save_glued` loads its profile.
    """
    src = str(source)
    path = Path(src)
    if path.is_dir() and (path / "meta.json").exists():
        return load_glued(path)[0]
    if src.endswith(".json") and path.exists():
        spec = read_json(path)
        merged = {**spec.get("params", {}), **(params or {})}
        return make_profile(spec["family"], merged, spec.get("validation"))
    if src.endswith(".csv") and path.exists():
        cols = read_csv(path)
        p = params or {}
        return tabulated_profile(cols["r"], cols["psi"], cols["dpsi"], cols["ddpsi"],
                                 alpha=p.get("alpha"), kappa=p.get("kappa"))
    if src.endswith((".json", ".csv")):
        raise FileNotFoundError(src)
    return make_profile(src, params or {})


def write_profile_table(path: str | Path, psi: ModelFunction, r: np.ndarray) -> Path:
    vals = psi(np.asarray(r, dtype=float))
    return write_csv(path, ("r", "psi", "dpsi", "ddpsi"), zip(r, *vals))


# ---------------------------------------------------------------------------
# module outputs
# ---------------------------------------------------------------------------

def write_trajectory(path: str | Path, traj, extra: dict | None = None) -> Path:
    """Trajectory CSV ``r, u, du`` plus a JSON sidecar with the event."""
    path = Path(path)
    write_csv(path, ("r", "u", "du"), zip(traj.r, traj.u, traj.du))
    p = traj.problem
    meta = {"event": traj.event.kind, "event_r": traj.event.r, "rho": traj.rho, "a": p.a,
            "n": p.n, "q": p.q, "rtol": traj.rtol, "atol": traj.atol,
            "profile": {"family": p.psi.family, "params": _plain(dict(p.psi.params))}}
    meta.update(extra or {})
    write_json(path.with_suffix(".json"), meta)
    return path


def write_trace(path: str | Path, trace) -> Path:
    return write_csv(path, ("r", "F", "P", "rate"), zip(trace.r, trace.F, trace.P, trace.rate))


def write_scan(path: str | Path, scan) -> Path:
    return write_csv(path, ("R", "I_R", "mass", "iterations", "converged"), scan.rows())


def write_branch(path: str | Path, branch) -> Path:
    rows = ((a, math.inf if r is None else r, c) for a, r, c in
            zip(branch.a, branch.rho, branch.u_at_rho))
    return write_csv(path, ("a", "rho", "u0_check"), rows)


def write_nonuniqueness(path: str | Path, triples) -> Path:
    return write_json(path, [t.as_dict() for t in triples])


def default_glued_grid(r_max: float = 1e4) -> np.ndarray:
    return np.unique(np.concatenate((np.linspace(0.0, 2.0, 4001),
                                     np.geomspace(2.0, r_max, 2001))))


def save_glued(glued, directory: str | Path, grid: np.ndarray | None = None) -> Path:
    """Directory with ``psi.csv``, ``u.csv`` and ``meta.json`` for the latest stage."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    r = default_glued_grid() if grid is None else np.asarray(grid, dtype=float)
    psi, u_fn = glued.latest
    write_profile_table(out / "psi.csv", psi, r)
    u, du = u_fn(r)
    write_csv(out / "u.csv", ("r", "u", "du"), zip(r, u, du))
    meta = glued.meta()
    meta["stage"] = psi.params.get("stage", psi.family) if psi.family == "tabulated" else psi.family
    write_json(out / "meta.json", meta)
    return out


def load_glued(directory: str | Path) -> tuple[ModelFunction, dict[str, np.ndarray], dict]:
    """Tabulated profile, solution columns and metadata of a saved glued profile."""
    d = Path(directory)
    meta = read_json(d / "meta.json")
    cols = read_csv(d / "psi.csv")
    kappa = meta.get("kappa_final") or meta.get("kappa_eps") or meta.get("kappa")
    psi = tabulated_profile(cols["r"], cols["psi"], cols["dpsi"], cols["ddpsi"],
                            alpha=meta["alpha"], kappa=kappa)
    return psi, read_csv(d / "u.csv"), meta
