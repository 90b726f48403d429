"""First-zero branch ``a -> rho(a)`` and radial Dirichlet problems on balls.

Shooting from height ``a`` either reaches a first zero ``rho(a)`` or stays
positive up to ``r_max``.  Read backwards, the branch gives the heights of
all radial solutions of ``-Delta u = u^q`` in the ball of radius ``R`` with
zero boundary values; whenever ``rho`` fails to be monotone, some radius
carries two solutions.  Missing zeros count as ``rho = inf``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

from . import _quadrature as quad
from .model_manifold import ModelFunction
from .shooting import SERIES_START, CauchyProblem, Trajectory, integrate_cauchy
from .sobolev import rayleigh_minimize

log = logging.getLogger(__name__)

ROOT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DirichletBranch:
    a: np.ndarray
    rho: tuple[float | None, ...]
    u_at_rho: tuple[float | None, ...]
    psi: ModelFunction = field(repr=False)
    n: int
    q: float
    r_max: float
    rtol: float
    monotone_violations: tuple[tuple[int, int], ...]

    @property
    def rho_extended(self) -> np.ndarray:
        """``rho`` with missing zeros replaced by ``inf``."""
        return np.array([math.inf if x is None else x for x in self.rho])

    @property
    def present(self) -> np.ndarray:
        return np.array([x is not None for x in self.rho])

    def inverse(self) -> tuple[np.ndarray, np.ndarray]:
        """Sampled ``A(R)``: present ``(R, a)`` pairs sorted by ``R``."""
        mask = self.present
        R = self.rho_extended[mask]
        order = np.argsort(R, kind="stable")
        return R[order], self.a[mask][order]


def _violations(rho_ext: np.ndarray) -> tuple[tuple[int, int], ...]:
    out = []
    for i in range(rho_ext.size):
        if math.isinf(rho_ext[i]):
            continue
        for j in range(i + 1, rho_ext.size):
            if rho_ext[i] < rho_ext[j]:
                out.append((i, j))
    return tuple(out)


def _shoot(psi, n, q, a, r_max, rtol) -> Trajectory | None:
    try:
        return integrate_cauchy(CauchyProblem(psi, n, q, a), r_max, rtol)
    except (RuntimeError, FloatingPointError, ValueError) as exc:
        log.warning("integration from a=%g failed: %s", a, exc)
        return None


def branch_trace(psi: ModelFunction, n: int, q: float, a_min: float, a_max: float,
                 count: int = 64, r_max: float = 100.0, *, rtol: float = 1e-10,
                 workers: int = 1, a_grid: Sequence[float] | None = None) -> DirichletBranch:
    """Shoot from ``count`` log-spaced heights and record the first zeros."""
    if not 0 < a_min < a_max:
        raise ValueError("need 0 < a_min < a_max")
    if count < 8:
        raise ValueError("count must be at least 8")
    a = np.asarray(a_grid, dtype=float) if a_grid is not None else np.geomspace(a_min, a_max, count)
    run = lambda x: _shoot(psi, n, q, float(x), r_max, rtol)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trajs = list(pool.map(run, a))
    else:
        trajs = [run(x) for x in a]
    if all(t is None for t in trajs):
        raise RuntimeError("every integration along the branch failed")
    rho, checks = [], []
    for x, t in zip(a, trajs):
        if t is None or t.rho is None:
            rho.append(None)
            checks.append(None)
        else:
            rho.append(float(t.rho))
            checks.append(float(abs(t.sample(t.rho)[0]) / x))
    ext = np.array([math.inf if x is None else x for x in rho])
    return DirichletBranch(a, tuple(rho), tuple(checks), psi, n, q, r_max, rtol, _violations(ext))


@dataclass(frozen=True, eq=False)
class BallSolution:
    R: float
    a: float
    trajectory: Trajectory = field(repr=False)
    mass: float
    sobolev_quotient: float

    @property
    def energy(self) -> float:
        return ball_integrals(self.trajectory)[1]


def ball_integrals(traj: Trajectory, subdivisions: int = 8) -> tuple[float, float]:
    """``int u^(q+1) psi^(n-1)`` and ``int u'^2 psi^(n-1)`` from the pole to the end."""
    p = traj.problem
    edges = traj.fine_grid(subdivisions)
    w = lambda r: p.psi.psi(r) ** (p.n - 1)  # noqa: E731
    mass = quad.panel_integrals(lambda r: np.abs(traj.sample(r)[0]) ** (p.q + 1) * w(r), edges)
    energy = quad.panel_integrals(lambda r: traj.sample(r)[1] ** 2 * w(r), edges)
    head, _ = integrate.quad(w, 0.0, edges[0])
    return float(mass.sum() + p.a ** (p.q + 1) * head), float(energy.sum())


def _rho_or_cap(psi, n, q, a, cap, rtol) -> float:
    t = integrate_cauchy(CauchyProblem(psi, n, q, a), cap, rtol)
    return cap if t.rho is None else float(t.rho)


def find_bracket(psi: ModelFunction, n: int, q: float, R: float, a0: float = 1.0,
                 factor: float = 4.0, max_steps: int = 40, rtol: float = 1e-10
                 ) -> tuple[float, float]:
    """Heights on either side of ``rho(a) = R``, found by geometric expansion from ``a0``.

    Assumes the branch crosses ``R`` going downward in ``a``, as on the
    hyperbolic and Euclidean spaces.
    """
    cap = 2.0 * R
    lo = hi = float(a0)
    if _rho_or_cap(psi, n, q, lo, cap, rtol) > R:
        for _ in range(max_steps):
            hi *= factor
            if _rho_or_cap(psi, n, q, hi, cap, rtol) < R:
                return hi / factor, hi
    else:
        for _ in range(max_steps):
            lo /= factor
            if _rho_or_cap(psi, n, q, lo, cap, rtol) > R:
                return lo, lo * factor
    raise RuntimeError(f"no bracket for R={R} within {max_steps} expansions of a0={a0}")


def dirichlet_solution(psi: ModelFunction, n: int, q: float, R: float,
                       a_bracket: tuple[float, float], *, rtol: float = 1e-12) -> BallSolution:
    """Height ``a`` with ``rho(a) = R`` inside the bracket, and its solution.

    The bracket must straddle ``R``: one end has its first zero before ``R``,
    the other after it (or none at all).
    """
    lo, hi = sorted(float(x) for x in a_bracket)
    if not (0 < lo < hi and R > SERIES_START):
        raise ValueError("invalid bracket or radius")
    cap = 2.0 * R
    g = lambda a: _rho_or_cap(psi, n, q, a, cap, rtol) - R  # noqa: E731
    g_lo, g_hi = g(lo), g(hi)
    if g_lo * g_hi >= 0:
        raise ValueError(f"bracket does not straddle R={R}: rho-R = {g_lo:.3g}, {g_hi:.3g}")
    a_star = optimize.brentq(g, lo, hi, xtol=1e-14 * lo, rtol=1e-15)
    traj = integrate_cauchy(CauchyProblem(psi, n, q, a_star), cap, rtol)
    if traj.rho is None or abs(traj.rho - R) >= ROOT_TOL * R:
        gap = math.inf if traj.rho is None else abs(traj.rho - R) / R
        raise RuntimeError(f"root a={a_star:.12g} leaves |rho-R|/R = {gap:.1e} above "
                           f"{ROOT_TOL:g}; rho is too steep in a here")
    mass, energy = ball_integrals(traj)
    quotient = math.sqrt(energy) / mass ** (1.0 / (q + 1))
    return BallSolution(float(traj.rho), float(a_star), traj, mass, quotient)


@dataclass(frozen=True)
class NonUniqueness:
    R: float
    a1: float
    a2: float
    solutions: tuple[BallSolution, BallSolution] = field(repr=False, compare=False)

    def as_dict(self) -> dict[str, float]:
        return {"R": self.R, "a1": self.a1, "a2": self.a2}


def _second_bracket(rho: np.ndarray, i: int, R: float) -> tuple[int, int] | None:
    """Another sign change of ``rho - R`` away from the ascent at ``i``.

    The descending part to the left is searched first: crossings to the right
    of an ascent may sit next to a height whose solution stays positive, where
    ``rho`` is too steep in ``a`` to resolve ``R`` to the root tolerance.
    """
    for k in range(i - 1, -1, -1):
        if rho[k] > R:
            return k, k + 1
    for k in range(i + 2, rho.size):
        if rho[k] < R:
            return k - 1, k
    return None


def detect_nonuniqueness(branch: DirichletBranch) -> list[NonUniqueness]:
    """Two heights sharing a first zero, one triple per ascent of the branch."""
    if int(branch.present.sum()) < 2:
        log.warning("fewer than two first zeros on the branch; nothing to bracket")
        return []
    rho = branch.rho_extended
    found: list[NonUniqueness] = []
    for i in range(rho.size - 1):
        if not rho[i] < rho[i + 1]:
            continue
        top = rho[i + 1] if math.isfinite(rho[i + 1]) else min(2.0 * rho[i], branch.r_max)
        R = 0.5 * (rho[i] + top)
        other = _second_bracket(rho, i, R)
        if other is None:
            continue
        if any(abs(x.R - R) < 1e-9 * R for x in found):
            continue
        try:
            sols = [dirichlet_solution(branch.psi, branch.n, branch.q, R,
                                       (branch.a[lo], branch.a[hi]), rtol=min(branch.rtol, 1e-12))
                    for lo, hi in ((i, i + 1), other)]
        except (RuntimeError, ValueError) as exc:
            log.warning("refinement at R=%g failed: %s", R, exc)
            continue
        s1, s2 = sorted(sols, key=lambda s: s.a)
        if abs(s1.R - s2.R) >= 1e-8 or abs(s2.a - s1.a) <= 1e-3 * s1.a:
            log.warning("refinement at R=%g did not separate two solutions", R)
            continue
        found.append(NonUniqueness(R, s1.a, s2.a, (s1, s2)))
    return found


@dataclass(frozen=True)
class ClaimsReport:
    R: tuple[float, ...]
    I_R: tuple[float, ...]
    heights: tuple[tuple[float, ...], ...]
    claims: dict
    violations: tuple[str, ...]
    diagnostics: dict

    @property
    def A(self) -> tuple[float | None, ...]:
        return tuple(h[0] if len(h) == 1 else None for h in self.heights)


def branch_claims_report(psi: ModelFunction, n: int, q: float, R_list: Sequence[float], *,
                         a_min: float = 1e-3, a_max: float = 1e4, count: int = 64,
                         mesh_size: int = 256, rtol: float = 1e-10,
                         tol: float = 1e-6) -> ClaimsReport:
    """Tabulate ``I_R`` and ``A(R)`` and test the branch structure.

    Checked claims: ``I_R`` nonincreasing; every sampled ``R`` has exactly one
    height and the heights decrease in ``R``; heights blow up at the small end
    (log-log slope below ``-1/(q-1)``).  The large-``R`` slope of ``A`` is
    reported as a diagnostic only, since heights need not tend to zero.
    """
    R = np.asarray(R_list, dtype=float)
    if R.size < 4 or np.any(np.diff(R) <= 0):
        raise ValueError("R_list must be increasing with at least 4 entries")
    I_R = [rayleigh_minimize(psi, n, q, float(x), mesh_size).I_R for x in R]
    branch = branch_trace(psi, n, q, a_min, a_max, count, r_max=4.0 * R[-1], rtol=rtol)
    rho = branch.rho_extended
    heights = []
    for x in R:
        hs = []
        for k in range(rho.size - 1):
            if (rho[k] - x) * (rho[k + 1] - x) < 0:
                hs.append(dirichlet_solution(psi, n, q, float(x), (branch.a[k], branch.a[k + 1])).a)
        heights.append(tuple(hs))
    violations = []
    for k in range(R.size - 1):
        if I_R[k + 1] > I_R[k] * (1 + tol):
            violations.append(f"I_R increases between R={R[k]:g} and R={R[k + 1]:g}")
    for x, hs in zip(R, heights):
        if len(hs) != 1:
            violations.append(f"R={x:g} has {len(hs)} heights")
    single = all(len(h) == 1 for h in heights)
    A = np.array([h[0] for h in heights]) if single else None
    decreasing = single and bool(np.all(np.diff(A) < 0))
    if single and not decreasing:
        violations.append("A(R) is not decreasing")
    slope_small = slope_large = math.nan
    if single:
        slope_small = float(np.log(A[1] / A[0]) / np.log(R[1] / R[0]))
        slope_large = float(np.log(A[-1] / A[-2]) / np.log(R[-1] / R[-2]))
    blow_up = bool(slope_small < -1.0 / (q - 1))
    if single and not blow_up:
        violations.append("A(R) does not blow up at the small end")
    claims = {
        "I_R_nonincreasing": not any(v.startswith("I_R") for v in violations),
        "A_injective": single,
        "A_decreasing": decreasing,
        "A_blows_up_small_R": blow_up,
    }
    diagnostics = {"slope_small_R": slope_small, "slope_large_R": slope_large,
                   "branch_violations": len(branch.monotone_violations)}
    return ClaimsReport(tuple(R), tuple(I_R), tuple(heights), claims, tuple(violations),
                        diagnostics)
