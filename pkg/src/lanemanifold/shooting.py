"""Radial Cauchy problem for ``-Delta u = |u|^(q-1) u`` on a model manifold.

The radial equation ``u'' + (n-1) (psi'/psi) u' + |u|^(q-1) u = 0`` is
singular at the pole.  Integration starts at a small radius from the
two-term series of the regular solution and proceeds with an embedded
Dormand-Prince pair until the first zero, a blow-up, or ``r_max``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import _quadrature as quad
from .model_manifold import ModelFunction

EVENT_KINDS = ("first_zero", "reached_r_max", "blow_up", "step_underflow")
BLOW_UP = 1e12
SERIES_START = 1e-6


@dataclass(frozen=True)
class CauchyProblem:
    psi: ModelFunction
    n: int
    q: float
    a: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if not self.q > 1:
            raise ValueError("q must exceed 1")
        if not self.a > 0:
            raise ValueError("a must be positive")

    def rhs(self, r: float, y):
        u, v = y[0], y[1]
        return [v, -(self.n - 1) * self.psi.logderiv(r) * v - abs(u) ** (self.q - 1) * u]

    def series_start(self, eps: float) -> tuple[float, float]:
        """Two-term expansion of the regular solution near the pole."""
        aq = self.a ** self.q
        return self.a - aq * eps ** 2 / (2 * self.n), -aq * eps / self.n


@dataclass(frozen=True)
class Event:
    kind: str
    r: float | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solver nodes plus the dense interpolant of the solution.

    ``dense`` maps radii in ``[r[0], r[-1]]`` to ``(u, u')``.  Hand-made
    trajectories (synthetic data in tests) may leave it unset.
    """

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    event: Event
    problem: CauchyProblem
    rtol: float | None = None
    atol: float | None = None
    dense: object | None = field(default=None, repr=False)

    @property
    def rho(self) -> float | None:
        return self.event.r if self.event.kind == "first_zero" else None

    def sample(self, r) -> tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        if self.dense is None:
            return np.interp(r, self.r, self.u), np.interp(r, self.r, self.du)
        vals = self.dense(r)
        return vals[0], vals[1]

    def fine_grid(self, subdivisions: int = 16) -> np.ndarray:
        """Solver nodes with every step split into equal parts."""
        if self.dense is None:
            return self.r.copy()
        return quad.refine(self.r, subdivisions)


def _events(stop_at_zero: bool):
    """Fresh event functions per integration (solve_ivp reads their attributes)."""

    def zero(r, y):
        return y[0]

    def blow(r, y):
        return BLOW_UP - max(abs(y[0]), abs(y[1]))

    zero.direction = -1
    zero.terminal = stop_at_zero
    blow.terminal = True
    return zero, blow


def integrate_cauchy(problem: CauchyProblem, r_max: float, rtol: float = 1e-10,
                     atol: float | None = None, *, r_start: float = SERIES_START,
                     continue_past_zero: bool = False, method: str = "DOP853") -> Trajectory:
    """Integrate from the series start to the first terminating event.

    ``atol`` defaults to ``1e-14 * a``.  With ``continue_past_zero`` the
    integration runs on through sign changes (the nonlinearity is odd) and
    the event still reports the first zero.
    """
    if not r_max > r_start:
        raise ValueError("r_max must exceed the series start radius")
    if not (rtol > 0 and (atol is None or atol > 0)):
        raise ValueError("tolerances must be positive")
    if atol is None:
        atol = 1e-14 * problem.a
    y0 = problem.series_start(r_start)
    sol = integrate.solve_ivp(problem.rhs, (r_start, r_max), y0, method=method, rtol=rtol,
                              atol=atol, dense_output=True,
                              events=_events(not continue_past_zero))
    r, y = sol.t, sol.y
    zeros = sol.t_events[0]
    if sol.status == -1:
        if "step size" not in sol.message:
            raise RuntimeError(f"integration failed: {sol.message}")
        event = Event("step_underflow", float(r[-1]))
    elif sol.t_events[1].size:
        event = Event("blow_up", float(sol.t_events[1][0]))
    elif zeros.size:
        rho = _refine_root(sol.sol, float(zeros[0]), r, problem.a)
        event = Event("first_zero", rho)
        if not continue_past_zero:
            r = np.concatenate((r[r < rho], [rho]))
            y = np.concatenate((y[:, : r.size - 1], sol.sol(rho)[:, None]), axis=1)
    else:
        event = Event("reached_r_max")
    if event.kind == "first_zero" and continue_past_zero and sol.t_events[1].size:
        event = Event("blow_up", float(sol.t_events[1][0]))
    return Trajectory(np.asarray(r), y[0].copy(), y[1].copy(), event, problem, rtol, atol, sol.sol)


def _refine_root(dense, guess: float, nodes: np.ndarray, a: float) -> float:
    """Tighten the event root on the dense interpolant when needed."""
    if abs(dense(guess)[0]) < 1e-10 * a:
        return guess
    k = int(np.searchsorted(nodes, guess))
    lo = nodes[max(k - 1, 0)]
    hi = nodes[min(k, nodes.size - 1)]
    return float(optimize.brentq(lambda s: dense(s)[0], lo, hi, xtol=1e-15, rtol=1e-15))


def first_zero(problem: CauchyProblem, r_max: float, rtol: float = 1e-10,
               atol: float | None = None) -> float | None:
    """Radius of the first zero, or ``None`` if there is none before ``r_max``."""
    return integrate_cauchy(problem, r_max, rtol, atol).rho


def residual(trajectory: Trajectory, subdivisions: int = 16) -> float:
    """Largest normalised defect of the radial equation on the dense grid.

    ``u''`` comes from the fourth-order central difference of ``u'`` with the
    local grid spacing as step; the defect is divided by ``max(1, |u|^q)``.
    """
    if trajectory.r.size < 5:
        raise ValueError("trajectory needs at least 5 grid points")
    p = trajectory.problem
    grid = trajectory.fine_grid(subdivisions)
    r = grid[1:-1]
    h = np.minimum(r - grid[:-2], grid[2:] - r) / 2.0
    u, du = trajectory.sample(r)
    d = [trajectory.sample(r + k * h)[1] for k in (-2, -1, 1, 2)]
    d2u = (d[0] - 8.0 * d[1] + 8.0 * d[2] - d[3]) / (12.0 * h)
    defect = d2u + (p.n - 1) * p.psi.logderiv(r) * du + np.abs(u) ** (p.q - 1) * u
    return float(np.max(np.abs(defect) / np.maximum(1.0, np.abs(u) ** p.q)))


@dataclass(frozen=True)
class DecayFit:
    exponent_u: float
    exponent_du: float
    window: tuple[float, float]
    residual: float


def decay_fit(trajectory: Trajectory, window: tuple[float, float] | None = None,
              points: int = 400) -> DecayFit:
    """Log-log slopes of ``u`` and ``|u'|`` over a window (default: last decade)."""
    r_end = float(trajectory.r[-1])
    lo, hi = window if window is not None else (r_end / 10.0, r_end)
    if not (0 < lo < hi <= r_end * (1 + 1e-12) and lo >= trajectory.r[0]):
        raise ValueError("window must lie inside the trajectory grid")
    rs = np.geomspace(lo, min(hi, r_end), points)
    u, du = trajectory.sample(rs)
    if np.any(u <= 0) or np.any(du == 0):
        raise ValueError("decay fit needs positive u and nonzero u' in the window")
    x = np.log(rs)
    cu, res_u, *_ = np.polyfit(x, np.log(u), 1, full=True)
    cd, res_d, *_ = np.polyfit(x, np.log(np.abs(du)), 1, full=True)
    rms = math.sqrt((float(np.sum(res_u)) + float(np.sum(res_d))) / (2 * points))
    return DecayFit(float(cu[0]), float(cd[0]), (lo, hi), rms)
