"""Energy and Pohozaev functions along shooting trajectories.

For a radial solution ``u`` with energy ``F = u'^2/2 + |u|^(q+1)/(q+1)`` the
Pohozaev function is

    P(r) = V(r) F(r) + psi(r)^(n-1) u u' / (q+1),   V(r) = int_0^r psi^(n-1),

and it satisfies ``P' = rate * u'^2`` with

    rate = psi^(n-1) (1/2 + 1/(q+1) - (n-1) psi'/psi^n V).

The sign of ``rate`` is exactly the structural condition checked by
``check_hp4``; the identity itself is the main numerical consistency test.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _quadrature as quad
from .model_manifold import critical_exponents
from .shooting import Trajectory


@dataclass(frozen=True, eq=False)
class PohozaevTrace:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    F: np.ndarray
    P: np.ndarray
    rate: np.ndarray
    cumvol: np.ndarray
    weight: np.ndarray
    trajectory: Trajectory

    def summands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``V u'^2/2``, ``V |u|^(q+1)/(q+1)`` and ``psi^(n-1) u u'/(q+1)``."""
        q = self.trajectory.problem.q
        return (self.cumvol * self.du ** 2 / 2.0,
                self.cumvol * np.abs(self.u) ** (q + 1) / (q + 1),
                self.weight * self.u * self.du / (q + 1))


def cumulative_volume(psi, n: int, grid: np.ndarray) -> np.ndarray:
    """``int_0^r psi^(n-1)`` at every point of an increasing positive grid."""
    grid = np.asarray(grid, dtype=float)
    head, _ = integrate.quad(lambda s: psi.psi(s) ** (n - 1), 0.0, grid[0], epsabs=0.0,
                             epsrel=1e-12)
    return head + quad.cumulative(lambda s: psi.psi(s) ** (n - 1), grid, order=8)


def pohozaev(trajectory: Trajectory, subdivisions: int = 64) -> PohozaevTrace:
    """Evaluate ``F``, ``P`` and the rate on the trajectory's refined grid."""
    p = trajectory.problem
    if p is None or p.psi is None:
        raise ValueError("trajectory carries no profile")
    n, q = p.n, p.q
    r = trajectory.fine_grid(subdivisions)
    u, du = trajectory.sample(r)
    vol = cumulative_volume(p.psi, n, r)
    w = p.psi.psi(r) ** (n - 1)
    energy = du ** 2 / 2.0 + np.abs(u) ** (q + 1) / (q + 1)
    P = vol * energy + w * u * du / (q + 1)
    rate = w * (0.5 + 1.0 / (q + 1) - (n - 1) * p.psi.logderiv(r) * vol / w)
    return PohozaevTrace(r, u, du, energy, P, rate, vol, w, trajectory)


def pohozaev_rate_identity(trace: PohozaevTrace) -> float:
    """Largest gap between ``dP/dr`` (central differences) and ``rate * u'^2``.

    The gap is divided by ``max(1, max|P|)``.  Only traces produced by
    :func:`pohozaev` from an integrated trajectory are accepted.
    """
    if not isinstance(trace, PohozaevTrace) or trace.trajectory.dense is None \
            or trace.trajectory.rtol is None:
        raise ValueError("trace must come from pohozaev() on an integrated trajectory")
    if trace.r.size < 9:
        raise ValueError("trace needs at least 9 points")
    dP = np.gradient(trace.P, trace.r)
    gap = np.abs(dP - trace.rate * trace.du ** 2)[1:-1]
    return float(np.max(gap) / max(1.0, float(np.max(np.abs(trace.P)))))


def is_nondecreasing(trace: PohozaevTrace, rel_tol: float = 1e-8) -> bool:
    scale = float(np.max(np.abs(trace.P)))
    return bool(np.min(np.diff(trace.P)) >= -rel_tol * scale)


def summand_exponents(trace: PohozaevTrace, window: tuple[float, float] | None = None
                      ) -> tuple[float, float, float]:
    """Log-log slopes of the three Pohozaev summands over a window (last decade)."""
    r_end = float(trace.r[-1])
    lo, hi = window if window is not None else (r_end / 10.0, r_end)
    mask = (trace.r >= lo) & (trace.r <= hi)
    x = np.log(trace.r[mask])
    return tuple(float(np.polyfit(x, np.log(np.abs(s[mask])), 1)[0]) for s in trace.summands())


@dataclass(frozen=True)
class AmplitudeEstimate:
    L: float
    Lprime: float
    identity_defect: float
    exponent: float
    window: tuple[float, float]


def _trimmed_geomean(values: np.ndarray, trim: float = 0.05) -> float:
    logs = np.sort(np.log(values))
    k = int(trim * logs.size)
    core = logs[k: logs.size - k] if logs.size - 2 * k > 0 else logs
    return float(np.exp(core.mean()))


def amplitude_limit(trajectory: Trajectory, alpha: float | None = None,
                    points: int = 400) -> AmplitudeEstimate:
    """Tail limits of ``r^e u`` and ``r^(e+1) |u'|`` with ``e = (alpha(n-1)-1)/2``.

    Also returns ``|L^(2*_alpha - 2) - e^2|``, the defect of the amplitude
    identity that holds in the critical case.
    """
    p = trajectory.problem
    if p.psi.alpha is None:
        raise ValueError("profile does not declare polynomial growth (alpha)")
    a = float(alpha if alpha is not None else p.psi.alpha)
    r_end = float(trajectory.r[-1])
    if r_end < 100.0:
        raise ValueError("trajectory must reach r >= 100")
    rs = np.geomspace(r_end / 10.0, r_end, points)
    u, du = trajectory.sample(rs)
    if np.any(u <= 0):
        raise ValueError("negative samples in the tail window")
    e = (a * (p.n - 1) - 1.0) / 2.0
    L = _trimmed_geomean(rs ** e * u)
    Lp = _trimmed_geomean(rs ** (e + 1) * np.abs(du))
    star = float(critical_exponents(p.n, a).two_star_alpha)
    return AmplitudeEstimate(L, Lp, abs(L ** (star - 2) - e ** 2), e, (r_end / 10.0, r_end))
