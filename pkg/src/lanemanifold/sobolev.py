"""Weighted radial Sobolev embeddings and truncated Rayleigh quotients.

The embedding of the radial energy space into ``L^p(psi^(n-1) dr)`` is
decided by the one-dimensional Hardy-type functional

    B(r) = (int_0^r psi^(n-1))^(1/p) * (int_r^inf psi^(1-n))^(1/2):

bounded means continuous, vanishing at both ends means compact.  The
quotient ``||f'||_2 / ||f||_(q+1)`` (both with weight ``psi^(n-1)``) is
minimised over P1 finite elements on ``[0, R]`` with ``f(R) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, linalg

from . import _quadrature as quad
from .model_manifold import ModelFunction, critical_exponents, pure_power_weight

VERDICTS = ("continuous_and_compact", "continuous_not_compact", "not_continuous")
R_INF = 1e4


# ---------------------------------------------------------------------------
# Kufner-Opic functional
# ---------------------------------------------------------------------------

def _tail_correction(psi: ModelFunction, n: int, r_inf: float) -> float:
    if psi.alpha is None or psi.kappa is None:
        raise ValueError("profile without declared power asymptotics (alpha, kappa)")
    d = psi.alpha * (n - 1)
    if d <= 1:
        raise ValueError("tail integral of psi^(1-n) diverges (alpha(n-1) <= 1)")
    return psi.kappa ** (1 - n) * r_inf ** (1.0 - d) / (d - 1.0)


def _ko_parts(psi: ModelFunction, n: int, radii: np.ndarray, r_inf: float,
              per_decade: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Volume ``V`` and tail ``T`` at the (positive) radii."""
    radii = np.asarray(radii, dtype=float)
    lo = float(np.min(radii))
    top = max(r_inf, float(np.max(radii)))
    count = max(int(math.log10(top / lo) * per_decade), 2) + 1
    extra = [b for b in psi.breakpoints if lo < b < top]
    grid = np.unique(np.concatenate((np.geomspace(lo, top, count), radii, extra, [r_inf])))
    head, _ = integrate.quad(lambda s: psi.psi(s) ** (n - 1), 0.0, lo, epsabs=0.0, epsrel=1e-12)
    vol = head + quad.cumulative(lambda s: psi.psi(s) ** (n - 1), grid, order=8, log=True)
    inv = quad.log_panel_integrals(lambda s: psi.psi(s) ** (1 - n), grid, order=8)
    # tail integral from each node to r_inf, then the power-law remainder
    k_inf = int(np.searchsorted(grid, r_inf))
    tail = np.zeros_like(grid)
    tail[:k_inf] = np.cumsum(inv[:k_inf][::-1])[::-1]
    corr = _tail_correction(psi, n, r_inf)
    beyond = grid > r_inf
    d = psi.alpha * (n - 1)
    tail[beyond] = psi.kappa ** (1 - n) * grid[beyond] ** (1.0 - d) / (d - 1.0) - corr
    tail = tail + corr
    idx = np.searchsorted(grid, radii)
    return vol[idx], tail[idx]


def ko_functional(psi: ModelFunction, n: int, p: float, r, r_inf: float = R_INF):
    """``B(r)`` with the tail integral closed by the power-law asymptotics."""
    if not p > 2:
        raise ValueError("p must exceed 2")
    x = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(x <= 0):
        raise ValueError("r must be positive")
    _tail_correction(psi, n, r_inf)
    vol, tail = _ko_parts(psi, n, x, r_inf)
    out = vol ** (1.0 / p) * np.sqrt(tail)
    return float(out[0]) if np.ndim(r) == 0 else out


@dataclass(frozen=True)
class EmbeddingReport:
    p: float
    sup_B: float
    limit_0: float
    limit_inf: float
    slope_0: float
    slope_inf: float
    verdict: str
    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.sup_B)


def _end_limit(slope: float, value: float, toward_zero: bool, tol: float) -> float:
    """Limit of ``B ~ c r^slope`` as ``r -> 0`` or ``r -> inf``."""
    s = slope if not toward_zero else -slope
    if s < -tol:
        return 0.0
    if s > tol:
        return math.inf
    return value


def embedding_report(psi: ModelFunction, n: int, p: float, r_lo: float = 1e-4,
                     r_hi: float = 1e4, per_decade: int = 40, slope_tol: float = 0.02
                     ) -> EmbeddingReport:
    """Sample ``B`` on a log grid and classify the embedding.

    Each end is extrapolated from a power-law fit over its outermost decade:
    a slope pointing outwards means unbounded, pointing inwards means a zero
    limit, and a flat end keeps the last sampled value.
    """
    if not p > 2:
        raise ValueError("p must exceed 2")
    count = int(round(math.log10(r_hi / r_lo) * per_decade)) + 1
    radii = np.geomspace(r_lo, r_hi, count)
    vals = ko_functional(psi, n, p, radii, r_inf=max(R_INF, r_hi))
    logs_r, logs_b = np.log(radii), np.log(vals)
    first = radii <= r_lo * 10 * (1 + 1e-12)
    last = radii >= r_hi / 10 * (1 - 1e-12)
    s0 = float(np.polyfit(logs_r[first], logs_b[first], 1)[0])
    s_inf = float(np.polyfit(logs_r[last], logs_b[last], 1)[0])
    lim0 = _end_limit(s0, float(vals[0]), True, slope_tol)
    lim_inf = _end_limit(s_inf, float(vals[-1]), False, slope_tol)
    sup = math.inf if math.isinf(lim0) or math.isinf(lim_inf) else float(np.max(vals))
    if math.isinf(sup):
        verdict = "not_continuous"
    elif lim0 < 1e-3 * sup and lim_inf < 1e-3 * sup:
        verdict = "continuous_and_compact"
    else:
        verdict = "continuous_not_compact"
    return EmbeddingReport(p, sup, lim0, lim_inf, s0, s_inf, verdict, radii, vals)


# ---------------------------------------------------------------------------
# Rayleigh quotient minimisation
# ---------------------------------------------------------------------------

def graded_mesh(R: float, elements: int, ratio: float = 1.05) -> np.ndarray:
    """Nodes on ``[0, R]`` with element sizes growing geometrically from both ends."""
    k = np.arange(elements)
    sizes = ratio ** np.minimum(k, elements - 1 - k).astype(float)
    nodes = np.concatenate(([0.0], np.cumsum(sizes)))
    return nodes * (R / nodes[-1])


class _Discretization:
    """P1 elements for ``int f'^2 w`` and ``int |f|^(q+1) w`` with ``f(R) = 0``."""

    def __init__(self, weight, R: float, elements: int, q: float, order: int = 6):
        self.q = q
        self.nodes = graded_mesh(R, elements)
        h = np.diff(self.nodes)
        x, wq = quad.gauss_legendre(order)
        pts = self.nodes[:-1, None] + h[:, None] * x[None, :]
        wvals = weight(pts)
        self.stiff = (wvals * wq[None, :]).sum(axis=1) / h
        self.xi = x
        self.W = wvals * wq[None, :] * h[:, None]
        k = self.stiff
        diag = np.concatenate(([0.0], k[:-1])) + k
        self.band = np.zeros((2, elements))
        self.band[0, 1:] = -k[:-1]
        self.band[1] = diag

    def full(self, f: np.ndarray) -> np.ndarray:
        return np.concatenate((f, [0.0]))

    def energy(self, f: np.ndarray) -> float:
        return float(np.sum(self.stiff * np.diff(self.full(f)) ** 2))

    def apply_stiffness(self, f: np.ndarray) -> np.ndarray:
        df = np.diff(self.full(f)) * self.stiff
        out = np.zeros_like(f)
        out -= df[: f.size]
        out[1:] += df[: f.size - 1]
        return out

    def _values(self, f: np.ndarray) -> np.ndarray:
        g = self.full(f)
        return g[:-1, None] * (1.0 - self.xi[None, :]) + g[1:, None] * self.xi[None, :]

    def mass(self, f: np.ndarray) -> float:
        return float(np.sum(self.W * np.abs(self._values(f)) ** (self.q + 1)))

    def load(self, f: np.ndarray) -> np.ndarray:
        """``b_i = int |f|^(q-1) f phi_i w`` (gradient of the mass over q+1)."""
        v = self._values(f)
        t = self.W * np.abs(v) ** (self.q - 1) * v
        left = (t * (1.0 - self.xi[None, :])).sum(axis=1)
        right = (t * self.xi[None, :]).sum(axis=1)
        out = np.zeros(f.size)
        out += left[: f.size]
        out[1:] += right[: f.size - 1]
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.solveh_banded(self.band, rhs)


@dataclass(frozen=True, eq=False)
class QuotientResult:
    """Minimiser rescaled to solve ``-Delta v = v^q`` on the ball.

    ``lam`` is the Lagrange multiplier of the minimiser normalised to unit
    ``L^(q+1)`` mass, i.e. the squared quotient.
    """

    R: float
    I_R: float
    r: np.ndarray
    minimizer: np.ndarray
    mass: float
    lam: float
    iterations: int
    converged: bool
    seed: str
    disc: _Discretization = field(repr=False)


def _seeds(r: np.ndarray, R: float, rng_seed: int | None) -> dict[str, np.ndarray]:
    seeds = {
        "constant": np.ones_like(r),
        "linear": 1.0 - r / R,
        "bump": np.exp(-((r / (0.3 * R)) ** 2)),
    }
    if rng_seed is not None:
        rng = np.random.default_rng(rng_seed)
        seeds["random"] = rng.uniform(0.5, 1.5, size=r.size) * (1.0 - r / R)
    return seeds


def _descend(disc: _Discretization, f: np.ndarray, max_iter: int, tol: float,
             patience: int) -> tuple[np.ndarray, float, int, bool]:
    """Stiffness-preconditioned projected gradient descent on the squared quotient."""
    q = disc.q
    f = np.abs(f) / disc.mass(f) ** (1.0 / (q + 1))
    J = disc.energy(f)
    history = [J]
    for it in range(1, max_iter + 1):
        grad = 2.0 * disc.apply_stiffness(f) - 2.0 * J * disc.load(f)
        d = disc.solve(grad)
        slope = float(grad @ d)
        t = 0.5
        accepted = False
        for _ in range(60):
            trial = np.abs(f - t * d)
            m = disc.mass(trial)
            if m > 0:
                trial /= m ** (1.0 / (q + 1))
                Jt = disc.energy(trial)
                if Jt <= J - 1e-4 * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            return f, J, it, True
        f, J = trial, Jt
        history.append(J)
        if len(history) > patience and abs(history[-1 - patience] - J) < tol * J:
            return f, J, it, True
    return f, J, max_iter, False


def _minimize(weight, R: float, q: float, mesh_size: int, max_iter: int, tol: float,
              patience: int, rng_seed: int | None) -> QuotientResult:
    if not R > 0:
        raise ValueError("R must be positive")
    if mesh_size < 64:
        raise ValueError("mesh_size must be at least 64")
    disc = _Discretization(weight, R, mesh_size, q)
    r_free = disc.nodes[:-1]
    best = None
    for name, seed in _seeds(r_free, R, rng_seed).items():
        f, J, its, ok = _descend(disc, seed, max_iter, tol, patience)
        if best is None or J < best[1]:
            best = (f, J, its, ok, name)
    f, J, its, ok, name = best
    v = J ** (1.0 / (q - 1)) * f
    return QuotientResult(R, math.sqrt(J), disc.nodes, disc.full(v), disc.mass(v), J, its, ok,
                          name, disc)


def rayleigh_minimize(psi: ModelFunction, n: int, q: float, R: float, mesh_size: int = 256,
                      *, max_iter: int = 100_000, tol: float = 1e-10, patience: int = 50,
                      rng_seed: int | None = None) -> QuotientResult:
    """Minimise the truncated weighted quotient on ``[0, R]``."""
    return _minimize(lambda s: psi.psi(s) ** (n - 1), R, q, mesh_size, max_iter, tol,
                     patience, rng_seed)


def quotient_of(result: QuotientResult) -> float:
    """Quotient of the stored minimiser, recomputed from scratch."""
    v = result.minimizer[:-1]
    d = result.disc
    return math.sqrt(d.energy(v)) / d.mass(v) ** (1.0 / (d.q + 1))


def euler_lagrange_residual(result: QuotientResult) -> float:
    """Relative defect of ``K v = b(v)`` at the rescaled minimiser."""
    v = result.minimizer[:-1]
    kv = result.disc.apply_stiffness(v)
    return float(np.max(np.abs(kv - result.disc.load(v))) / np.max(np.abs(kv)))


@dataclass(frozen=True)
class QuotientScan:
    results: tuple[QuotientResult, ...]
    relative_change_last: float
    fitted_power: float

    def rows(self) -> list[tuple[float, float, float, int, bool]]:
        return [(x.R, x.I_R, x.mass, x.iterations, x.converged) for x in self.results]


def quotient_limit_scan(psi: ModelFunction, n: int, q: float, R_list: Sequence[float],
                        mesh_size: int = 256, **kw) -> QuotientScan:
    """``I_R`` along increasing radii with a stabilisation and decay diagnostic.

    ``relative_change_last`` compares the last two radii (a doubling when the
    list is geometric with ratio two); ``fitted_power`` is the log-log slope of
    ``I_R`` over the second half of the list.
    """
    R = np.asarray(R_list, dtype=float)
    if R.size < 2 or np.any(np.diff(R) <= 0):
        raise ValueError("R_list must be increasing with at least two entries")
    results = tuple(rayleigh_minimize(psi, n, q, float(x), mesh_size, **kw) for x in R)
    vals = np.array([x.I_R for x in results])
    change = abs(vals[-1] - vals[-2]) / vals[-1]
    half = max(R.size // 2, 2)
    slope = float(np.polyfit(np.log(R[-half:]), np.log(vals[-half:]), 1)[0])
    return QuotientScan(results, float(change), slope)


@dataclass(frozen=True)
class QuotientComparison:
    I_psi: float
    I_alpha: float
    error_psi: float
    error_alpha: float
    strict_gap: bool

    @property
    def gap(self) -> float:
        return self.I_alpha - self.I_psi


def compare_I_alpha(psi: ModelFunction, n: int, alpha: float, kappa: float, R: float,
                    q: float | None = None, mesh_size: int = 256, **kw) -> QuotientComparison:
    """Truncated quotients of ``psi`` and of the pure weight ``kappa r^alpha``.

    Both use the same mesh; the discretisation error of each is estimated by
    halving the mesh, and the gap counts as strict when it exceeds three times
    the combined estimate.
    """
    crit = float(critical_exponents(n, alpha).two_star_alpha) - 1.0
    if q is None:
        q = crit
    if abs(q - crit) > 1e-12 * crit:
        raise ValueError("the comparison is defined at q = 2*_alpha - 1 only")
    power = pure_power_weight(alpha, kappa)
    vals = {}
    for key, prof in (("psi", psi), ("alpha", power)):
        fine = rayleigh_minimize(prof, n, q, R, mesh_size, **kw).I_R
        coarse = rayleigh_minimize(prof, n, q, R, mesh_size // 2, **kw).I_R
        vals[key] = (fine, abs(fine - coarse))
    gap = vals["alpha"][0] - vals["psi"][0]
    err = vals["alpha"][1] + vals["psi"][1]
    return QuotientComparison(vals["psi"][0], vals["alpha"][0], vals["psi"][1], vals["alpha"][1],
                              bool(gap > 3.0 * err))
