"""Explicit supersolutions and a model manifold carrying a global positive solution.

Supersolutions
    ``w = A (B + r^2)^(-1/(q-1))`` is a supersolution of ``-Delta w = w^q``
    once ``r psi'/psi`` stays above ``alpha - eps`` far out and ``A`` is
    small, ``B`` large enough.

Gluing
    The positive Dirichlet solution ``w1`` of the hyperbolic unit ball is
    touched from above by an exact power-decay solution ``w2 = c (r - r0)^-b``
    of the flat power model ``kappa (r - r0)^alpha``.  Gluing the two along
    the contact point gives a C^1 function ``u`` on a Lipschitz profile.

Smoothing
    In the variable ``F = u^(1-q)`` the equation can be solved for
    ``psi'/psi``, so any positive ``F`` with ``F' > 0`` defines a profile on
    which ``F^(-1/(q-1))`` is an exact solution.  The second derivative jump
    at the contact point is spread linearly over a window of length ``eps``
    (C^1 profile), then the remaining third-derivative jumps are blended by
    a smooth step (C^inf profile).  Beyond the windows ``F`` is an exact
    quadratic, so the profile tail is available in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import interpolate, optimize

from . import _quadrature as quad
from .diagnostics import pohozaev
from .dirichlet import BallSolution, dirichlet_solution, find_bracket
from .model_manifold import ModelFunction, check_hp4, critical_exponents, make_profile
from .shooting import SERIES_START, CauchyProblem, decay_fit, integrate_cauchy, residual

R_CHECK = 1e4


def _tilde_exponent(n: int, alpha: float) -> float:
    return float(critical_exponents(n, alpha).two_tilde)


# ---------------------------------------------------------------------------
# supersolutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Supersolution:
    A: float
    B: float
    eps: float
    r_eps: float
    q: float

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("A and B must be positive")

    def w(self, r):
        return self.A / (self.B + np.asarray(r, dtype=float) ** 2) ** (1.0 / (self.q - 1))

    def normalized_residual(self, psi: ModelFunction, n: int, r) -> np.ndarray:
        """``(-w'' - (n-1)(psi'/psi) w' - w^q) / w^q`` in closed form."""
        r = np.asarray(r, dtype=float)
        q = self.q
        m = 1.0 / (q - 1)
        s = r ** 2 / (self.B + r ** 2)
        bracket = 2 * m - 4 * m * (m + 1) * s + 2 * m * (n - 1) * psi.logderiv(r) * r
        return self.A ** (1 - q) * bracket - 1.0

    def residual(self, psi: ModelFunction, n: int, r) -> np.ndarray:
        return self.normalized_residual(psi, n, r) * self.w(r) ** self.q


@dataclass(frozen=True)
class SupersolutionCheck:
    holds: bool
    min_residual: float
    worst_r: float


def verify_supersolution(sup: Supersolution, psi: ModelFunction, n: int, r_lo: float = 1e-4,
                         r_hi: float = R_CHECK, points: int = 20001) -> SupersolutionCheck:
    """Minimum of the normalised supersolution residual on a log grid."""
    grid = np.geomspace(r_lo, r_hi, points)
    res = sup.normalized_residual(psi, n, grid)
    k = int(np.argmin(res))
    return SupersolutionCheck(bool(res[k] >= 0), float(res[k]), float(grid[k]))


def build_supersolution(psi: ModelFunction, n: int, alpha: float, q: float,
                        eps: float | None = None, *, r_lo: float = 1e-4, r_hi: float = R_CHECK,
                        retries: int = 5) -> Supersolution:
    """Choose ``(A, B)`` with 10% slack in both inequalities and verify.

    ``eps`` is capped at half of ``alpha - (2q/(q-1) - 1)/(n-1)``, the largest
    value for which the far-field inequality can hold.  ``r_eps`` is the
    first grid radius beyond which ``r psi'/psi >= alpha - eps``.
    """
    if not q > _tilde_exponent(n, alpha) * (1 + 1e-12):
        raise ValueError("no supersolution exists for q <= (alpha(n-1)+1)/(alpha(n-1)-1)")
    m = 1.0 / (q - 1)
    eps_max = alpha - (2 * q * m - 1) / (n - 1)
    eps = eps_max / 2 if eps is None else min(float(eps), eps_max / 2)
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid = np.geomspace(r_lo, r_hi, 20001)
    slope = grid * psi.logderiv(grid)
    if np.min(slope) < 0:
        raise ValueError("psi must be nondecreasing")
    bad = np.nonzero(slope < alpha - eps)[0]
    if bad.size and bad[-1] == grid.size - 1:
        raise ValueError(f"r psi'/psi stays below alpha - eps up to r = {r_hi:g}")
    r_eps = float(grid[bad[-1] + 1]) if bad.size else float(r_lo)
    bound = min(2 * m * (1 - 2 * q * m + (alpha - eps) * (n - 1)), 2 * m)
    Aq = 0.9 * bound
    theta = (2 * m - Aq) / (4 * m * (m + 1))
    B = 1.1 * r_eps ** 2 * (1 / theta - 1) + 1e-12
    for _ in range(retries + 1):
        sup = Supersolution(Aq ** m, B, eps, r_eps, q)
        if verify_supersolution(sup, psi, n, r_lo, r_hi).holds:
            return sup
        Aq /= 2.0
        B *= 2.0
    raise RuntimeError("supersolution verification failed after all retries")


# ---------------------------------------------------------------------------
# exact power-decay solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerTail:
    """``c (r - r0)^(-2/(q-1))``, an exact solution on ``kappa (r - r0)^alpha``."""

    c: float
    r0: float
    q: float
    n: int
    alpha: float

    @property
    def exponent(self) -> float:
        return 2.0 / (self.q - 1)

    def derivatives(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = np.asarray(r, dtype=float) - self.r0
        b = self.exponent
        w = self.c * s ** -b
        return w, -b * w / s, b * (b + 1) * w / s ** 2

    def __call__(self, r):
        return self.derivatives(r)[0]

    def residual(self, r) -> np.ndarray:
        """Defect of ``w'' + alpha(n-1)/(r-r0) w' + w^q`` relative to its largest term."""
        w, dw, ddw = self.derivatives(r)
        s = np.asarray(r, dtype=float) - self.r0
        terms = (ddw, self.alpha * (self.n - 1) / s * dw, w ** self.q)
        scale = np.maximum.reduce([np.abs(t) for t in terms])
        return sum(terms) / scale


def w2_tail(n: int, alpha: float, q: float, r0: float) -> PowerTail:
    """Exact decaying solution with ``c^(q-1) = 2/(q-1) (alpha(n-1) - (q+1)/(q-1))``."""
    lead = alpha * (n - 1) - (q + 1) / (q - 1)
    if not lead > 0:
        raise ValueError("alpha(n-1) <= (q+1)/(q-1): the tail constant is undefined")
    tail = PowerTail((2.0 / (q - 1) * lead) ** (1.0 / (q - 1)), float(r0), float(q), int(n),
                     float(alpha))
    sample = r0 + np.geomspace(1e-2, 1e2, 20)
    if np.max(np.abs(tail.residual(sample))) >= 1e-10:
        raise RuntimeError("power tail fails its own equation")
    return tail


# ---------------------------------------------------------------------------
# hyperbolic ball solution with derivatives up to third order
# ---------------------------------------------------------------------------

class _CoreSolution:
    """The unit-ball solution ``w1`` on hyperbolic space and its derivatives."""

    def __init__(self, ball: BallSolution, n: int, q: float):
        self.ball, self.n, self.q = ball, n, q
        self.a = ball.a

    def derivatives(self, r) -> tuple[np.ndarray, ...]:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        n, q, a = self.n, self.q, self.a
        w = np.empty_like(r)
        dw = np.empty_like(r)
        inner = r < SERIES_START
        w[inner] = a - a ** q * r[inner] ** 2 / (2 * n)
        dw[inner] = -a ** q * r[inner] / n
        if np.any(~inner):
            w[~inner], dw[~inner] = self.ball.trajectory.sample(r[~inner])
        # the ODE form is only used off the pole, where sinh(r) is not tiny
        rr = np.where(inner, 1.0, r)
        coth = 1.0 / np.tanh(rr)
        ddw = np.where(inner, -a ** q / n, -(n - 1) * coth * dw - np.abs(w) ** q)
        csch2 = 1.0 / np.sinh(rr) ** 2
        dddw = np.where(inner, 0.0,
                        -(n - 1) * (-csch2 * dw + coth * ddw) - q * np.abs(w) ** (q - 1) * dw)
        return w, dw, ddw, dddw

    def F(self, r) -> tuple[np.ndarray, ...]:
        """``F = w^(1-q)`` and its first three derivatives."""
        w, d1, d2, d3 = self.derivatives(r)
        m = 1.0 - self.q
        F = w ** m
        F1 = m * w ** (m - 1) * d1
        F2 = m * (m - 1) * w ** (m - 2) * d1 ** 2 + m * w ** (m - 1) * d2
        F3 = (m * (m - 1) * (m - 2) * w ** (m - 3) * d1 ** 3
              + 3 * m * (m - 1) * w ** (m - 2) * d1 * d2 + m * w ** (m - 1) * d3)
        return F, F1, F2, F3


def hyperbolic_ball(n: int, q: float, R: float = 1.0) -> BallSolution:
    hyp = make_profile("hyperbolic")
    return dirichlet_solution(hyp, n, q, R, find_bracket(hyp, n, q, R))


# ---------------------------------------------------------------------------
# profiles generated by F
# ---------------------------------------------------------------------------

def _log_derivative(F, F1, F2, n: int, q: float):
    """``psi'/psi`` making ``F^(-1/(q-1))`` an exact solution."""
    return ((q - 1) / F1 + q / (q - 1) * F1 / F - F2 / F1) / (n - 1)


def curvature_from_F(F, F1, F2, F3, n: int, q: float):
    """``(n-1)^2 psi''/psi`` written through ``F`` and its derivatives."""
    k = q / (q - 1)
    first = ((q - 1) ** 2 + n * F2 ** 2 - (n + 1) * (q - 1) * F2 - (n - 1) * F1 * F3) / F1 ** 2
    second = (2 * q * F + q * (n - 3) / (q - 1) * F * F2 + k * (k - (n - 1)) * F1 ** 2) / F ** 2
    return first + second


def _bump(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(u):
    """C^inf step from 0 (``u <= -1``) to 1 (``u >= 1``) with ``S(u) + S(-u) = 1``."""
    u = np.asarray(u, dtype=float)
    a, b = _bump(1 + u), _bump(1 - u)
    return a / (a + b)


def smooth_step_derivative(u):
    u = np.asarray(u, dtype=float)
    a, b = _bump(1 + u), _bump(1 - u)
    da = np.where(1 + u > 0, a / np.where(1 + u > 0, 1 + u, 1.0) ** 2, 0.0)
    db = np.where(1 - u > 0, b / np.where(1 - u > 0, 1 - u, 1.0) ** 2, 0.0)
    return (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class _Window:
    """Third-derivative blend across a jump at ``c`` with half-width ``delta``."""

    c: float
    delta: float
    left: Callable
    right: Callable
    corr: float = 0.0
    moments: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def phi3(self, t):
        u = (np.asarray(t, dtype=float) - self.c) / self.delta
        jump = self.right(t) - self.left(t)
        heaviside = (u > 0).astype(float)
        return (smooth_step(u) - heaviside) * jump + self.corr * smooth_step_derivative(u) / self.delta

    @classmethod
    def build(cls, c: float, delta: float, left: Callable, right: Callable,
              order: int = 48) -> "_Window":
        x, w = quad.gauss_legendre(order)
        halves = [(c - delta, c), (c, c + delta)]
        def integral(f):
            return sum(float(np.sum(f(lo + (hi - lo) * x) * w) * (hi - lo)) for lo, hi in halves)
        base = cls(c, delta, left, right)
        corr = -integral(base.phi3)
        win = cls(c, delta, left, right, corr)
        mom = tuple(integral(lambda s, k=k: (s - c) ** k * win.phi3(s)) for k in range(3))
        return cls(c, delta, left, right, corr, mom)

    def perturbation(self, t, order: int = 48) -> tuple[np.ndarray, ...]:
        """``Phi`` and its first three derivatives (``Phi''' = phi3``, zero before the window)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = [np.zeros_like(t) for _ in range(4)]
        lo, hi = self.c - self.delta, self.c + self.delta
        inside = (t > lo) & (t < hi)
        after = t >= hi
        mu0, mu1, mu2 = self.moments
        out[0][after] = mu2 / 2 - (t[after] - self.c) * mu1
        out[1][after] = -mu1
        out[2][after] = mu0
        if np.any(inside):
            x, w = quad.gauss_legendre(order)
            ti = t[inside]
            acc = [np.zeros_like(ti) for _ in range(3)]
            for a, b in ((np.full_like(ti, lo), np.minimum(ti, self.c)),
                         (np.full_like(ti, self.c), np.maximum(ti, self.c))):
                s = a[:, None] + (b - a)[:, None] * x[None, :]
                wt = w[None, :] * (b - a)[:, None]
                ph = self.phi3(s.ravel()).reshape(s.shape) * wt
                d = ti[:, None] - s
                acc[0] += np.sum(ph * d ** 2 / 2, axis=1)
                acc[1] += np.sum(ph * d, axis=1)
                acc[2] += np.sum(ph, axis=1)
            for k in range(3):
                out[k][inside] = acc[k]
            out[3][inside] = self.phi3(ti)
        return tuple(out)


class FProfile:
    """Profile and solution generated by ``F`` (optionally with blended windows).

    ``F`` equals the core ``F1`` left of ``r_bar``, a cubic on
    ``(r_bar, r_bar + eps]`` whose second derivative moves linearly from
    ``A_tilde`` to ``A``, and a quadratic with ``F'' = A`` beyond.
    """

    def __init__(self, core: _CoreSolution, n: int, q: float, alpha: float, r_bar: float,
                 A: float, A_tilde: float, B: float, C: float, eps: float,
                 windows: tuple[_Window, ...] = (), panels: int = 400):
        self.core, self.n, self.q, self.alpha = core, n, q, alpha
        self.r_bar, self.A, self.A_tilde, self.B, self.C, self.eps = r_bar, A, A_tilde, B, C, eps
        self.windows = windows
        self.r_left = min([r_bar] + [w.c - w.delta for w in windows])
        self.r_tail = max([r_bar + eps] + [w.c + w.delta for w in windows])
        cuts = sorted({self.r_left, r_bar, r_bar + eps, self.r_tail}
                      | {w.c + s * w.delta for w in windows for s in (-1, 0, 1)})
        edges = np.unique(np.concatenate([np.linspace(a, b, panels + 1)
                                          for a, b in zip(cuts[:-1], cuts[1:])]))
        self.breakpoints = tuple(cuts)
        logpsi = math.log(math.sinh(self.r_left)) + quad.cumulative(self._h_right, edges, order=8)
        self._cache = interpolate.CubicHermiteSpline(edges, logpsi, self._h_right(edges))
        self._log_tail0 = float(logpsi[-1])
        F, F1, _, _ = self.F(np.array([self.r_tail]))
        self._F_tail0 = (float(F[0]), float(F1[0]))
        self.e1 = ((q - 1) / A - 1) / (n - 1)
        self.e2 = q / ((q - 1) * (n - 1))
        E = math.exp(self._log_tail0) / (self._F_tail0[1] ** self.e1 * self._F_tail0[0] ** self.e2)
        self.kappa = E * A ** self.e1 * (A / 2) ** self.e2
        # fast evaluation of psi'/psi for the integrator: cubic Hermite pieces
        # between consecutive cuts (h' may jump at a cut), quadratic F beyond
        self._cuts = np.array(cuts)
        self._h_pieces = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            nodes = np.linspace(a, b, panels + 1)
            inner = nodes.copy()
            inner[0] += 1e-13 * max(1.0, abs(a))
            inner[-1] -= 1e-13 * max(1.0, abs(b))
            F, F1, F2, F3 = self.F(inner)
            h = _log_derivative(F, F1, F2, n, q)
            dh = curvature_from_F(F, F1, F2, F3, n, q) / (n - 1) ** 2 - h ** 2
            self._h_pieces.append(interpolate.CubicHermiteSpline(nodes, h, dh))
        self._tail_quad = (self._F_tail0[0], self._F_tail0[1], A)

    # -- F and its derivatives -------------------------------------------------
    def _base(self, r: np.ndarray) -> list[np.ndarray]:
        x = r - self.r_bar
        A, At, B, C, eps = self.A, self.A_tilde, self.B, self.C, self.eps
        out = [np.empty_like(r) for _ in range(4)]
        left, mid, right = x <= 0, (x > 0) & (x <= eps), x > eps
        if np.any(left):
            vals = self.core.F(r[left])
            for k in range(4):
                out[k][left] = vals[k]
        xm = x[mid]
        out[0][mid] = C + B * xm + At * xm ** 2 / 2 - (At - A) * xm ** 3 / (6 * eps)
        out[1][mid] = B + At * xm - (At - A) * xm ** 2 / (2 * eps)
        out[2][mid] = At - (At - A) * xm / eps
        out[3][mid] = -(At - A) / eps
        xr = x[right]
        b1 = B + (At - A) * eps / 2
        c0 = C - (At - A) * eps ** 2 / 6
        out[0][right] = A * xr ** 2 / 2 + b1 * xr + c0
        out[1][right] = A * xr + b1
        out[2][right] = A
        out[3][right] = 0.0
        return out

    def F(self, r) -> tuple[np.ndarray, ...]:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        vals = self._base(r)
        for win in self.windows:
            extra = win.perturbation(r)
            for k in range(4):
                vals[k] = vals[k] + extra[k]
        return tuple(vals)

    def third_derivative_jumps(self) -> tuple[float, float]:
        """Jumps of the unblended ``F'''`` at ``r_bar`` and ``r_bar + eps``."""
        left = float(self.core.F(np.array([self.r_bar]))[3][0])
        mid = -(self.A_tilde - self.A) / self.eps
        return mid - left, -mid

    def _h_right(self, r):
        F, F1, F2, _ = self.F(r)
        return _log_derivative(F, F1, F2, self.n, self.q)

    # -- profile ---------------------------------------------------------------
    def log_psi(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        core = r <= self.r_left
        tail = r >= self.r_tail
        mid = ~core & ~tail
        with np.errstate(over="ignore"):
            out[core] = np.log(np.sinh(np.maximum(r[core], 1e-300)))
        out[mid] = self._cache(r[mid])
        if np.any(tail):
            F, F1, _, _ = self.F(r[tail])
            out[tail] = (self._log_tail0 + self.e1 * np.log(F1 / self._F_tail0[1])
                         + self.e2 * np.log(F / self._F_tail0[0]))
        return out

    def _h_tail(self, r):
        F0, F1, A = self._tail_quad
        x = r - self.r_tail
        F = F0 + F1 * x + A * x * x / 2
        dF = F1 + A * x
        return _log_derivative(F, dF, A, self.n, self.q)

    def logderiv(self, r) -> np.ndarray:
        if np.ndim(r) == 0:
            x = float(r)
            if x <= self.r_left:
                return np.array([1.0 / math.tanh(max(x, 1e-300))])
            if x >= self.r_tail:
                return np.array([self._h_tail(x)])
            k = min(int(np.searchsorted(self._cuts, x)) - 1, len(self._h_pieces) - 1)
            return np.array([float(self._h_pieces[k](x))])
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        core = r <= self.r_left
        tail = r >= self.r_tail
        out[core] = 1.0 / np.tanh(np.maximum(r[core], 1e-300))
        out[tail] = self._h_tail(r[tail])
        mid = ~core & ~tail
        if np.any(mid):
            idx = np.clip(np.searchsorted(self._cuts, r[mid]) - 1, 0, len(self._h_pieces) - 1)
            vals = np.empty(int(mid.sum()))
            for k in np.unique(idx):
                sel = idx == k
                vals[sel] = self._h_pieces[k](r[mid][sel])
            out[mid] = vals
        return out

    def curvature_ratio(self, r) -> np.ndarray:
        """``psi''/psi``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.ones_like(r)
        right = r > self.r_left
        if np.any(right):
            out[right] = curvature_from_F(*self.F(r[right]), self.n, self.q) / (self.n - 1) ** 2
        return out

    def model(self, stage: str) -> ModelFunction:
        def psi(r):
            return np.exp(self.log_psi(r)).reshape(np.shape(r))

        def dpsi(r):
            return (np.exp(self.log_psi(r)) * self.logderiv(r)).reshape(np.shape(r))

        def ddpsi(r):
            return (np.exp(self.log_psi(r)) * self.curvature_ratio(r)).reshape(np.shape(r))

        def pole_safe(fn, at_zero):
            def wrapped(r):
                x = np.asarray(r, dtype=float)
                vals = fn(np.where(x > 0, x, 1.0))
                return np.where(x > 0, vals.reshape(np.shape(x)), at_zero).reshape(np.shape(x))
            return wrapped

        return ModelFunction("tabulated", {"stage": stage},
                             pole_safe(psi, 0.0), pole_safe(dpsi, 1.0), pole_safe(ddpsi, 0.0),
                             lambda r: self.logderiv(r).reshape(np.shape(r)),
                             lambda r: self.curvature_ratio(r).reshape(np.shape(r)),
                             alpha=self.alpha, kappa=self.kappa, breakpoints=self.breakpoints)

    # -- solution --------------------------------------------------------------
    def u(self, r) -> tuple[np.ndarray, np.ndarray]:
        """``u = F^(-1/(q-1))`` and ``u'``; the core solution left of the windows."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u = np.empty_like(r)
        du = np.empty_like(r)
        core = r <= self.r_left
        w, dw, _, _ = self.core.derivatives(r[core])
        u[core], du[core] = w, dw
        if np.any(~core):
            F, F1, _, _ = self.F(r[~core])
            g = 1.0 / (self.q - 1)
            u[~core] = F ** -g
            du[~core] = -g * F ** (-g - 1) * F1
        return u, du


# ---------------------------------------------------------------------------
# glued profile and its smoothing stages
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GluedProfile:
    n: int
    alpha: float
    q: float
    r_tilde: float
    r_bar: float
    kappa: float
    c: float
    u0: float
    psi_bar: ModelFunction = field(repr=False)
    core: _CoreSolution = field(repr=False)
    tail: PowerTail = field(repr=False)
    tangency: dict = field(default_factory=dict)
    F_coeffs: tuple[float, float, float] | None = None
    A_tilde: float | None = None
    A_tilde_fit: float | None = None
    eps: float | None = None
    K: float | None = None
    kappa_eps: float | None = None
    stage_eps: FProfile | None = field(default=None, repr=False)
    psi_eps: ModelFunction | None = field(default=None, repr=False)
    width: float | None = None
    min_G: float | None = None
    kappa_final: float | None = None
    stage_final: FProfile | None = field(default=None, repr=False)
    psi_final: ModelFunction | None = field(default=None, repr=False)
    checks: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)

    def u_bar(self, r) -> tuple[np.ndarray, np.ndarray]:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u = np.empty_like(r)
        du = np.empty_like(r)
        left = r <= self.r_bar
        w, dw, _, _ = self.core.derivatives(r[left])
        u[left], du[left] = w, dw
        w2, dw2, _ = self.tail.derivatives(r[~left])
        u[~left], du[~left] = w2, dw2
        return u, du

    def u_eps(self, r):
        return self.stage_eps.u(r)

    def u_final(self, r):
        return self.stage_final.u(r)

    @property
    def latest(self) -> tuple[ModelFunction, Callable]:
        """Most refined ``(psi, u)`` pair available."""
        if self.stage_final is not None:
            return self.psi_final, self.u_final
        if self.stage_eps is not None:
            return self.psi_eps, self.u_eps
        return self.psi_bar, self.u_bar

    def meta(self) -> dict:
        A, B, C = self.F_coeffs if self.F_coeffs else (None, None, None)
        return {"n": self.n, "alpha": self.alpha, "q": self.q, "r_tilde": self.r_tilde,
                "r_bar": self.r_bar, "kappa": self.kappa, "c": self.c, "u0": self.u0,
                "A": A, "B": B, "C": C, "A_tilde": self.A_tilde, "eps": self.eps,
                "width": self.width, "K": self.K, "kappa_eps": self.kappa_eps,
                "kappa_final": self.kappa_final,
                "checks": {k: float(v) for k, v in self.checks.items()},
                "passed": {k: bool(v) for k, v in self.passed.items()}}


def _check_glue_range(n: int, alpha: float, q: float) -> None:
    if not q > _tilde_exponent(n, alpha):
        raise ValueError("gluing needs q above (alpha(n-1)+1)/(alpha(n-1)-1)")
    if not q <= float(critical_exponents(n, alpha).two_star_alpha) - 1:
        raise ValueError("gluing needs q <= 2*_alpha - 1")


def _separation(core: _CoreSolution, tail_at, r0: float, points: int = 2001
                ) -> tuple[float, float]:
    """``min (w2 - w1)`` over ``(max(r0, 0), 1)`` and where it is attained."""
    if r0 >= 1.0:
        return math.inf, 1.0
    lo = SERIES_START if r0 < 0 else r0 + (1.0 - r0) * 1e-9
    grid = np.linspace(lo, 1.0, points)
    tail = tail_at(r0)
    diff = lambda r: tail(r) - core.derivatives(r)[0]  # noqa: E731
    vals = diff(grid)
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    res = optimize.minimize_scalar(lambda r: float(diff(r)[0]), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-13})
    if res.fun < vals[k]:
        return float(res.fun), float(res.x)
    return float(vals[k]), float(grid[k])


def glue(n: int, alpha: float, q: float, *, bracket: tuple[float, float] = (-50.0, 1.0),
         tol: float = 1e-10) -> GluedProfile:
    """Touch the hyperbolic ball solution from above with a power-decay solution."""
    _check_glue_range(n, alpha, q)
    core = _CoreSolution(hyperbolic_ball(n, q), n, q)
    tail_at = lambda r0: w2_tail(n, alpha, q, r0)  # noqa: E731
    lo, hi = bracket
    s_lo, _ = _separation(core, tail_at, lo)
    s_hi, _ = _separation(core, tail_at, hi)
    if not (s_lo < 0 < s_hi):
        raise RuntimeError(f"separation does not change sign on {bracket}: S = {s_lo:.3g}, {s_hi:.3g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _separation(core, tail_at, mid)[0] < 0:
            lo = mid
        else:
            hi = mid
    r_tilde = hi
    tail = tail_at(r_tilde)
    _, r_min = _separation(core, tail_at, r_tilde)
    slope_gap = lambda r: float(tail.derivatives(r)[1] - core.derivatives(r)[1][0])  # noqa: E731
    h = 1e-3
    a, b = max(r_min - h, max(r_tilde, 0) + 1e-12), min(r_min + h, 1.0 - 1e-12)
    r_bar = float(optimize.brentq(slope_gap, a, b, xtol=1e-15)) \
        if slope_gap(a) * slope_gap(b) < 0 else r_min
    if not (r_bar > max(r_tilde, 0.0)):
        raise RuntimeError("contact point does not lie to the right of the shift")
    w1, dw1, ddw1, _ = (float(v[0]) for v in core.derivatives(r_bar))
    w2, dw2, ddw2 = (float(v) for v in tail.derivatives(r_bar))
    tangency = {"value_gap": abs(w1 - w2) / w1, "slope_gap": abs(dw1 - dw2) / abs(dw1),
                "second_jump": ddw2 - ddw1}
    psi_bar = make_profile("piecewise_sinh_power",
                           {"r_bar": r_bar, "r_tilde": r_tilde, "alpha": alpha})
    return GluedProfile(n, alpha, q, r_tilde, r_bar, float(psi_bar.kappa), tail.c, core.a,
                        psi_bar, core, tail, tangency)


def tail_curvature(n: int, alpha: float, q: float) -> float:
    """Second derivative of ``F = w2^(1-q)``: ``(q-1)^2 / (alpha(n-1)(q-1) - (q+1))``."""
    return (q - 1) ** 2 / (alpha * (n - 1) * (q - 1) - (q + 1))


def _quadratic_fit_curvature(core: _CoreSolution, r0: float, span: float = 1e-3,
                             points: int = 7) -> float:
    x = np.linspace(-span / 2, span / 2, points)
    F = core.F(r0 + x)[0]
    return float(2 * np.polyfit(x, F, 2)[0])


def _convexity_grid(stage: FProfile) -> np.ndarray:
    dense = np.linspace(max(stage.r_left - 0.05, 1e-3), stage.r_tail + 0.05, 4001)
    return np.unique(np.concatenate((np.geomspace(1e-3, R_CHECK, 4001), dense)))


def smooth_c1(glued: GluedProfile, eps: float | None = None, max_halvings: int = 20
              ) -> GluedProfile:
    """Spread the jump of ``F''`` at the contact point linearly over ``eps``."""
    n, q, alpha, r_bar = glued.n, glued.q, glued.alpha, glued.r_bar
    core = glued.core
    A = tail_curvature(n, alpha, q)
    F, F1, F2, _ = (float(v[0]) for v in core.F(np.array([r_bar])))
    B, C, A_tilde = F1, F, F2
    if A_tilde < A - 1e-9 * abs(A):
        raise RuntimeError("second-derivative jump at the contact point has the wrong sign")
    eps = 0.1 * (1.0 - r_bar) if eps is None else float(eps)
    for _ in range(max_halvings + 1):
        stage = FProfile(core, n, q, alpha, r_bar, A, A_tilde, B, C, eps)
        grid = _convexity_grid(stage)
        K = float(np.min((grid ** 2 + 1) * stage.curvature_ratio(grid)))
        if K > 0:
            break
        eps /= 2.0
    else:
        raise RuntimeError("no eps in the halving sequence gives a convex profile")
    return replace(glued, F_coeffs=(A, B, C), A_tilde=A_tilde,
                   A_tilde_fit=_quadratic_fit_curvature(core, r_bar), eps=eps, K=K,
                   kappa_eps=stage.kappa, stage_eps=stage, psi_eps=stage.model("c1"))


def smooth_cinf(glued: GluedProfile, width: float | None = None, max_halvings: int = 20,
                verify: bool = True) -> GluedProfile:
    """Blend both third-derivative jumps (left one first) and verify the result.

    ``width`` is the half-width of each blending window and must stay below
    ``eps/4`` so the windows are disjoint.
    """
    if glued.stage_eps is None:
        raise ValueError("smooth_c1 must run first")
    st = glued.stage_eps
    eps = st.eps
    width = eps / 8 if width is None else float(width)
    if not 0 < width < eps / 4:
        raise ValueError("width must lie in (0, eps/4)")
    slope = -(st.A_tilde - st.A) / eps
    core_third = lambda t: st.core.F(t)[3]  # noqa: E731
    const = lambda v: (lambda t: np.full_like(np.asarray(t, dtype=float), v))  # noqa: E731
    for _ in range(max_halvings + 1):
        w1 = _Window.build(st.r_bar, width, core_third, const(slope))
        w2 = _Window.build(st.r_bar + eps, width, const(slope), const(0.0))
        stage = FProfile(st.core, glued.n, glued.q, glued.alpha, st.r_bar, st.A, st.A_tilde,
                         st.B, st.C, eps, (w1, w2))
        grid = _convexity_grid(stage)
        G = curvature_from_F(*stage.F(grid[grid > stage.r_left]), glued.n, glued.q)
        if np.min(G) > 0:
            break
        width /= 2.0
    else:
        raise RuntimeError("curvature positivity unobtainable at the smallest width")
    out = replace(glued, width=width, min_G=float(np.min(G)), kappa_final=stage.kappa,
                  stage_final=stage, psi_final=stage.model("cinf"))
    if verify:
        checks, passed = verify_final(out)
        out = replace(out, checks=checks, passed=passed)
    return out


def verify_final(glued: GluedProfile, r_end: float = R_CHECK) -> tuple[dict, dict]:
    """Independent checks of the final pair ``(psi, u)``.

    The solution is re-computed by shooting from ``u(0)`` on the final
    profile, so the residual, the decay exponents and the Pohozaev trace
    come from the integrator rather than from the construction.
    """
    psi, n, q, alpha = glued.psi_final, glued.n, glued.q, glued.alpha
    traj = integrate_cauchy(CauchyProblem(psi, n, q, glued.u0), r_end, rtol=1e-11)
    c: dict[str, float] = {}
    c["stays_positive"] = float(traj.event.kind == "reached_r_max")
    c["ode_residual"] = residual(traj)
    sample = np.geomspace(1e-3, r_end, 2000)
    u_traj, _ = traj.sample(sample)
    u_built, du_built = glued.u_final(sample)
    c["match_construction"] = float(np.max(np.abs(u_traj - u_built) / u_built))
    # finite-difference residual of the constructed solution with psi'/psi from log psi
    rs = np.concatenate((np.linspace(1e-2, 3.0, 3000), np.geomspace(3.0, 1e3, 2000)))
    hstep = 1e-3 * rs
    weights = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
    hfd = sum(wk * np.log(psi.psi(rs + k * hstep)) for k, wk in weights.items()) / (12 * hstep)
    ufd2 = sum(wk * glued.u_final(rs + k * hstep)[1] for k, wk in weights.items()) / (12 * hstep)
    u_rs, du_rs = glued.u_final(rs)
    c["fd_residual"] = float(np.max(np.abs(ufd2 + (n - 1) * hfd * du_rs + u_rs ** q)
                                    / np.maximum(1.0, u_rs ** q)))
    # convexity from second differences on a uniform grid and a log grid
    lin = np.linspace(0.0, 20.0, 20001)
    p = psi.psi(lin)
    d2 = p[2:] - 2 * p[1:-1] + p[:-2]
    lg = np.geomspace(1.0, r_end, 4001)
    pl = psi.psi(lg)
    slopes = np.diff(pl) / np.diff(lg)
    c["convexity_margin"] = float(min(np.min(d2 / p[1:-1]),
                                      np.min(np.diff(slopes) / slopes[1:])))
    tail = np.geomspace(r_end / 10, r_end, 400)
    c["tail_alpha"] = float(np.polyfit(np.log(tail), np.log(psi.psi(tail)), 1)[0])
    fit = decay_fit(traj)
    c["decay_exponent"] = fit.exponent_u
    _, du_t = traj.sample(tail)
    integrand = du_t ** 2 * psi.psi(tail) ** (n - 1)
    c["energy_exponent"] = float(np.polyfit(np.log(tail), np.log(integrand), 1)[0])
    c["hp4_margin"] = check_hp4(psi, n, q, r_max=100.0).margin
    trace = pohozaev(traj, subdivisions=8)
    c["pohozaev_end_ratio"] = float(abs(trace.P[-1]) / np.max(np.abs(trace.P)))
    target = -2.0 / (q - 1)
    passed = {
        "stays_positive": c["stays_positive"] == 1.0,
        "ode_residual": c["ode_residual"] < 1e-5,
        "fd_residual": c["fd_residual"] < 1e-5,
        "convexity": c["convexity_margin"] >= -1e-8,
        "tail_alpha": abs(c["tail_alpha"] - alpha) < 0.02 * alpha,
        "decay_exponent": abs(c["decay_exponent"] - target) < 0.05 * abs(target),
        "energy_exponent": c["energy_exponent"] < -1.05,
        "hp4_fails": c["hp4_margin"] < 0,
        "pohozaev_to_zero": c["pohozaev_end_ratio"] < 1e-2,
    }
    return c, passed
