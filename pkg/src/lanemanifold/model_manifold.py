"""Model functions, critical exponents and structural conditions.

A model manifold is ``R^n`` with the metric ``dr^2 + psi(r)^2 dtheta^2``.
Everything the radial problems need from the geometry is carried by the
profile ``psi`` together with its first two derivatives; the
:class:`ModelFunction` container bundles these with the asymptotic data
``psi(r) ~ kappa * r**alpha`` used by tail corrections.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Mapping, NamedTuple

import numpy as np
from scipy import integrate, interpolate, optimize

from . import _quadrature as quad

FAMILIES = (
    "euclidean",
    "hyperbolic",
    "shifted_power",
    "arctan_family",
    "f_family",
    "piecewise_sinh_power",
    "comparison",
    "tabulated",
    "flat_core_power",
)

ArrayLike = float | np.ndarray
Fn = Callable[[np.ndarray], np.ndarray]


def _out(r_in, value):
    """Return a Python float for scalar input, an array otherwise."""
    if np.ndim(r_in) == 0:
        return float(value)
    return value


@dataclass(frozen=True, eq=False)
class ModelFunction:
    """Radial profile ``psi`` with derivatives and asymptotic parameters.

    ``logderiv`` (``psi'/psi``) and ``curvature_ratio`` (``psi''/psi``) may be
    given separately when they can be evaluated more accurately than the
    quotient of the stored derivatives, which matters near the pole and far
    out in the tail.
    """

    family: str
    params: Mapping[str, object]
    psi_fn: Fn
    dpsi_fn: Fn
    ddpsi_fn: Fn
    logderiv_fn: Fn | None = None
    curvature_fn: Fn | None = None
    alpha: float | None = None
    kappa: float | None = None
    breakpoints: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    def psi(self, r: ArrayLike) -> ArrayLike:
        return _out(r, self.psi_fn(np.asarray(r, dtype=float)))

    def dpsi(self, r: ArrayLike) -> ArrayLike:
        return _out(r, self.dpsi_fn(np.asarray(r, dtype=float)))

    def ddpsi(self, r: ArrayLike) -> ArrayLike:
        return _out(r, self.ddpsi_fn(np.asarray(r, dtype=float)))

    def __call__(self, r: ArrayLike):
        """``(psi, psi', psi'')`` at ``r``."""
        return self.psi(r), self.dpsi(r), self.ddpsi(r)

    def logderiv(self, r: ArrayLike) -> ArrayLike:
        """``psi'(r)/psi(r)`` for ``r > 0``."""
        x = np.asarray(r, dtype=float)
        if self.logderiv_fn is not None:
            return _out(r, self.logderiv_fn(x))
        return _out(r, self.dpsi_fn(x) / self.psi_fn(x))

    def curvature_ratio(self, r: ArrayLike) -> ArrayLike:
        """``psi''(r)/psi(r)`` for ``r > 0``."""
        x = np.asarray(r, dtype=float)
        if self.curvature_fn is not None:
            return _out(r, self.curvature_fn(x))
        return _out(r, self.ddpsi_fn(x) / self.psi_fn(x))

    def weight(self, r: ArrayLike, n: int) -> ArrayLike:
        """Volume density ``psi(r)**(n-1)``."""
        return self.psi(r) ** (n - 1)


# ---------------------------------------------------------------------------
# closed-form families
# ---------------------------------------------------------------------------

def _euclidean() -> ModelFunction:
    return ModelFunction(
        "euclidean", {},
        psi_fn=lambda r: r * 1.0,
        dpsi_fn=lambda r: np.ones_like(r),
        ddpsi_fn=lambda r: np.zeros_like(r),
        logderiv_fn=lambda r: 1.0 / r,
        curvature_fn=lambda r: np.zeros_like(r),
        alpha=1.0, kappa=1.0,
    )


def _hyperbolic() -> ModelFunction:
    return ModelFunction(
        "hyperbolic", {},
        psi_fn=np.sinh,
        dpsi_fn=np.cosh,
        ddpsi_fn=np.sinh,
        logderiv_fn=lambda r: 1.0 / np.tanh(r),
        curvature_fn=lambda r: np.ones_like(r),
    )


def _shifted_power(alpha: float) -> ModelFunction:
    if not alpha > 1:
        raise ValueError("shifted_power needs alpha > 1")

    def psi(r):
        return np.expm1(alpha * np.log1p(r)) / alpha

    def dpsi(r):
        return (1.0 + r) ** (alpha - 1.0)

    def ddpsi(r):
        return (alpha - 1.0) * (1.0 + r) ** (alpha - 2.0)

    def logderiv(r):
        return alpha * (1.0 + r) ** (alpha - 1.0) / np.expm1(alpha * np.log1p(r))

    def curvature(r):
        return alpha * (alpha - 1.0) * (1.0 + r) ** (alpha - 2.0) / np.expm1(alpha * np.log1p(r))

    return ModelFunction(
        "shifted_power", {"alpha": alpha}, psi, dpsi, ddpsi, logderiv, curvature,
        alpha=alpha, kappa=1.0 / alpha,
    )


def _piecewise_sinh_power(r_bar: float, r_tilde: float, alpha: float) -> ModelFunction:
    """``sinh`` up to ``r_bar``, then ``kappa (r - r_tilde)**alpha``; only Lipschitz."""
    if not (r_bar > 0 and r_bar > r_tilde and alpha > 1):
        raise ValueError("need r_bar > max(r_tilde, 0) and alpha > 1")
    kappa = math.sinh(r_bar) / (r_bar - r_tilde) ** alpha

    def pick(r, inner, outer):
        x = np.asarray(r, dtype=float)
        left = x <= r_bar
        out = np.empty_like(x)
        out[left] = inner(x[left])
        out[~left] = outer(x[~left] - r_tilde)
        return out

    return ModelFunction(
        "piecewise_sinh_power",
        {"r_bar": r_bar, "r_tilde": r_tilde, "alpha": alpha, "kappa": kappa},
        psi_fn=lambda r: pick(r, np.sinh, lambda s: kappa * s ** alpha),
        dpsi_fn=lambda r: pick(r, np.cosh, lambda s: kappa * alpha * s ** (alpha - 1)),
        ddpsi_fn=lambda r: pick(r, np.sinh, lambda s: kappa * alpha * (alpha - 1) * s ** (alpha - 2)),
        logderiv_fn=lambda r: pick(r, lambda s: 1.0 / np.tanh(s), lambda s: alpha / s),
        curvature_fn=lambda r: pick(r, np.ones_like, lambda s: alpha * (alpha - 1) / s ** 2),
        alpha=alpha, kappa=kappa, breakpoints=(r_bar,),
    )


def _flat_core_power(r0: float, alpha: float) -> ModelFunction:
    """Convex C^1 profile equal to ``r`` on ``[0, r0]`` and ``r**alpha`` past ``2 r0``.

    Between the two regimes the tangent lines at ``r0`` and ``2 r0`` are
    joined by a parabola centred on their intersection point.
    """
    if not (r0 > 0 and alpha > 1):
        raise ValueError("need r0 > 0 and alpha > 1")
    r2 = 2.0 * r0
    v2, s2 = r2 ** alpha, alpha * r2 ** (alpha - 1)
    if s2 <= 1.0:
        raise ValueError("power tail must be steeper than the flat core at 2*r0")
    t_star = (alpha - 1.0) * v2 / (s2 - 1.0)
    if not (r0 < t_star < r2):
        raise ValueError("no convex C^1 junction for these parameters")
    d = min(t_star - r0, r2 - t_star)
    lo, hi = t_star - d, t_star + d
    curv = (s2 - 1.0) / (2.0 * d)

    def parts(r):
        x = np.asarray(r, dtype=float)
        psi, dpsi, ddpsi = np.empty_like(x), np.empty_like(x), np.zeros_like(x)
        m1 = x <= lo
        m2 = (x > lo) & (x < hi)
        m3 = (x >= hi) & (x < r2)
        m4 = x >= r2
        psi[m1], dpsi[m1] = x[m1], 1.0
        y = x[m2] - lo
        psi[m2] = x[m2] + curv * y ** 2 / 2.0
        dpsi[m2] = 1.0 + curv * y
        ddpsi[m2] = curv
        psi[m3] = v2 + s2 * (x[m3] - r2)
        dpsi[m3] = s2
        psi[m4] = x[m4] ** alpha
        dpsi[m4] = alpha * x[m4] ** (alpha - 1)
        ddpsi[m4] = alpha * (alpha - 1) * x[m4] ** (alpha - 2)
        return psi, dpsi, ddpsi

    return ModelFunction(
        "flat_core_power", {"r0": r0, "alpha": alpha},
        psi_fn=lambda r: parts(r)[0],
        dpsi_fn=lambda r: parts(r)[1],
        ddpsi_fn=lambda r: parts(r)[2],
        alpha=alpha, kappa=1.0, breakpoints=(lo, hi, r2),
    )


# ---------------------------------------------------------------------------
# families defined through an exponent integral
# ---------------------------------------------------------------------------

def _arctan_gap(s):
    """``s - arctan(s)`` without cancellation for small ``s``."""
    s = np.asarray(s, dtype=float)
    out = s - np.arctan(s)
    small = np.abs(s) < 1e-2
    if np.any(small):
        t = s[small]
        t2 = t * t
        out[small] = t * t2 * (1 / 3 - t2 * (1 / 5 - t2 * (1 / 7 - t2 / 9)))
    return out


def _tanh_gap(s):
    """``s - tanh(s)`` without cancellation for small ``s``."""
    s = np.asarray(s, dtype=float)
    out = s - np.tanh(s)
    small = np.abs(s) < 1e-2
    if np.any(small):
        t = s[small]
        t2 = t * t
        out[small] = t * t2 * (1 / 3 - t2 * (2 / 15 - t2 * 17 / 315))
    return out


def _sech2(s):
    e = np.exp(-2.0 * np.abs(np.asarray(s, dtype=float)))
    return 4.0 * e / (1.0 + e) ** 2


NAMED_F = {
    "arctan": (np.arctan, lambda s: 1.0 / (1.0 + s * s), _arctan_gap),
    "tanh": (np.tanh, _sech2, _tanh_gap),
}


class _ExponentCache:
    """Tabulated ``E(r) = int_0^r H`` with cubic Hermite interpolation.

    Panel integrals use 16-point Gauss-Legendre rules, checked against the
    8-point rule.  ``H`` is known in closed form, so it doubles as the exact
    derivative at the nodes.  Past the tabulated range the integral is
    continued with adaptive quadrature from the last node.
    """

    def __init__(self, h: Fn, r_cache: float = 1e5, nodes_per_decade: int = 400):
        core = np.linspace(0.0, 1e-3, 11)
        decades = math.log10(r_cache / 1e-3)
        outer = np.geomspace(1e-3, r_cache, int(decades * nodes_per_decade) + 1)[1:]
        nodes = np.concatenate((core, outer))
        fine = quad.panel_integrals(h, nodes, order=16)
        coarse = quad.panel_integrals(h, nodes, order=8)
        if not np.all(np.isfinite(fine)) or np.max(np.abs(fine - coarse)) > 1e-12:
            raise RuntimeError("exponent integral did not converge on the cache grid")
        values = np.concatenate(([0.0], np.cumsum(fine)))
        self._h = h
        self._end = nodes[-1]
        self._end_value = values[-1]
        self._spline = interpolate.CubicHermiteSpline(nodes, values, h(nodes))

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.asarray(self._spline(np.minimum(r, self._end)), dtype=float)
        far = r > self._end
        if np.any(far):
            extra = [integrate.quad(self._h, self._end, x, limit=200)[0] for x in r[far]]
            out = np.array(out, copy=True)
            out[far] = self._end_value + np.asarray(extra)
        return out


def _f_family(alpha: float, f: Fn | str, df: Fn | None = None, gap: Fn | None = None,
              *, family: str = "f_family", r_cache: float = 1e5) -> ModelFunction:
    """Profile with ``(psi/psi')' = 1/alpha + (alpha-1)/alpha * f'``.

    Writing ``psi = r * exp((alpha-1) * E(r))`` the exponent integrand is
    ``H = (r - f)/(r (r + (alpha-1) f))``.
    """
    if not alpha > 1:
        raise ValueError(f"{family} needs alpha > 1")
    name = None
    if isinstance(f, str):
        if f not in NAMED_F:
            raise ValueError(f"unknown named f {f!r}; choose from {sorted(NAMED_F)}")
        name = f
        f, df, gap = NAMED_F[f]
    if df is None:
        raise ValueError("f_family needs the derivative df of f")
    if gap is None:
        gap = lambda s, f=f: s - f(s)  # noqa: E731
    _check_f(f, df)
    am1 = alpha - 1.0

    def h(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        sp = s[pos]
        out[pos] = gap(sp) / (sp * (sp + am1 * f(sp)))
        return out if out.ndim else float(out)

    cache = _ExponentCache(h, r_cache=r_cache)

    def psi(r):
        return r * np.exp(am1 * cache(r))

    def logderiv(r):
        return 1.0 / r + am1 * h(r)

    def curvature(r):
        ld = logderiv(r)
        return ld * ld * am1 / alpha * (1.0 - df(r))

    def dpsi(r):
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        pos = r > 0
        out[pos] = psi(r[pos]) * logderiv(r[pos])
        return out

    def ddpsi(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = psi(r[pos]) * curvature(r[pos])
        return out

    params: dict[str, object] = {"alpha": alpha}
    if name is not None:
        params["f"] = name
    kappa = float(np.exp(am1 * _tail_constant(h, cache, alpha)))
    return ModelFunction(family, params, psi, dpsi, ddpsi, logderiv, curvature,
                         alpha=alpha, kappa=kappa)


def _tail_constant(h: Fn, cache: _ExponentCache, alpha: float) -> float:
    """Limit of ``E(r) - log(r)`` so that ``psi ~ kappa r**alpha``."""
    r = np.array([1e4, 2e4, 4e4])
    vals = cache(r) - np.log(r)
    # corrections are O(1/r); Richardson on the last two points
    return float(2 * vals[2] - vals[1])


def _check_f(f: Fn, df: Fn) -> None:
    grid = np.geomspace(1e-6, 1e6, 400)
    d0 = float(np.ravel(df(np.array([0.0])))[0])
    if abs(d0 - 1.0) > 1e-12:
        raise ValueError("f must satisfy f'(0) = 1")
    d = df(grid)
    if np.any(d < -1e-14) or np.any(d > 1 + 1e-14):
        raise ValueError("f must satisfy 0 <= f' <= 1")
    if not abs(f(np.array([1e6]))[0]) / 1e6 < 1e-2:
        raise ValueError("f must be o(r) at infinity")


# ---------------------------------------------------------------------------
# comparison profile (psi'' = G psi with a piecewise linear G)
# ---------------------------------------------------------------------------

class TailFit(NamedTuple):
    exponent: float
    a1: float
    a2: float
    residual: float


def _tail_basis_fit(r: np.ndarray, y: np.ndarray, m: float) -> tuple[float, float, float]:
    basis = np.column_stack((r ** m, r ** (1.0 - m)))
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    rel = (basis @ coef - y) / y
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(rel ** 2)))


def fit_power_tail(r: np.ndarray, y: np.ndarray, exponent: float | None = None) -> TailFit:
    """Fit ``y = a1 r**m + a2 r**(1-m)``.

    With ``exponent`` given only the two amplitudes are fitted.  Otherwise
    ``m`` is found by minimising the relative residual with the amplitudes
    eliminated by linear least squares.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    if exponent is None:
        slope = np.polyfit(np.log(r), np.log(y), 1)[0]
        res = optimize.minimize_scalar(
            lambda m: _tail_basis_fit(r, y, m)[2],
            bracket=(slope - 0.05, slope + 0.05),
            tol=1e-14,
        )
        exponent = float(res.x)
    a1, a2, resid = _tail_basis_fit(r, y, exponent)
    return TailFit(exponent, a1, a2, resid)


def comparison_profile(Q: float, r_o: float, K: float, *, rtol: float = 1e-13,
                       fit_span: float = 20.0, fit_tol: float = 1e-6) -> ModelFunction:
    """Solve ``psi'' = G psi`` with ``G = K`` near the pole and ``Q/r^2`` far out.

    On ``(r_o, 2 r_o)`` ``G`` interpolates linearly between ``K`` and
    ``Q/(2 r_o)^2``.  The first piece is ``sinh(sqrt(K) r)/sqrt(K)``, the middle
    piece is integrated numerically and beyond ``2 r_o`` the equation is of
    Euler type with solutions ``r**m_plus`` and ``r**m_minus``.  The tail is
    validated by fitting the closed form to an independent integration.
    """
    if not (Q > 0 and r_o > 0):
        raise ValueError("need Q > 0 and r_o > 0")
    if K < Q / r_o ** 2 * (1 - 1e-12):
        raise ValueError("need K >= Q / r_o**2")
    sk = math.sqrt(K)
    root = math.sqrt(1.0 + 4.0 * Q)
    m_plus, m_minus = 0.5 * (1.0 + root), 0.5 * (1.0 - root)
    r2 = 2.0 * r_o

    def g(r):
        r = np.asarray(r, dtype=float)
        return np.where(
            r <= r_o, K,
            np.where(r < r2, Q / (4 * r_o ** 3) * (r - r_o) + K / r_o * (r2 - r), Q / np.maximum(r, r2) ** 2),
        )

    def rhs(r, y):
        gr = Q / (4 * r_o ** 3) * (r - r_o) + K / r_o * (r2 - r) if r < r2 else Q / r ** 2
        return [y[1], gr * y[0]]

    y0 = [math.sinh(sk * r_o) / sk, math.cosh(sk * r_o)]
    mid = integrate.solve_ivp(rhs, (r_o, r2), y0, method="DOP853", rtol=rtol,
                              atol=1e-14 * y0[0], dense_output=True)
    if not mid.success:
        raise RuntimeError(f"comparison ODE failed: {mid.message}")
    p2, dp2 = mid.y[0, -1], mid.y[1, -1]
    mat = np.array([[r2 ** m_plus, r2 ** m_minus],
                    [m_plus * r2 ** (m_plus - 1), m_minus * r2 ** (m_minus - 1)]])
    a1, a2 = np.linalg.solve(mat, [p2, dp2])

    # independent integration of the tail, used to validate the closed form
    tail = integrate.solve_ivp(rhs, (r2, fit_span * r2), [p2, dp2], method="DOP853",
                               rtol=rtol, atol=1e-14 * p2, dense_output=True)
    rs = np.geomspace(r2, fit_span * r2, 400)
    fit = fit_power_tail(rs, tail.sol(rs)[0], exponent=m_plus)
    if fit.residual > fit_tol:
        raise RuntimeError(f"tail fit residual {fit.residual:.3e} exceeds {fit_tol:.1e}")

    def parts(r):
        x = np.asarray(r, dtype=float)
        p = np.empty_like(x)
        dp = np.empty_like(x)
        near = x <= r_o
        far = x >= r2
        midm = ~(near | far)
        p[near] = np.sinh(sk * x[near]) / sk
        dp[near] = np.cosh(sk * x[near])
        if np.any(midm):
            vals = mid.sol(x[midm])
            p[midm], dp[midm] = vals[0], vals[1]
        xf = x[far]
        p[far] = a1 * xf ** m_plus + a2 * xf ** m_minus
        dp[far] = a1 * m_plus * xf ** (m_plus - 1) + a2 * m_minus * xf ** (m_minus - 1)
        return p, dp

    def logderiv(r):
        x = np.asarray(r, dtype=float)
        p, dp = parts(x)
        out = np.array(dp / p, dtype=float)
        near = x <= r_o
        out[near] = sk / np.tanh(sk * x[near])
        return out

    return ModelFunction(
        "comparison",
        {"Q": Q, "r_o": r_o, "K": K, "a1": float(a1), "a2": float(a2), "fit_residual": fit.residual},
        psi_fn=lambda r: parts(r)[0],
        dpsi_fn=lambda r: parts(r)[1],
        ddpsi_fn=lambda r: g(r) * parts(r)[0],
        logderiv_fn=logderiv,
        curvature_fn=g,
        alpha=m_plus, kappa=float(a1), breakpoints=(r_o, r2),
    )


# ---------------------------------------------------------------------------
# tabulated profiles
# ---------------------------------------------------------------------------

def estimate_power_tail(r: np.ndarray, psi: np.ndarray) -> tuple[float, float]:
    """Log-log regression of ``psi`` over the last decade of the grid."""
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    mask = (r >= r[-1] / 10.0) & (r > 0)
    if mask.sum() < 3:
        raise ValueError("grid too short to estimate the tail exponent")
    slope, icpt = np.polyfit(np.log(r[mask]), np.log(psi[mask]), 1)
    return float(slope), float(np.exp(icpt))


def tabulated_profile(r, psi, dpsi, ddpsi, *, alpha: float | None = None,
                      kappa: float | None = None) -> ModelFunction:
    """Profile interpolated from samples (cubic Hermite in ``psi`` and ``psi'``).

    Beyond the last node the profile continues as ``kappa r**alpha``; when
    ``alpha`` is not supplied it is estimated from the last decade.
    """
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    dpsi = np.asarray(dpsi, dtype=float)
    ddpsi = np.asarray(ddpsi, dtype=float)
    if r.ndim != 1 or r.size < 4 or np.any(np.diff(r) <= 0):
        raise ValueError("tabulated grid must be strictly increasing with >= 4 nodes")
    if r[0] > 0:
        r = np.concatenate(([0.0], r))
        psi = np.concatenate(([0.0], psi))
        dpsi = np.concatenate(([1.0], dpsi))
        ddpsi = np.concatenate(([0.0], ddpsi))
    if alpha is None:
        alpha, kappa_fit = estimate_power_tail(r, psi)
    if kappa is None:
        kappa = float(psi[-1] / r[-1] ** alpha)
    s_psi = interpolate.CubicHermiteSpline(r, psi, dpsi)
    s_dpsi = interpolate.CubicHermiteSpline(r, dpsi, ddpsi)
    s_dd = interpolate.PchipInterpolator(r, ddpsi)
    end = r[-1]

    def ext(x, inside, outside):
        x = np.asarray(x, dtype=float)
        return np.where(x <= end, inside(np.minimum(x, end)), outside(np.maximum(x, end)))

    a, k = float(alpha), float(kappa)
    # continue psi with the power law matched in value at the last node
    scale = psi[-1] / (k * end ** a)
    psi_fn = lambda x: ext(x, s_psi, lambda y: scale * k * y ** a)  # noqa: E731
    dpsi_fn = lambda x: ext(x, s_dpsi, lambda y: scale * k * a * y ** (a - 1))  # noqa: E731
    dd_fn = lambda x: ext(x, s_dd, lambda y: scale * k * a * (a - 1) * y ** (a - 2))  # noqa: E731

    def logderiv(x):
        x = np.asarray(x, dtype=float)
        p = psi_fn(x)
        tiny = x < 1e-8
        return np.where(tiny, 1.0 / np.maximum(x, 1e-300), dpsi_fn(x) / np.where(tiny, 1.0, p))

    return ModelFunction("tabulated", {"nodes": int(r.size)}, psi_fn, dpsi_fn, dd_fn,
                         logderiv, None, alpha=a, kappa=k)


def pure_power_weight(alpha: float, kappa: float = 1.0) -> ModelFunction:
    """The weight ``kappa r**alpha`` dressed as a profile.

    It is not a model function (its slope at the pole is not one); it only
    serves as the reference weight in quotient comparisons.
    """
    return ModelFunction(
        "tabulated", {"pure_power": True, "alpha": alpha, "kappa": kappa},
        psi_fn=lambda r: kappa * r ** alpha,
        dpsi_fn=lambda r: kappa * alpha * r ** (alpha - 1),
        ddpsi_fn=lambda r: kappa * alpha * (alpha - 1) * r ** (alpha - 2),
        logderiv_fn=lambda r: alpha / r,
        curvature_fn=lambda r: alpha * (alpha - 1) / r ** 2,
        alpha=alpha, kappa=kappa,
    )


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------

def validate_profile(psi: ModelFunction, r_max: float = 1e4, tol: float = 1e-6,
                     alpha_tol: float = 0.05) -> None:
    """Check the model-function invariants on a log grid; raise on failure."""
    h = 1e-4
    # profiles with psi''(0) != 0 (e.g. shifted_power) only satisfy the pole
    # condition to first order; they get the matching O(h) allowance
    allowance = tol + 0.51 * abs(psi.ddpsi(0.0)) * h
    if abs(psi.psi(h) / h - 1.0) >= allowance:
        raise ValueError(f"psi(h)/h - 1 = {psi.psi(h) / h - 1.0:.3e} violates the pole condition")
    grid = np.geomspace(1e-6, r_max, 2000)
    with np.errstate(over="ignore"):
        vals = psi.psi(grid)
    # exponential profiles may overflow far out; that still counts as positive
    if np.any(np.isnan(vals)) or np.any(vals <= 0):
        raise ValueError("psi must be positive on (0, r_max]")
    if psi.alpha is not None:
        tail = np.geomspace(r_max / 10.0, r_max, 50)
        ratio = tail * psi.logderiv(tail)
        if abs(ratio[-1] - psi.alpha) > alpha_tol * psi.alpha:
            raise ValueError(f"r psi'/psi = {ratio[-1]:.4f} is far from alpha = {psi.alpha}")


def make_profile(family: str, params: Mapping[str, object] | None = None,
                 validation: Mapping[str, float] | None = None) -> ModelFunction:
    """Build a profile of the named family and validate it."""
    p = dict(params or {})
    if family == "euclidean":
        prof = _euclidean()
    elif family == "hyperbolic":
        prof = _hyperbolic()
    elif family == "shifted_power":
        prof = _shifted_power(float(p["alpha"]))
    elif family == "arctan_family":
        prof = _f_family(float(p["alpha"]), "arctan", family="arctan_family")
    elif family == "f_family":
        prof = _f_family(float(p["alpha"]), p["f"], p.get("df"), p.get("gap"))
    elif family == "piecewise_sinh_power":
        prof = _piecewise_sinh_power(float(p["r_bar"]), float(p["r_tilde"]), float(p["alpha"]))
    elif family == "comparison":
        prof = comparison_profile(float(p["Q"]), float(p["r_o"]), float(p["K"]))
    elif family == "flat_core_power":
        prof = _flat_core_power(float(p["r0"]), float(p["alpha"]))
    elif family == "tabulated":
        prof = tabulated_profile(p["r"], p["psi"], p["dpsi"], p["ddpsi"],
                                 alpha=p.get("alpha"), kappa=p.get("kappa"))
    else:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    v = dict(validation or {})
    validate_profile(prof, r_max=float(v.get("r_max", 1e4)), tol=float(v.get("tol", 1e-6)))
    return prof


# ---------------------------------------------------------------------------
# exponents and regimes
# ---------------------------------------------------------------------------

def _exact(x) -> Fraction:
    if isinstance(x, (Fraction, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x))


class CriticalExponents(NamedTuple):
    two_tilde: Fraction
    two_star_alpha: Fraction
    two_star: Fraction | float   # math.inf when n == 2


def critical_exponents(n: int, alpha) -> CriticalExponents:
    """Exact thresholds ``(2~_alpha, 2*_alpha, 2*)``.

    Inputs given as ints, Fractions or decimal strings are handled exactly;
    floats are converted through their binary value.
    """
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    a = _exact(alpha)
    if a < 1:
        raise ValueError("alpha must be >= 1")
    d = a * (n - 1)
    if d <= 1 + Fraction(1, 10 ** 9):
        raise ValueError("alpha*(n-1) must exceed 1")
    tilde = (d + 1) / (d - 1)
    star = Fraction(2 * n, n - 2) if n > 2 else math.inf
    return CriticalExponents(tilde, 2 * tilde, star)


# rows of the regime table: supersolutions, positive radial solutions,
# uniqueness of radial solutions in balls
REGIME_TABLE = {
    "strongly_subcritical": ("NO", "NO", "unknown"),
    "intermediate": ("YES", "both YES and NO depending psi", "it fails for some psi"),
    "intermediate_critical": ("YES", "both YES and NO depending psi", "unknown"),
    "slightly_subcritical": ("YES", "YES", "unknown"),
    "at_or_above_sobolev_critical": ("not covered", "not covered", "not covered"),
}


@dataclass(frozen=True)
class Regime:
    label: str
    thresholds: tuple[float, float, float]
    exact_thresholds: tuple[Fraction, Fraction, Fraction | float]
    supersolutions: str
    radial_solutions: str
    uniqueness: str

    @property
    def verdict(self) -> str:
        return f"{self.label}: {self.radial_solutions}"


def _matches(q, q_exact: Fraction, t) -> bool:
    if t == math.inf:
        return False
    if q_exact == t:
        return True
    # a float that is the nearest double to the threshold counts as equal
    return isinstance(q, float) and q == float(t)


def classify_regime(n: int, alpha, q) -> Regime:
    """Place ``q`` in the regime partition defined by the critical exponents."""
    qe = _exact(q)
    if qe <= 1:
        raise ValueError("q must exceed 1")
    ce = critical_exponents(n, alpha)
    t1, t2 = ce.two_tilde, ce.two_star_alpha - 1
    t3 = ce.two_star - 1 if ce.two_star != math.inf else math.inf
    if _matches(q, qe, t1) or qe < t1:
        label = "strongly_subcritical"
    elif _matches(q, qe, t2):
        label = "intermediate_critical"
    elif qe < t2:
        label = "intermediate"
    elif t3 == math.inf or (qe < t3 and not _matches(q, qe, t3)):
        label = "slightly_subcritical"
    else:
        label = "at_or_above_sobolev_critical"
    sup, sol, uniq = REGIME_TABLE[label]
    return Regime(label, (float(t1), float(t2), float(t3)), (t1, t2, t3), sup, sol, uniq)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def curvature(psi: ModelFunction, r: ArrayLike, n: int) -> tuple[ArrayLike, ArrayLike]:
    """Radial sectional curvature ``-psi''/psi`` and Ricci ``(n-1)`` times it."""
    x = np.asarray(r, dtype=float)
    if np.any(x <= 0):
        raise ValueError("curvature is only evaluated for r > 0")
    sec = -psi.curvature_ratio(r)
    return sec, (n - 1) * sec


def volume(psi: ModelFunction, n: int, R: float, rtol: float = 1e-10) -> float:
    """``int_0^R psi^(n-1) dr`` by adaptive quadrature."""
    if not R > 0:
        raise ValueError("R must be positive")
    pts = [b for b in psi.breakpoints if 0 < b < R] or None
    val, err = integrate.quad(lambda s: psi.psi(s) ** (n - 1), 0.0, R, epsabs=0.0,
                              epsrel=rtol, limit=500, points=pts)
    if not np.isfinite(val) or err > 100 * rtol * abs(val):
        raise RuntimeError("volume quadrature did not converge")
    return float(val)


def log_grid(r_max: float, points: int = 4096, r_min: float = 1e-4) -> np.ndarray:
    return np.geomspace(r_min, r_max, points)


def volume_over_weight(psi: ModelFunction, n: int, grid: np.ndarray) -> np.ndarray:
    """``int_0^r psi^(n-1) / psi(r)^(n-1)`` on an increasing positive grid.

    The ratio is accumulated panel by panel with the integrand rescaled by the
    panel's right endpoint, so fast-growing profiles do not overflow.
    """
    grid = np.asarray(grid, dtype=float)
    x, w = quad.gauss_legendre(8)
    m = n - 1
    first, _ = integrate.quad(lambda s: (psi.psi(s) / psi.psi(grid[0])) ** m, 0.0, grid[0],
                              epsrel=1e-12)
    h = np.diff(grid)
    nodes = grid[:-1, None] + h[:, None] * x[None, :]
    right = psi.psi(grid[1:])
    panel = ((psi.psi(nodes) / right[:, None]) ** m * w[None, :]).sum(axis=1) * h
    shrink = (psi.psi(grid[:-1]) / right) ** m
    out = np.empty_like(grid)
    out[0] = first
    for k in range(1, grid.size):
        out[k] = out[k - 1] * shrink[k - 1] + panel[k - 1]
    return out


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    holds: bool
    worst_r: float
    margin: float
    grid_points: int


def hp4_lhs(psi: ModelFunction, n: int, grid: np.ndarray) -> np.ndarray:
    """``(n-1) psi'/psi^n * int_0^r psi^(n-1)`` on a positive grid."""
    return (n - 1) * psi.logderiv(grid) * volume_over_weight(psi, n, grid)


def check_hp4(psi: ModelFunction, n: int, q: float, r_max: float = 100.0,
              grid_density: int = 4096, tol: float = 1e-12) -> ConditionReport:
    """Pohozaev-monotonicity condition ``LHS <= 1/2 + 1/(q+1)`` on a log grid.

    The pole is represented by the exact limit ``(n-1)/n`` of the left side.
    """
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    grid = log_grid(r_max, grid_density)
    rhs = 0.5 + 1.0 / (q + 1.0)
    margins = np.concatenate(([rhs - (n - 1) / n], rhs - hp4_lhs(psi, n, grid)))
    radii = np.concatenate(([0.0], grid))
    k = int(np.argmin(margins))
    return ConditionReport("hp4", bool(margins[k] >= -tol), float(radii[k]),
                           float(margins[k]), radii.size)


def check_hp5(psi: ModelFunction, r_max: float = 100.0, grid_density: int = 4096,
              tol: float = 1e-12) -> ConditionReport:
    """``psi psi'' <= (alpha-1)/alpha psi'^2`` with the profile's declared alpha."""
    a = psi.alpha
    if a is None or not a > 1:
        raise ValueError("check_hp5 needs a profile declaring alpha > 1")
    grid = log_grid(r_max, grid_density)
    p, dp, ddp = psi(grid)
    margins = (a - 1.0) / a * dp ** 2 - p * ddp
    k = int(np.argmin(margins))
    return ConditionReport("hp5", bool(margins[k] >= -tol), float(grid[k]),
                           float(margins[k]), grid.size)
