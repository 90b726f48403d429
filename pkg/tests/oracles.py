"""Independent reference computations used by the tests.

Nothing here imports the package: each oracle is a second route to a value
the library computes another way (fixed-step RK4 instead of adaptive DOP853,
closed forms instead of quadrature, scipy.quad instead of panel rules).
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate


def rk4_radial(logderiv: Callable[[float], float], n: int, q: float, a: float, r_end: float,
               h: float = 1e-4, r_start: float = 1e-6, stop_at_zero: bool = True):
    """Fixed-step RK4 for ``u'' + (n-1) (psi'/psi) u' + |u|^(q-1) u = 0``.

    Returns ``(r, u, du, zero)`` where ``zero`` is the first sign change
    located by a Newton step from the last positive node (``None`` if the
    solution stays positive).
    """
    def f(r, u, v):
        return v, -(n - 1) * logderiv(r) * v - abs(u) ** (q - 1) * u

    steps = int(math.ceil((r_end - r_start) / h))
    rs = [r_start]
    us = [a - a ** q * r_start ** 2 / (2 * n)]
    vs = [-a ** q * r_start / n]
    r, u, v = rs[0], us[0], vs[0]
    zero = None
    for _ in range(steps):
        k1 = f(r, u, v)
        k2 = f(r + h / 2, u + h / 2 * k1[0], v + h / 2 * k1[1])
        k3 = f(r + h / 2, u + h / 2 * k2[0], v + h / 2 * k2[1])
        k4 = f(r + h, u + h * k3[0], v + h * k3[1])
        u_new = u + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v_new = v + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if u_new <= 0 < u and zero is None:
            # Newton from the left node, then one correction with the cubic
            # Hermite interpolant of the step
            t = _hermite_root(u, v, u_new, v_new, h)
            zero = r + t
            if stop_at_zero:
                rs.append(r + h)
                us.append(u_new)
                vs.append(v_new)
                break
        r, u, v = r + h, u_new, v_new
        rs.append(r)
        us.append(u)
        vs.append(v)
    return np.array(rs), np.array(us), np.array(vs), zero


def _hermite_root(u0, v0, u1, v1, h):
    def p(t):
        s = t / h
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * u0 + h10 * h * v0 + h01 * u1 + h11 * h * v1
    lo, hi = 0.0, h
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if p(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def euclidean_critical_solution(a: float, r):
    """Exact positive solution of ``-Delta u = u^5`` in R^3 with ``u(0) = a``."""
    r = np.asarray(r, dtype=float)
    s = 1.0 + a ** 4 * r ** 2 / 3.0
    return a * s ** -0.5, -a ** 5 * r / 3.0 * s ** -1.5


def talenti_quotient(N: float, kappa_power: float = 1.0) -> float:
    """Quotient ``||U'||_2 / ||U||_p`` of the Aubin-Talenti bubble with weight ``r^(N-1)``.

    ``p = 2N/(N-2)``; the weight may carry a constant factor
    ``kappa_power`` (for ``psi = kappa r^alpha`` this is ``kappa^(n-1)``).
    """
    p = 2 * N / (N - 2)
    U = lambda r: (1 + r * r) ** (-(N - 2) / 2)  # noqa: E731
    dU = lambda r: -(N - 2) * r * (1 + r * r) ** (-N / 2)  # noqa: E731
    num, _ = integrate.quad(lambda r: dU(r) ** 2 * r ** (N - 1), 0, np.inf, epsrel=1e-13)
    den, _ = integrate.quad(lambda r: U(r) ** p * r ** (N - 1), 0, np.inf, epsrel=1e-13)
    return math.sqrt(kappa_power * num) / (kappa_power * den) ** (1 / p)


def shifted_power_volume_n3_alpha2(R: float) -> float:
    """``int_0^R (((1+r)^2 - 1)/2)^2 dr`` from the antiderivative of ``(r^2 + 2r)^2 / 4``."""
    return (R ** 5 / 5 + R ** 4 + 4 * R ** 3 / 3) / 4


def hyperbolic_volume(n: int, R: float) -> float:
    """``int_0^R sinh^(n-1)`` for ``n = 2, 3, 4`` in closed form."""
    if n == 2:
        return math.cosh(R) - 1
    if n == 3:
        return (math.sinh(2 * R) / 2 - R) / 2
    if n == 4:
        return math.cosh(R) ** 3 / 3 - math.cosh(R) + 2 / 3
    raise ValueError("closed form only for n = 2, 3, 4")


def hp4_lhs_direct(psi: Callable, dpsi: Callable, n: int, r: float) -> float:
    """``(n-1) psi'(r)/psi(r)^n int_0^r psi^(n-1)`` by scipy.quad at a single radius."""
    vol, _ = integrate.quad(lambda s: psi(s) ** (n - 1), 0, r, epsrel=1e-12, limit=200)
    return (n - 1) * dpsi(r) / psi(r) ** n * vol


def pohozaev_direct(r, u, du, psi: Callable, n: int, q: float):
    """``P`` on a fine grid from samples, with the volume by cumulative trapezoid."""
    w = psi(r) ** (n - 1)
    vol = integrate.cumulative_trapezoid(w, r, initial=0.0)
    return vol * (du ** 2 / 2 + np.abs(u) ** (q + 1) / (q + 1)) + w * u * du / (q + 1)
