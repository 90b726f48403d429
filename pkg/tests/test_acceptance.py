"""Acceptance criteria, each at its stated tolerance and time budget.

Every criterion records one ``PASS``/``FAIL`` line; the lines are printed
as they happen and repeated in the pytest terminal summary.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

import oracles
from lanemanifold.constructions import (
    Supersolution, build_supersolution, glue, smooth_c1, smooth_cinf, verify_supersolution,
)
from lanemanifold.diagnostics import is_nondecreasing, pohozaev, pohozaev_rate_identity
from lanemanifold.dirichlet import (
    ROOT_TOL, branch_trace, detect_nonuniqueness, dirichlet_solution, find_bracket,
)
from lanemanifold.model_manifold import (
    check_hp4, check_hp5, classify_regime, comparison_profile, critical_exponents,
    fit_power_tail, make_profile,
)
from lanemanifold.shooting import CauchyProblem, first_zero, integrate_cauchy, residual
from lanemanifold.sobolev import embedding_report, quotient_limit_scan, rayleigh_minimize

RESULTS: list[str] = []


class Criterion:
    """Times a block, records a PASS/FAIL line and enforces the time budget."""

    def __init__(self, number: int, title: str, limit_s: float):
        self.number, self.title, self.limit = number, title, limit_s
        self.details: list[str] = []

    def note(self, text: str) -> None:
        self.details.append(text)

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        in_time = elapsed <= self.limit
        ok = exc_type is None and in_time
        extra = "; ".join(self.details)
        if exc_type is not None:
            extra = (extra + "; " if extra else "") + f"{exc_type.__name__}: {exc}".splitlines()[0]
        elif not in_time:
            extra = (extra + "; " if extra else "") + f"over the {self.limit:g} s budget"
        line = (f"{'PASS' if ok else 'FAIL'} criterion {self.number}: {self.title} "
                f"[{elapsed:.2f} s] {extra}")
        RESULTS.append(line)
        print(line)
        if exc_type is None and not in_time:
            raise AssertionError(f"criterion {self.number} took {elapsed:.1f} s > {self.limit} s")
        return False


# 1 ---------------------------------------------------------------------------------------

TABLE = {
    "strongly_subcritical": ("NO", "NO", "unknown"),
    "intermediate": ("YES", "both YES and NO depending psi", "it fails for some psi"),
    "intermediate_critical": ("YES", "both YES and NO depending psi", "unknown"),
    "slightly_subcritical": ("YES", "YES", "unknown"),
}


def _expected_label(q: Fraction) -> str:
    if q <= Fraction(5, 3):
        return "strongly_subcritical"
    if q < Fraction(7, 3):
        return "intermediate"
    if q == Fraction(7, 3):
        return "intermediate_critical"
    if q < 5:
        return "slightly_subcritical"
    return "at_or_above_sobolev_critical"


def test_criterion_1_regime_arithmetic():
    with Criterion(1, "regime arithmetic", 1.0) as c:
        assert tuple(critical_exponents(3, 2)) == (Fraction(5, 3), Fraction(10, 3), 6)
        grid = [1 + Fraction(k, 12) for k in range(1, 51)]
        assert len(grid) == 50
        for q in grid:
            reg = classify_regime(3, 2, q)
            label = _expected_label(q)
            assert reg.label == label, (q, reg.label, label)
            if label in TABLE:
                assert (reg.supersolutions, reg.radial_solutions, reg.uniqueness) == TABLE[label]
        c.note("50 exact q values, thresholds 5/3, 7/3, 5 included")


# 2 ---------------------------------------------------------------------------------------

def test_criterion_2_pohozaev_identity():
    cases = [("euclidean", 3.0, 1.0), ("euclidean", 5.0, 1.0),
             ("hyperbolic", 2.0, 10.0), ("hyperbolic", 3.0, 10.0),
             ("shifted_power", 2.0, 1.0), ("shifted_power", 3.0, 1.0)]
    with Criterion(2, "Pohozaev identity on 6 trajectories", 10.0) as c:
        worst = 0.0
        for family, q, a in cases:
            psi = make_profile(family, {"alpha": 2.0} if family == "shifted_power" else {})
            traj = integrate_cauchy(CauchyProblem(psi, 3, q, a), 50.0)
            worst = max(worst, pohozaev_rate_identity(pohozaev(traj)))
        c.note(f"max normalised error {worst:.2e}")
        assert worst < 1e-4


# 3 ---------------------------------------------------------------------------------------

def test_criterion_3_nonexistence():
    with Criterion(3, "non-existence corroboration (shifted power, q=2)", 30.0) as c:
        psi = make_profile("shifted_power", {"alpha": 2.0})
        hp5 = check_hp5(psi)
        hp4 = check_hp4(psi, 3, 2.0, r_max=100.0)
        assert hp5.holds and hp5.margin >= 0
        assert hp4.holds
        zeros = []
        for a in (0.1, 1.0, 10.0):
            traj = integrate_cauchy(CauchyProblem(psi, 3, 2.0, a), 500.0)
            assert traj.event.kind == "first_zero" and traj.rho < 500.0
            assert is_nondecreasing(pohozaev(traj), rel_tol=1e-8)
            zeros.append(traj.rho)
        c.note("first zeros " + ", ".join(f"{z:.4f}" for z in zeros)
               + f"; hp4 margin {hp4.margin:.3e}")


# 4 ---------------------------------------------------------------------------------------

def test_criterion_4_gluing_pipeline():
    with Criterion(4, "gluing pipeline (3, 2, 2)", 300.0) as c:
        g = smooth_cinf(smooth_c1(glue(3, 2.0, 2.0)))
        w1, dw1, _, _ = (float(v[0]) for v in g.core.derivatives(g.r_bar))
        w2, dw2, _ = (float(v) for v in g.tail.derivatives(g.r_bar))
        assert abs(w1 - w2) < 1e-8
        assert abs(dw1 - dw2) < 1e-6
        ch = g.checks
        assert ch["stays_positive"] == 1.0
        assert ch["ode_residual"] < 1e-5
        assert ch["convexity_margin"] >= -1e-8
        assert abs(ch["tail_alpha"] - 2.0) < 0.02 * 2.0
        assert abs(ch["decay_exponent"] + 2.0) < 0.05 * 2.0
        assert ch["energy_exponent"] < -1.05
        c.note(f"|w1-w2| {abs(w1 - w2):.1e}, slope gap {abs(dw1 - dw2):.1e}, "
               f"residual {ch['ode_residual']:.1e}, tail alpha {ch['tail_alpha']:.5f}, "
               f"decay {ch['decay_exponent']:.5f}, energy exponent {ch['energy_exponent']:.4f}")


# 5 ---------------------------------------------------------------------------------------

def test_criterion_5_nonuniqueness(glued_final):
    g = glued_final
    with Criterion(5, "non-uniqueness on the final glued profile", 300.0) as c:
        br = branch_trace(g.psi_final, 3, 2.0, 1e-2 * g.u0, 1e2 * g.u0, count=64, r_max=200.0)
        assert len(br.monotone_violations) >= 1
        triples = detect_nonuniqueness(br)
        assert triples
        t = triples[0]
        for sol in t.solutions:
            assert abs(sol.R - t.R) < ROOT_TOL * t.R
            assert residual(sol.trajectory) < 1e-5
            assert abs(sol.trajectory.sample(sol.R)[0]) < 1e-10 * sol.a
        assert abs(t.a1 - t.a2) / t.a1 > 1e-3
        c.note(f"{len(br.monotone_violations)} violation pairs; R = {t.R:.6f}, "
               f"a1 = {t.a1:.6f}, a2 = {t.a2:.6f}")


# 6 ---------------------------------------------------------------------------------------

def test_criterion_6_embedding_dichotomy():
    with Criterion(6, "embedding dichotomy and quotient limits", 120.0) as c:
        psi = make_profile("shifted_power", {"alpha": 2.0})
        verdicts = {p: embedding_report(psi, 3, p).verdict for p in (3.0, 10 / 3, 4.0)}
        assert verdicts[3.0] == "not_continuous"
        assert verdicts[10 / 3] == "continuous_not_compact"
        assert verdicts[4.0] == "continuous_and_compact"
        R = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
        decay = quotient_limit_scan(psi, 3, 2.0, R)
        stable = quotient_limit_scan(psi, 3, 3.0, R)
        assert decay.fitted_power < 0
        assert stable.relative_change_last < 0.01
        c.note(f"q=2 fitted power {decay.fitted_power:.3f}; q=3 last change "
               f"{stable.relative_change_last:.1e}")


# 7 ---------------------------------------------------------------------------------------

def test_criterion_7_mass_quotient():
    with Criterion(7, "mass-quotient identity (hyperbolic, R=1)", 60.0) as c:
        psi = make_profile("hyperbolic")
        sol = dirichlet_solution(psi, 3, 2.0, 1.0, find_bracket(psi, 3, 2.0, 1.0))
        I_R = rayleigh_minimize(psi, 3, 2.0, 1.0).I_R
        target = I_R ** (2 * 3 / 1)
        rel = abs(sol.mass - target) / target
        c.note(f"mass {sol.mass:.5f} vs I_R^6 {target:.5f} (rel {rel:.1e})")
        assert rel < 0.02


# 8 ---------------------------------------------------------------------------------------

def test_criterion_8_supersolution():
    with Criterion(8, "supersolution verifier", 10.0) as c:
        psi = make_profile("shifted_power", {"alpha": 2.0})
        sup = build_supersolution(psi, 3, 2.0, 2.0)
        ok = verify_supersolution(sup, psi, 3, 1e-4, 1e4)
        assert ok.holds and ok.min_residual >= 0
        bad = verify_supersolution(Supersolution(4 * sup.A, sup.B, sup.eps, sup.r_eps, sup.q),
                                   psi, 3, 1e-4, 1e4)
        assert not bad.holds
        c.note(f"A = {sup.A:.4f}, B = {sup.B:.4f}, min residual {ok.min_residual:.3e}; "
               f"4A rejected at r = {bad.worst_r:.3g}")


# 9 ---------------------------------------------------------------------------------------

def test_criterion_9_comparison_profile():
    with Criterion(9, "comparison profile tail (Q=2)", 5.0) as c:
        prof = comparison_profile(2.0, 1.0, 2.0)
        # an independent integration of psi'' = G psi from the pole
        sol = integrate.solve_ivp(lambda r, y: [y[1], float(prof.curvature_ratio(r)) * y[0]],
                                  (1e-8, 40.0), [1e-8, 1.0], method="LSODA", rtol=1e-12,
                                  atol=1e-14, dense_output=True)
        r = np.geomspace(2.0, 40.0, 400)
        fit = fit_power_tail(r, sol.sol(r)[0])
        c.note(f"exponent {fit.exponent:.9f}, relative residual {fit.residual:.1e}")
        assert fit.exponent == pytest.approx(2.0, rel=1e-6)
        assert fit.residual < 1e-6


# 10 --------------------------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="rho(a)*sqrt(a) is not invariant for q = 3 in R^3: "
                   "u_a(r) = a u_1(a r) gives rho(a) = rho(1)/a; see the corrected test below")
def test_criterion_10_scaling_as_stated():
    psi = make_profile("euclidean")
    with Criterion(10, "Euclidean q=3 scaling, rho(a)*sqrt(a) constant", 5.0) as c:
        vals = [first_zero(CauchyProblem(psi, 3, 3.0, a), 100.0) * math.sqrt(a)
                for a in (0.25, 1.0, 4.0)]
        spread = (max(vals) - min(vals)) / vals[1]
        c.note("rho*sqrt(a) = " + ", ".join(f"{v:.6f}" for v in vals)
               + f" (spread {spread:.2f})")
        assert spread < 1e-4


def test_criterion_10_corrected_scaling_law():
    psi = make_profile("euclidean")
    t0 = time.perf_counter()
    vals = [first_zero(CauchyProblem(psi, 3, 3.0, a), 100.0) * a for a in (0.25, 1.0, 4.0)]
    spread = (max(vals) - min(vals)) / vals[1]
    line = (f"NOTE criterion 10 with the exact law rho(a)*a: spread {spread:.1e} "
            f"[{time.perf_counter() - t0:.2f} s]")
    RESULTS.append(line)
    print(line)
    assert spread < 1e-4
    # cross-check the invariant against the fixed-step oracle
    _, _, _, zero = oracles.rk4_radial(lambda r: 1.0 / r, 3, 3.0, 1.0, 10.0, h=1e-4)
    assert vals[1] == pytest.approx(zero, rel=1e-8)
