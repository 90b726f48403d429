import logging
import math

import numpy as np
import pytest

from lanemanifold.dirichlet import (
    DirichletBranch, ball_integrals, branch_claims_report, branch_trace, detect_nonuniqueness,
    dirichlet_solution, find_bracket,
)
from lanemanifold.shooting import CauchyProblem, integrate_cauchy, residual
from lanemanifold.sobolev import rayleigh_minimize


def test_hyperbolic_branch_monotone(hyperbolic):
    br = branch_trace(hyperbolic, 3, 2.0, 0.1, 100.0, count=32)
    assert br.monotone_violations == ()
    finite = br.rho_extended[br.present]
    assert finite.size > 10 and np.all(np.diff(finite) < 0)
    assert detect_nonuniqueness(br) == []


def test_root_contract(hyperbolic):
    br = branch_trace(hyperbolic, 3, 2.0, 5.0, 500.0, count=16)
    checks = [c for c in br.u_at_rho if c is not None]
    assert checks and max(checks) < 1e-10


def test_euclidean_branch_scaling(euclidean):
    br = branch_trace(euclidean, 3, 3.0, 0.25, 4.0, count=9, r_max=200.0)
    rho = br.rho_extended
    assert np.allclose(rho * br.a, rho[0] * br.a[0], rtol=1e-7)
    assert br.monotone_violations == ()


def test_inverse_is_order_reversal(hyperbolic):
    br = branch_trace(hyperbolic, 3, 2.0, 1.0, 1000.0, count=24)
    R, a = br.inverse()
    assert np.all(np.diff(R) > 0) and np.all(np.diff(a) < 0)


def test_threads_match_serial(hyperbolic):
    a = branch_trace(hyperbolic, 3, 2.0, 1.0, 100.0, count=12)
    b = branch_trace(hyperbolic, 3, 2.0, 1.0, 100.0, count=12, workers=4)
    assert a.rho == b.rho


def test_branch_input_guards(hyperbolic):
    with pytest.raises(ValueError):
        branch_trace(hyperbolic, 3, 2.0, 10.0, 1.0)
    with pytest.raises(ValueError):
        branch_trace(hyperbolic, 3, 2.0, 1.0, 10.0, count=4)


def test_violations_and_missing_entries(hyperbolic):
    a = np.geomspace(1.0, 10.0, 8)
    rho = (5.0, None, None, None, None, None, None, 4.0)
    br = DirichletBranch(a, rho, (None,) * 8, hyperbolic, 3, 2.0, 100.0, 1e-10, ())
    assert br.present.sum() == 2
    assert math.isinf(br.rho_extended[1])


def test_detect_needs_two_zeros(hyperbolic, caplog):
    a = np.geomspace(1.0, 10.0, 8)
    rho = (None,) * 7 + (4.0,)
    br = DirichletBranch(a, rho, (None,) * 8, hyperbolic, 3, 2.0, 100.0, 1e-10, ())
    with caplog.at_level(logging.WARNING):
        assert detect_nonuniqueness(br) == []
    assert "fewer than two" in caplog.text


def test_dirichlet_hyperbolic_unit_ball(hyperbolic):
    bracket = find_bracket(hyperbolic, 3, 2.0, 1.0)
    sol = dirichlet_solution(hyperbolic, 3, 2.0, 1.0, bracket)
    assert sol.R == pytest.approx(1.0, rel=1e-10)
    assert sol.a == pytest.approx(22.1926573, rel=1e-8)
    assert residual(sol.trajectory) < 1e-5
    mass, energy = ball_integrals(sol.trajectory)
    # testing the equation against u itself: energy equals mass
    assert energy == pytest.approx(mass, rel=1e-8)
    assert sol.energy == pytest.approx(energy)


def test_mass_quotient_shifted_power(shifted2):
    sol = dirichlet_solution(shifted2, 3, 2.0, 2.0, find_bracket(shifted2, 3, 2.0, 2.0))
    I = rayleigh_minimize(shifted2, 3, 2.0, 2.0).I_R
    assert sol.mass == pytest.approx(I ** 6, rel=0.02)


def test_inverse_consistency(hyperbolic):
    a = 37.0
    rho = integrate_cauchy(CauchyProblem(hyperbolic, 3, 2.0, a), 10.0).rho
    sol = dirichlet_solution(hyperbolic, 3, 2.0, rho, (0.9 * a, 1.1 * a))
    assert sol.a == pytest.approx(a, rel=1e-8)


def test_wrong_bracket_rejected(hyperbolic):
    with pytest.raises(ValueError):
        dirichlet_solution(hyperbolic, 3, 2.0, 1.0, (100.0, 200.0))
    with pytest.raises(ValueError):
        dirichlet_solution(hyperbolic, 3, 2.0, 1.0, (0.0, 200.0))


def test_euclidean_heights_scale_inversely(euclidean):
    # rho(a) a is constant for q = 3, so A(R) = A(1) / R
    A1 = dirichlet_solution(euclidean, 3, 3.0, 1.0, find_bracket(euclidean, 3, 3.0, 1.0)).a
    A2 = dirichlet_solution(euclidean, 3, 3.0, 2.0, find_bracket(euclidean, 3, 3.0, 2.0)).a
    assert A2 == pytest.approx(A1 / 2, rel=1e-8)


def test_claims_hyperbolic(hyperbolic):
    rep = branch_claims_report(hyperbolic, 3, 2.0, [0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
                               count=48)
    assert all(rep.claims.values()), rep.violations
    assert rep.violations == ()
    assert rep.A[2] == pytest.approx(22.1926573, rel=1e-6)
    assert rep.diagnostics["slope_small_R"] < -1.0


def test_claims_input_guard(hyperbolic):
    with pytest.raises(ValueError):
        branch_claims_report(hyperbolic, 3, 2.0, [1.0, 2.0])


@pytest.mark.slow
def test_glued_branch_not_injective(glued_final):
    g = glued_final
    psi = g.psi_final
    br = branch_trace(psi, 3, 2.0, 1e-2 * g.u0, 1e2 * g.u0, count=64, r_max=200.0)
    assert len(br.monotone_violations) >= 1
    # the distinguished height carries a global positive solution
    assert integrate_cauchy(CauchyProblem(psi, 3, 2.0, g.u0), 200.0).rho is None
    triples = detect_nonuniqueness(br)
    assert triples
    t = triples[0]
    assert abs(t.a1 - t.a2) / t.a1 > 1e-3
    for sol in t.solutions:
        assert sol.R == pytest.approx(t.R, rel=1e-9)
        assert residual(sol.trajectory) < 1e-5
    assert set(t.as_dict()) == {"R", "a1", "a2"}
