import math

import numpy as np
import pytest

import oracles
from lanemanifold.dirichlet import dirichlet_solution, find_bracket
from lanemanifold.model_manifold import make_profile, pure_power_weight
from lanemanifold.sobolev import (
    VERDICTS, compare_I_alpha, embedding_report, euler_lagrange_residual, graded_mesh,
    ko_functional, quotient_limit_scan, quotient_of, rayleigh_minimize,
)


# -- Kufner-Opic functional ---------------------------------------------------------

def test_ko_constant_for_euclidean_sobolev(euclidean):
    r = np.geomspace(1e-3, 1e3, 25)
    B = ko_functional(euclidean, 3, 6.0, r)
    # V = r^3/3, T = 1/r: B = 3^(-1/6)
    assert np.allclose(B, 3 ** (-1 / 6), rtol=1e-9)


def test_ko_closed_form_pure_power():
    w = pure_power_weight(2.0, 1.0)
    r = np.array([0.5, 2.0, 50.0])
    p = 4.0
    # V = r^5/5, T = r^-3/3
    expected = (r ** 5 / 5) ** (1 / p) * np.sqrt(r ** -3.0 / 3)
    assert np.allclose(ko_functional(w, 3, p, r), expected, rtol=1e-9)


def test_ko_rejects_undeclared_asymptotics(hyperbolic):
    with pytest.raises(ValueError):
        ko_functional(hyperbolic, 3, 4.0, 1.0)


def test_ko_rejects_slow_growth():
    with pytest.raises(ValueError):
        ko_functional(make_profile("euclidean"), 2, 4.0, 1.0)


@pytest.mark.parametrize("p,verdict", [
    (3.0, "not_continuous"),
    (10 / 3, "continuous_not_compact"),
    (4.0, "continuous_and_compact"),
])
def test_embedding_verdicts(shifted2, p, verdict):
    rep = embedding_report(shifted2, 3, p)
    assert rep.verdict == verdict
    assert rep.verdict in VERDICTS
    # verdict consistency with the reported limits
    assert rep.bounded == (verdict != "not_continuous")
    if verdict == "continuous_and_compact":
        assert rep.limit_0 < 1e-3 * rep.sup_B and rep.limit_inf < 1e-3 * rep.sup_B


def test_embedding_tail_slope_matches_exponent_arithmetic(shifted2):
    # B ~ r^((alpha(n-1)+1)/p - (alpha(n-1)-1)/2) at infinity
    for p in (3.0, 4.0, 5.0):
        rep = embedding_report(shifted2, 3, p)
        assert rep.slope_inf == pytest.approx(5 / p - 1.5, abs=2e-3)


# -- Rayleigh quotient -----------------------------------------------------------

def test_graded_mesh():
    m = graded_mesh(2.0, 100)
    assert m[0] == 0.0 and m[-1] == pytest.approx(2.0) and m.size == 101
    assert np.all(np.diff(m) > 0)


def test_minimizer_basic_properties(hyperbolic):
    res = rayleigh_minimize(hyperbolic, 3, 2.0, 1.0)
    assert res.converged
    assert np.all(res.minimizer >= 0) and res.minimizer[-1] == 0.0
    assert quotient_of(res) == pytest.approx(res.I_R, rel=1e-12)
    assert euler_lagrange_residual(res) < 1e-6


def test_mesh_refinement(hyperbolic):
    coarse = rayleigh_minimize(hyperbolic, 3, 2.0, 1.0, 256).I_R
    fine = rayleigh_minimize(hyperbolic, 3, 2.0, 1.0, 512).I_R
    assert abs(coarse - fine) / fine < 5e-3
    assert coarse == pytest.approx(2.3104254, rel=1e-6)


def test_mass_quotient_identity(hyperbolic):
    res = rayleigh_minimize(hyperbolic, 3, 2.0, 1.0)
    sol = dirichlet_solution(hyperbolic, 3, 2.0, 1.0, find_bracket(hyperbolic, 3, 2.0, 1.0))
    assert sol.mass == pytest.approx(res.I_R ** 6, rel=0.02)
    assert res.mass == pytest.approx(res.I_R ** 6, rel=1e-6)
    # the rescaled minimiser is the Dirichlet solution
    assert res.minimizer[0] == pytest.approx(sol.a, rel=2e-3)


def test_quotient_nonincreasing_in_R(shifted2):
    vals = [rayleigh_minimize(shifted2, 3, 2.0, R).I_R for R in (1.0, 2.0, 4.0)]
    assert vals[0] >= vals[1] >= vals[2]


def test_random_seed_does_not_beat_deterministic_minimum(hyperbolic):
    a = rayleigh_minimize(hyperbolic, 3, 2.0, 1.0, 128)
    b = rayleigh_minimize(hyperbolic, 3, 2.0, 1.0, 128, rng_seed=7)
    assert b.I_R == pytest.approx(a.I_R, rel=1e-6)


def test_pure_power_quotient_above_bubble():
    # with q + 1 = 2*_alpha the pure weight r^alpha behaves like dimension
    # N = alpha(n-1)+1 and the infimum is the Aubin-Talenti quotient
    res = rayleigh_minimize(pure_power_weight(2.0, 1.0), 3, 7 / 3, 30.0)
    bubble = oracles.talenti_quotient(5.0)
    assert bubble * (1 - 1e-6) <= res.I_R <= bubble * 1.005


def test_scan_shapes(shifted2):
    R = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    decay = quotient_limit_scan(shifted2, 3, 2.0, R)
    assert decay.fitted_power < -0.1
    assert all(x.I_R > y.I_R for x, y in zip(decay.results, decay.results[1:]))
    stable = quotient_limit_scan(shifted2, 3, 3.0, R)
    assert stable.relative_change_last < 0.01
    assert stable.results[-1].I_R == pytest.approx(1.7605, rel=1e-3)
    direct = rayleigh_minimize(shifted2, 3, 3.0, 8.0)
    assert stable.results[2].I_R == direct.I_R
    assert len(stable.rows()) == 6


def test_scan_validates_input(shifted2):
    with pytest.raises(ValueError):
        quotient_limit_scan(shifted2, 3, 2.0, [4.0, 2.0])


# -- comparison with the pure power weight -------------------------------------------

def test_compare_requires_critical_q(shifted2):
    with pytest.raises(ValueError):
        compare_I_alpha(shifted2, 3, 2.0, 0.5, 10.0, q=2.0)


def test_compare_identical_weights():
    w = pure_power_weight(2.0, 1.0)
    cmp = compare_I_alpha(w, 3, 2.0, 1.0, 10.0, mesh_size=128)
    assert cmp.gap == 0.0 and not cmp.strict_gap


@pytest.mark.slow
def test_compare_flat_core_strict_gap():
    prof = make_profile("flat_core_power", {"r0": 5.0, "alpha": 2.0})
    cmp = compare_I_alpha(prof, 3, 2.0, 1.0, 30.0)
    assert cmp.strict_gap
    assert cmp.I_psi < cmp.I_alpha
    assert math.isfinite(cmp.error_psi) and cmp.error_psi < 0.01
