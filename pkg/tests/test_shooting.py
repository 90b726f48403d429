import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from lanemanifold.shooting import (
    SERIES_START, CauchyProblem, Event, Trajectory, decay_fit, first_zero, integrate_cauchy,
    residual,
)


def test_problem_validation(euclidean):
    for bad in ({"n": 1}, {"q": 1.0}, {"a": 0.0}):
        kw = {"psi": euclidean, "n": 3, "q": 3.0, "a": 1.0, **bad}
        with pytest.raises(ValueError):
            CauchyProblem(**kw)


def test_unknown_event_rejected():
    with pytest.raises(ValueError):
        Event("overflow")


@pytest.mark.parametrize("profile,q,a,h", [
    ("euclidean", 3.0, 1.0, 1e-4),
    ("hyperbolic", 2.0, 10.0, 1e-4),
    ("shifted2", 2.0, 1.0, 1e-4),
])
def test_first_zero_matches_rk4(request, profile, q, a, h):
    psi = request.getfixturevalue(profile)
    traj = integrate_cauchy(CauchyProblem(psi, 3, q, a), 50.0)
    assert traj.event.kind == "first_zero"
    _, _, _, zero = oracles.rk4_radial(lambda r: float(psi.logderiv(r)), 3, q, a, 50.0, h=h)
    assert traj.rho == pytest.approx(zero, rel=1e-8)


def test_euclidean_critical_exact_solution(euclidean):
    traj = integrate_cauchy(CauchyProblem(euclidean, 3, 5.0, 2.0), 20.0, rtol=1e-12)
    assert traj.event.kind == "reached_r_max"
    r = np.geomspace(1e-3, 20.0, 200)
    u, du = traj.sample(r)
    ue, due = oracles.euclidean_critical_solution(2.0, r)
    assert np.max(np.abs(u / ue - 1)) < 1e-8
    assert np.max(np.abs(du - due) / np.abs(due).max()) < 1e-8


def test_euclidean_cubic_scaling_law(euclidean):
    # u_a(r) = a u_1(a r) for q = 3, so rho(a) * a is constant
    rho = {a: first_zero(CauchyProblem(euclidean, 3, 3.0, a), 100.0) for a in (1.0, 4.0)}
    assert rho[4.0] == pytest.approx(rho[1.0] / 4.0, rel=1e-8)


def test_hyperbolic_rho_decreases_with_height(hyperbolic):
    big = first_zero(CauchyProblem(hyperbolic, 3, 2.0, 500.0), 50.0)
    small = first_zero(CauchyProblem(hyperbolic, 3, 2.0, 10.0), 50.0)
    assert big < small


def test_truncation_hides_zero(euclidean):
    p = CauchyProblem(euclidean, 3, 3.0, 1.0)
    rho = first_zero(p, 50.0)
    assert first_zero(p, 0.5 * rho) is None
    assert integrate_cauchy(p, 0.5 * rho).event.kind == "reached_r_max"


def test_continue_past_zero_reports_first(euclidean):
    p = CauchyProblem(euclidean, 3, 3.0, 1.0)
    short = integrate_cauchy(p, 30.0)
    long = integrate_cauchy(p, 30.0, continue_past_zero=True)
    assert long.rho == pytest.approx(short.rho, rel=1e-10)
    assert long.r[-1] == pytest.approx(30.0)
    assert np.any(long.u < 0)


def test_series_start_consistency(shifted2):
    p = CauchyProblem(shifted2, 3, 2.0, 1.0)
    t1 = integrate_cauchy(p, 2.0, rtol=1e-12, r_start=SERIES_START)
    t2 = integrate_cauchy(p, 2.0, rtol=1e-12, r_start=SERIES_START / 10)
    assert abs(t1.sample(1.0)[0] - t2.sample(1.0)[0]) < 1e-8


def test_tolerance_convergence(hyperbolic):
    p = CauchyProblem(hyperbolic, 3, 2.0, 20.0)
    coarse = first_zero(p, 10.0, rtol=1e-7)
    fine = first_zero(p, 10.0, rtol=1e-12)
    assert coarse == pytest.approx(fine, rel=1e-5)


def test_monotone_while_positive(shifted2):
    traj = integrate_cauchy(CauchyProblem(shifted2, 3, 2.0, 1.0), 50.0)
    r = traj.fine_grid(4)
    u, du = traj.sample(r[r < traj.rho])
    assert np.all(du[1:] < 0) and np.all(u > 0)


def test_residual_small(euclidean, hyperbolic):
    for psi, q, a in ((euclidean, 3.0, 1.0), (euclidean, 3.0, 4.0), (hyperbolic, 2.0, 5.0)):
        traj = integrate_cauchy(CauchyProblem(psi, 3, q, a), 50.0)
        assert residual(traj) < 1e-5


def test_residual_needs_points(euclidean):
    traj = integrate_cauchy(CauchyProblem(euclidean, 3, 3.0, 1.0), 50.0)
    short = Trajectory(traj.r[:3], traj.u[:3], traj.du[:3], traj.event, traj.problem)
    with pytest.raises(ValueError):
        residual(short)


def test_decay_fit_exact_power(euclidean):
    r = np.geomspace(1.0, 100.0, 50)
    fake = Trajectory(r, r ** -3.0, -3.0 * r ** -4.0, Event("reached_r_max", 100.0),
                      CauchyProblem(euclidean, 3, 3.0, 1.0),
                      dense=lambda x: np.array([x ** -3.0, -3.0 * x ** -4.0]))
    fit = decay_fit(fake, points=200)
    assert fit.exponent_u == pytest.approx(-3.0, abs=1e-12)
    assert fit.exponent_du == pytest.approx(-4.0, abs=1e-12)


def test_decay_fit_critical_euclidean(euclidean):
    traj = integrate_cauchy(CauchyProblem(euclidean, 3, 5.0, 1.0), 1e4)
    fit = decay_fit(traj)
    assert fit.exponent_u == pytest.approx(-1.0, rel=1e-3)
    assert fit.exponent_du == pytest.approx(-2.0, rel=1e-3)


def test_decay_fit_rejects_bad_window(euclidean):
    traj = integrate_cauchy(CauchyProblem(euclidean, 3, 5.0, 1.0), 100.0)
    with pytest.raises(ValueError):
        decay_fit(traj, window=(10.0, 1000.0))


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.3, 30.0))
def test_cubic_scaling_property(euclidean, a):
    base = first_zero(CauchyProblem(euclidean, 3, 3.0, 1.0), 100.0)
    rho = first_zero(CauchyProblem(euclidean, 3, 3.0, a), 100.0 / a)
    assert rho * a == pytest.approx(base, rel=1e-7)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.05, 50.0))
def test_first_zero_sign_change(shifted2, a):
    traj = integrate_cauchy(CauchyProblem(shifted2, 3, 2.0, a), 1e3)
    assert traj.rho is not None
    assert abs(traj.sample(traj.rho)[0]) < 1e-9 * a
    assert traj.sample(0.999 * traj.rho)[0] > 0
