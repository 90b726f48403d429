"""A profile carrying a global positive solution, and the resulting non-uniqueness.

The glued profile is hyperbolic near the pole and grows like r^2 at infinity.
Shooting heights around the global solution's height produce first zeros
that are not monotone in the height, so some balls carry two radial
solutions of the Dirichlet problem.

Run with ``python3 demos/glued_nonuniqueness.py`` (about ten seconds).
"""
from lanemanifold.constructions import glue, smooth_c1, smooth_cinf
from lanemanifold.diagnostics import amplitude_limit, pohozaev
from lanemanifold.dirichlet import branch_trace, detect_nonuniqueness
from lanemanifold.shooting import CauchyProblem, integrate_cauchy

n, alpha, q = 3, 2.0, 2.0
g = smooth_cinf(smooth_c1(glue(n, alpha, q)))
print(f"junction r_bar = {g.r_bar:.6f}, height of the global solution u0 = {g.u0:.6f}")
for key, value in sorted(g.checks.items()):
    print(f"  {key:20s} {value: .6g}")

traj = integrate_cauchy(CauchyProblem(g.psi_final, n, q, g.u0), 1e4)
print("global solution reaches", traj.r[-1], "without a zero:", traj.rho is None)
P = pohozaev(traj)
print(f"Pohozaev function at the end {P.P[-1]:.3e} (max |P| {abs(P.P).max():.3e})")
print("tail amplitude", amplitude_limit(traj))

br = branch_trace(g.psi_final, n, q, 1e-2 * g.u0, 1e2 * g.u0, count=64, r_max=200.0)
print(f"\n{len(br.monotone_violations)} adjacent height pairs where the first zero increases")
for t in detect_nonuniqueness(br):
    print(f"ball of radius {t.R:.6f}: heights {t.a1:.6f} and {t.a2:.6f}")
