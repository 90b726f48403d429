"""Exponent arithmetic, first zeros and the Pohozaev trace on three model manifolds.

Run with ``python3 demos/regimes_and_shooting.py``.
"""
import numpy as np

from lanemanifold.diagnostics import is_nondecreasing, pohozaev, pohozaev_rate_identity
from lanemanifold.model_manifold import check_hp4, check_hp5, classify_regime, make_profile
from lanemanifold.shooting import CauchyProblem, integrate_cauchy

n, alpha = 3, 2.0

print("regimes for n = 3, alpha = 2")
for q in (1.5, 2.0, 7 / 3, 3.0, 5.0):
    reg = classify_regime(n, alpha, q)
    print(f"  q = {q:6.4f}  {reg.label:30s} supersolutions: {reg.supersolutions}")

profiles = {
    "euclidean": make_profile("euclidean"),
    "hyperbolic": make_profile("hyperbolic"),
    "shifted_power": make_profile("shifted_power", {"alpha": alpha}),
}

print("\nfirst zero of the radial solution with u(0) = a, q = 2")
print(f"  {'profile':15s}" + "".join(f"{'a=' + str(a):>12s}" for a in (0.1, 1.0, 10.0)))
for name, psi in profiles.items():
    row = []
    for a in (0.1, 1.0, 10.0):
        traj = integrate_cauchy(CauchyProblem(psi, n, 2.0, a), 500.0)
        row.append(f"{traj.rho:12.5f}" if traj.rho is not None else f"{'none':>12s}")
    print(f"  {name:15s}" + "".join(row))

# The shifted power profile satisfies both structural conditions for q = 2,
# so the Pohozaev function should never decrease before the first zero.
psi = profiles["shifted_power"]
print("\nshifted power: hp5 holds:", check_hp5(psi).holds,
      "| hp4 holds on [0, 100]:", check_hp4(psi, n, 2.0, r_max=100.0).holds)
for a in (0.1, 1.0, 10.0):
    P = pohozaev(integrate_cauchy(CauchyProblem(psi, n, 2.0, a), 500.0))
    print(f"  a = {a:5.1f}: P nondecreasing {is_nondecreasing(P)}, "
          f"identity error {pohozaev_rate_identity(P):.1e}, P(rho) = {P.P[-1]:.4e}")

# On hyperbolic space the same condition fails and P is not monotone.
P = pohozaev(integrate_cauchy(CauchyProblem(profiles["hyperbolic"], n, 2.0, 2.0), 50.0))
print("hyperbolic, a = 2: P nondecreasing", is_nondecreasing(P),
      f"| rate negative on {np.mean(P.rate < 0):.0%} of the samples")
