"""Weighted Sobolev embeddings and truncated Rayleigh quotients.

Run with ``python3 demos/embeddings_and_quotients.py``.
"""
from lanemanifold.dirichlet import dirichlet_solution, find_bracket
from lanemanifold.model_manifold import critical_exponents, make_profile
from lanemanifold.sobolev import embedding_report, quotient_limit_scan, rayleigh_minimize

n, alpha = 3, 2.0
psi = make_profile("shifted_power", {"alpha": alpha})
low, crit, _ = critical_exponents(n, alpha)
print(f"weighted exponents: {low} and {crit}")
for p in (3.0, float(crit), 4.0):
    rep = embedding_report(psi, n, p)
    print(f"  p = {p:6.4f}: {rep.verdict:24s} sup B = {rep.sup_B:.4f}")

R = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
for q in (2.0, 3.0):
    scan = quotient_limit_scan(psi, n, q, R)
    values = ", ".join(f"{res.I_R:.5f}" for res in scan.results)
    print(f"q = {q}: I_R = {values}; fitted power {scan.fitted_power:.3f}")

# The Dirichlet solution's mass equals the quotient to the power 2(q+1)/(q-1).
hyp = make_profile("hyperbolic")
sol = dirichlet_solution(hyp, n, 2.0, 1.0, find_bracket(hyp, n, 2.0, 1.0))
I_R = rayleigh_minimize(hyp, n, 2.0, 1.0).I_R
print(f"hyperbolic unit ball: height {sol.a:.6f}, mass {sol.mass:.5f}, I_R^6 {I_R ** 6:.5f}")
