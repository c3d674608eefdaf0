"""Perturb the eigenfunction and watch the relative Fisher information shrink.

    python demos/contraction_walkthrough.py

Prints the per-generation ratio ``I_n / I_{n-1}`` next to ``2/(1 + 2 alpha)``,
then the fitted decay slopes of the eigenvalue gap and of the relative entropy.
"""

import numpy as np

from inflab import Grid1D, LogDensity, SelectionSpec, contraction_factor, solve_alpha, solve_eigen
from inflab.analysis import contraction_run, growth_rate_fit, make_admissible_initial

beta = 1.0
grid = Grid1D.symmetric(10, 2049)
alpha = solve_alpha(beta)
rho = contraction_factor(beta)

for label, m in [
    ("quadratic", SelectionSpec.quadratic(beta)),
    ("quartic", SelectionSpec.even_polynomial([0, 0, 0.5, 0, 0.25], grid=grid)),
]:
    ref = solve_eigen(m, LogDensity.from_function(grid, lambda x: 0.5 * alpha * x**2), tol=1e-12)
    f0 = make_admissible_initial(ref.profile, 0.2, "sine")
    trace = contraction_run(m, f0, ref, 16)
    print(f"\n{label}: lambda = {ref.lam:.12f}, rho = {rho:.6f}")
    i_inf = trace.column("i_inf")
    for n, r in enumerate(trace.ratios(), 1):
        if i_inf[n - 1] > 1e-6:
            print(f"  generation {n:2d}: I_inf = {i_inf[n]:.3e}, ratio = {r:.6f}")
    s_lam, s_kl = growth_rate_fit(trace, ref)
    print(f"  slope of |lambda_n - lambda|: {s_lam:.4f}  (log rho = {np.log(rho):.4f})")
    print(f"  slope of KL:                  {s_kl:.4f}  (2 log rho = {2 * np.log(rho):.4f})")
