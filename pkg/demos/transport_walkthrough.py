"""Bottleneck transport between two-parent kernels at nearby offspring traits.

    python demos/transport_walkthrough.py

For a Gaussian parental profile the kernels are translates of each other, so the
bottleneck ratio tends to ``2/(1 + 2 alpha)`` as the quantization is refined.
"""

from inflab import Grid1D, LogDensity, SelectionSpec, solve_alpha, solve_eigen
from inflab.transport import DiscreteMeasure, bottleneck_winf, verify_kernel_contraction, wpq_lp

# warm-up on tiny point clouds: the line, where sorted matching is optimal
mu = DiscreteMeasure([[0.0], [1.0], [3.0]], [0.2, 0.5, 0.3])
nu = mu.translate([0.25])
print("shift by 0.25:", wpq_lp(mu, nu, 1, 1).value, wpq_lp(mu, nu, 2, 1).value,
      bottleneck_winf(mu, nu, 1).value)

beta = 1.0
alpha = solve_alpha(beta)
grid = Grid1D.symmetric(10, 2049)
ref = solve_eigen(SelectionSpec.quadratic(beta),
                  LogDensity.from_function(grid, lambda x: 0.5 * alpha * x**2), tol=1e-12)

for q in (16, 24, 32, 48):
    rep = verify_kernel_contraction(ref.profile, alpha, [(-2.0, 2.0)], quantization=q)
    (row,) = rep.rows
    print(f"quantization {q:2d}: W_inf,1 ratio {row.ratio:.4f}, rho {rep.rho:.4f}, "
          f"allowed up to {row.bound:.4f}, {'ok' if row.passed else 'VIOLATED'}")
