"""Curves of the log-concavity parameter and the one-step rates.

Unlike :func:`inflab.eigen.solve_alpha` these accept the endpoint ``beta = 0``,
where the curves end at ``alpha = 1/2`` and ``rho = 1``.
"""

import numpy as np

from .transport import rates_from_alpha

__all__ = ["alpha_curve", "rho_curve", "beta_axis", "alpha_axis", "figure_tables"]


def alpha_curve(beta):
    beta = np.asarray(beta, dtype=float)
    b = 1.0 + 2.0 * beta
    return (b + np.sqrt(b * b + 8.0 * beta)) / 4.0


def rho_curve(beta):
    return 2.0 / (1.0 + 2.0 * alpha_curve(beta))


def beta_axis(beta_max=3.0, per_unit=100):
    # integer numerators keep the marked endpoints exact
    k = np.arange(int(round(beta_max * per_unit)) + 1)
    return k / per_unit


def alpha_axis(alpha_max=5.0, per_unit=100):
    k = np.arange(int(round(0.5 * per_unit)), int(round(alpha_max * per_unit)) + 1)
    return k / per_unit


def figure_tables(beta_max=3.0, alpha_max=5.0):
    """Rows for the three figure CSV files, keyed by file name."""
    beta = beta_axis(beta_max)
    alpha = alpha_axis(alpha_max)
    r1, r2 = rates_from_alpha(alpha)
    return {
        "fig1_alpha.csv": (("beta", "alpha"), np.column_stack([beta, alpha_curve(beta)])),
        "fig1_rho.csv": (("beta", "rho"), np.column_stack([beta, rho_curve(beta)])),
        "fig2_rates.csv": (("alpha", "rate_l1", "rate_l2"), np.column_stack([alpha, r1, r2])),
    }
