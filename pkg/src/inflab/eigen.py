"""Scalar fixed points and the nonlinear eigenpair ``λ F = T[F]``."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .grid import LogDensity
from .metrics import estimate_log_concavity, support_region
from .model import SelectionSpec, apply_A, apply_T, log_concavity_update

__all__ = [
    "ConvergenceError",
    "ScalarFixedPoints",
    "EigenResult",
    "solve_alpha",
    "contraction_factor",
    "contraction_factor_quadratic",
    "quadratic_sigma2",
    "quadratic_lambda_oracle",
    "scalar_fixed_points",
    "solve_eigen",
    "profile_step_difference",
]


class ConvergenceError(RuntimeError):
    """Normalized iteration did not settle; ``trace`` holds what was computed."""

    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


def _check_beta(beta):
    if not beta > 0:
        raise ValueError(f"H1 violated: beta must be positive, got {beta}")


def solve_alpha(beta):
    """Log-concavity ``α > 1/2`` of the eigenfunction: ``α = β + 2α/(1+2α)``.

    The closed-form root is cross-checked against plain fixed-point iteration
    of the defining map (a contraction with factor ``2/(1+2α)² <= 1/2``).
    """
    _check_beta(beta)
    b = 1.0 + 2.0 * beta
    closed = (b + np.sqrt(b * b + 8.0 * beta)) / 4.0
    a = max(closed, 1.0)
    for _ in range(500):
        a_new = log_concavity_update(a, beta)
        if a_new == a:
            break
        a = a_new
    if abs(a - closed) > 1e-13 * max(1.0, closed):
        raise ArithmeticError(f"alpha routes disagree: {closed!r} vs {a!r}")
    return float(closed)


def contraction_factor(beta):
    """``ρ = 2/(1+2α)``."""
    return 2.0 / (1.0 + 2.0 * solve_alpha(beta))


def contraction_factor_quadratic(beta):
    """``((3+2β) - sqrt((3+2β)² - 8))/2`` evaluated in cancellation-free form."""
    _check_beta(beta)
    a = 3.0 + 2.0 * beta
    return 4.0 / (a + np.sqrt(a * a - 8.0))


def quadratic_sigma2(beta):
    """Positive root of ``1/σ² = β + 1/(1 + σ²/2)``."""
    _check_beta(beta)

    def eq(s):
        return 1.0 / s - beta - 1.0 / (1.0 + 0.5 * s)

    # eq decreases from +inf (s -> 0) to -beta (s -> inf); root lies below 2
    return brentq(eq, 1e-300, 2.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def quadratic_lambda_oracle(beta):
    """``λ`` of the quadratic case ``m = βx²/2`` by Gaussian integrals.

    ``F = N(0, σ²)`` gives ``B[F] = N(0, 1 + σ²/2)`` and
    ``λ = ∫ exp(-βx²/2) B[F] dx = (1 + β(1 + σ²/2))^{-1/2}``.
    """
    s2 = quadratic_sigma2(beta)
    return float(1.0 / np.sqrt(1.0 + beta * (1.0 + 0.5 * s2)))


@dataclass
class ScalarFixedPoints:
    beta: float
    alpha: float
    rho: float
    sigma2_quadratic: float


def scalar_fixed_points(beta):
    return ScalarFixedPoints(
        beta=beta,
        alpha=solve_alpha(beta),
        rho=contraction_factor(beta),
        sigma2_quadratic=quadratic_sigma2(beta),
    )


@dataclass
class EigenResult:
    lam: float
    profile: LogDensity
    alpha_hat: float
    iterations: int
    trace: list = field(default_factory=list)
    truncated: float = None
    residual: float = np.nan

    def trace_rows(self):
        """Rows ``(n, lambda_n, step_diff, alpha_hat_n)`` for CSV output."""
        return [(n + 1, *rec) for n, rec in enumerate(self.trace)]


def profile_step_difference(f, g):
    """Sup of ``|log f - log g|`` on nodes where both are above ``e^-60·max``."""
    sl = support_region(f, g)
    return float(np.max(np.abs(f.v[sl] - g.v[sl])))


def _beta_of(m):
    if isinstance(m, SelectionSpec):
        return m.beta
    return None


def solve_eigen(m, f0, trunc=None, tol=1e-10, max_iter=400, linear=False):
    """Normalized iteration ``f <- T[f]/||T[f]||`` until the profile settles.

    ``λ_n`` is the mass of ``T[f]`` for the normalized ``f``. Stops when the sup
    of successive log-profile differences drops below ``tol``. With ``linear``
    the single-parent operator ``A`` replaces ``T`` (``trunc`` must be None).
    """
    if linear and trunc is not None:
        raise ValueError("truncation applies to the two-parent operator only")

    def step(f):
        return apply_A(f, m) if linear else apply_T(f, m, trunc)

    f = f0.truncate(trunc.R) if trunc is not None else f0
    if not np.isfinite(f.log_mass()):
        raise ValueError("zero mass: initial density vanishes")
    f = f.normalize()
    beta = _beta_of(m)
    if beta is not None and not linear:
        try:
            gamma0 = estimate_log_concavity(f)
        except ValueError:
            gamma0 = -np.inf
        if gamma0 < solve_alpha(beta) - 10 * f.grid.h**2:
            warnings.warn(
                f"initial density is {gamma0:.3g}-log-concave, below alpha={solve_alpha(beta):.3g}",
                RuntimeWarning,
                stacklevel=2,
            )
    trace = []
    for n in range(1, max_iter + 1):
        g = step(f)
        lm = g.log_mass()
        if not np.isfinite(lm):
            raise ConvergenceError("zero-mass collapse", trace)
        g = g.shift_log(lm)
        diff = profile_step_difference(g, f)
        trace.append((float(np.exp(lm)), diff, estimate_log_concavity(g)))
        f = g
        if diff < tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations (last step {trace[-1][1]:.3g})", trace
        )
    lam = trace[-1][0]
    tf = step(f)
    sl = support_region(tf, f)
    residual = float(np.max(np.abs(tf.v[sl] - (f.v[sl] - np.log(lam)))))
    return EigenResult(
        lam=lam,
        profile=f,
        alpha_hat=trace[-1][2],
        iterations=n,
        trace=trace,
        truncated=trunc.R if trunc is not None else None,
        residual=residual,
    )
