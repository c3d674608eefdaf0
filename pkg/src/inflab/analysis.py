"""Experiment harnesses: contraction and Cauchy runs, rate fits, lower bounds."""

import warnings
from dataclasses import dataclass, astuple, fields
from functools import cached_property

import numpy as np
from scipy.integrate import quad

from .grid import Grid1D, LogDensity, logsumexp, trapezoid_log_weights
from .metrics import (
    GridDependentWarning,
    estimate_log_concavity,
    fisher_infinity,
    kl_divergence,
)
from .model import SelectionSpec, apply_A, apply_T, log_concavity_update

__all__ = [
    "TraceRecord",
    "RunTrace",
    "CauchyTrace",
    "make_admissible_initial",
    "perturbation_profile",
    "contraction_run",
    "linear_operator_run",
    "cauchy_run",
    "growth_rate_fit",
    "PolynomialPotential",
    "LowerBoundRow",
    "lower_bound_check",
]


@dataclass
class TraceRecord:
    n: int
    mass: float
    lambda_n: float
    i_inf: float
    kl: float
    alpha_hat: float


@dataclass
class RunTrace:
    records: list
    i_inf_grid_dependent: bool = False

    CSV_HEADER = tuple(f.name for f in fields(TraceRecord))

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def ratios(self):
        """Per-step ``I_inf`` ratios ``I_n / I_{n-1}`` for ``n >= 1``."""
        i = self.column("i_inf")
        with np.errstate(divide="ignore", invalid="ignore"):
            return i[1:] / i[:-1]

    def csv_rows(self):
        return [list(astuple(r)) for r in self.records]

    def __len__(self):
        return len(self.records)


def perturbation_profile(mode):
    """``(phi, sup |phi'|)`` for the two admissible perturbation shapes.

    ``sine``: ``phi = sin x``. ``tanh-shift``: ``phi = (x + log cosh x)/2`` whose
    derivative ``(1 + tanh x)/2`` runs from 0 to 1, so ``exp(-eps*phi)`` tilts
    the mass to one side.
    """
    if mode == "sine":
        return np.sin, 1.0
    if mode == "tanh-shift":
        def phi(x):
            return 0.5 * (x + np.logaddexp(x, -x) - np.log(2.0))
        return phi, 1.0
    raise ValueError(f"unknown perturbation mode {mode!r} (expected 'sine' or 'tanh-shift')")


def make_admissible_initial(vbar, epsilon, mode="sine"):
    """``F0 = Fbar * exp(-eps * phi)`` renormalized; ``||(log F0/Fbar)'|| = |eps|``."""
    if abs(epsilon) > 1:
        raise ValueError(f"|epsilon| must be at most 1, got {epsilon}")
    phi, _ = perturbation_profile(mode)
    with np.errstate(invalid="ignore"):
        v = np.where(vbar.finite, vbar.v + epsilon * phi(vbar.x), np.inf)
    return LogDensity(vbar.grid, v).normalize()


def _quiet_fisher_infinity(p, q):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridDependentWarning)
        return fisher_infinity(p, q, return_flag=True)


def _iterate(step, f0, reference, generations):
    ref = reference.profile
    f = f0.normalize()
    log_mass = f0.log_mass()
    i0, flag = _quiet_fisher_infinity(f, ref)
    records = [TraceRecord(0, float(np.exp(log_mass)), np.nan, i0, kl_divergence(f, ref),
                           estimate_log_concavity(f))]
    for n in range(1, generations + 1):
        g = step(f)
        lm = g.log_mass()
        log_mass += lm
        f = g.shift_log(lm)
        i_n, fl = _quiet_fisher_infinity(f, ref)
        flag |= fl
        records.append(TraceRecord(n, float(np.exp(log_mass)), float(np.exp(lm)), i_n,
                                   kl_divergence(f, ref), estimate_log_concavity(f)))
    return RunTrace(records, bool(flag))


def contraction_run(m, f0, reference, generations, trunc=None):
    """Iterate ``T`` from ``f0`` and track ``I_inf``, KL against ``reference``.

    ``reference`` must be an eigenpair computed on ``f0``'s grid.
    """
    if reference.profile.grid != f0.grid:
        raise ValueError("reference eigenpair must live on the run's grid")
    return _iterate(lambda f: apply_T(f, m, trunc), f0, reference, generations)


def linear_operator_run(m, f0, reference, generations):
    """Iterate the single-parent operator ``A``; ``reference`` is its eigenpair.

    The empirical contraction ``kappa_hat`` is ``max(trace.ratios())``.
    """
    if reference.profile.grid != f0.grid:
        raise ValueError("reference eigenpair must live on the run's grid")
    return _iterate(lambda f: apply_A(f, m), f0, reference, generations)


@dataclass
class CauchyTrace:
    """Consecutive-step ``I_inf(F_n || F_{n-1})`` with the predicted ratio bound."""

    step_i_inf: np.ndarray   # index n-1 holds I_inf(F_n || F_{n-1}), n >= 1
    alpha_seq: np.ndarray    # alpha_0, alpha_1, ... from the log-concavity recurrence
    ratios: np.ndarray       # index k holds the ratio for n = k + 2
    bounds: np.ndarray       # 2 / (1 + 2 alpha_{n-2})

    def excess(self):
        return self.ratios - self.bounds


def cauchy_run(m, f0, trunc, generations, alpha0=None):
    """Track ``I_inf(F_n || F_{n-1})`` on a (possibly truncated) run.

    The ratio for step ``n >= 2`` is compared against ``2/(1 + 2 alpha_{n-2})``
    where ``alpha_{k+1} = beta + 2 alpha_k/(1 + 2 alpha_k)``.
    """
    if not isinstance(m, SelectionSpec):
        raise TypeError("cauchy_run needs a SelectionSpec (beta drives the bound)")
    f = f0.truncate(trunc.R) if trunc is not None else f0
    f = f.normalize()
    a = estimate_log_concavity(f) if alpha0 is None else float(alpha0)
    if not a > 0:
        raise ValueError(f"initial density must be strongly log-concave (estimate {a:.3g})")
    alphas = [a]
    steps = []
    for _ in range(generations):
        g = apply_T(f, m, trunc)
        g = g.shift_log(g.log_mass())
        steps.append(_quiet_fisher_infinity(g, f)[0])
        alphas.append(log_concavity_update(alphas[-1], m.beta))
        f = g
    steps = np.array(steps)
    alphas = np.array(alphas)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = steps[1:] / steps[:-1]
    bounds = 2.0 / (1.0 + 2.0 * alphas[: ratios.size])
    return CauchyTrace(steps, alphas, ratios, bounds)


def _window_slope(y, lo, hi):
    n = np.arange(y.size)
    sel = np.isfinite(y) & (y > lo) & (y < hi)
    if sel.sum() < 3:
        raise ValueError("decay outside fit window")
    slope, _ = np.polyfit(n[sel], np.log(y[sel]), 1)
    return float(slope)


def growth_rate_fit(trace, reference, window=(1e-11, 1e-2)):
    """Least-squares log-slopes of ``|lambda_n - lambda|`` and of ``KL_n``.

    Only points with values inside ``window`` enter each fit.
    """
    if len(trace) < 10:
        raise ValueError("trace too short for a rate fit (need >= 10 generations)")
    gap = np.abs(trace.column("lambda_n") - reference.lam)
    kl = trace.column("kl")
    return _window_slope(gap, *window), _window_slope(kl, *window)


# ---------------------------------------------------------------- lower bounds


@dataclass(frozen=True)
class PolynomialPotential:
    """``V(x) = sum_k coeffs[k] x**k + log Z`` normalized so ``e^{-V}`` has mass 1."""

    coeffs: tuple
    span: float = 14.0
    n: int = 28001

    def raw(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def grid(self):
        return Grid1D.symmetric(self.span, self.n)

    @cached_property
    def log_normalizer(self):
        g = self.grid()
        return float(logsumexp(trapezoid_log_weights(g) - self.raw(g.x)))

    def __call__(self, x):
        return self.raw(x) + self.log_normalizer

    def derivative(self, x):
        return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(self.coeffs))

    def convexity(self):
        """Minimum of ``V''`` on the quadrature grid."""
        d2 = np.polynomial.polynomial.polyder(self.coeffs, 2)
        return float(np.min(np.polynomial.polynomial.polyval(self.grid().x, d2)))


@dataclass
class LowerBoundRow:
    x0: float
    delta: float
    log_lhs: float
    log_rhs: float
    upper_limit: float
    truncation: float
    passed: bool


def _log_gauss(x):
    return -0.5 * x * x - 0.5 * np.log(2.0 * np.pi)


def _log_exp_square_integral(c, L):
    """``log of int_0^L exp(c z^2 / 2) dz`` by quadrature of a rescaled integrand."""
    if L <= 0:
        return -np.inf
    # exp(c (z^2 - L^2)/2) is at most 1 on [0, L]
    val, _ = quad(lambda z: np.exp(0.5 * c * (z * z - L * L)), 0.0, L,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return 0.5 * c * L * L + np.log(val)


def _upper_limit(x0, delta, gamma, form):
    if form == "proof":
        return gamma * x0 / (gamma + 1) - (gamma + 2) * delta / (gamma + 1)
    if form == "statement":
        return gamma * x0 / (gamma + 1) - delta / (gamma + 1)
    raise ValueError(f"unknown upper-limit form {form!r}")


def lower_bound_check(potential, gamma, samples, R=None, upper_limit="proof", rtol=1e-6):
    """Gaussian-convolution lower bound for a ``gamma``-log-concave density.

    For each ``(x0, delta)`` compares ``(G * f)(x0 + delta)`` (grid quadrature)
    with ``G(2 delta) f(x0 - delta) int_0^L exp((gamma+1) z^2/2) dz``. ``L`` is
    ``gamma x0/(gamma+1) - (gamma+2) delta/(gamma+1)`` for ``upper_limit="proof"``
    and ``gamma x0/(gamma+1) - delta/(gamma+1)`` for ``"statement"``. With ``R``
    the density is cut to ``[-R, R]`` (not renormalized).
    """
    if abs(potential.derivative(0.0)) > 1e-12:
        raise ValueError("precondition failed: V'(0) = 0")
    if potential.convexity() < gamma - 1e-12:
        raise ValueError(f"precondition failed: V is not {gamma}-convex")
    g = potential.grid()
    y = g.x
    logw = trapezoid_log_weights(g)
    Vy = potential(y)
    if R is not None:
        Vy = np.where(np.abs(y) <= R, Vy, np.inf)
    rows = []
    for x0, delta in samples:
        if not delta > 0:
            raise ValueError("precondition failed: delta > 0")
        if not x0 > (gamma + 2) / gamma * delta:
            raise ValueError(
                f"precondition failed: x0 > (gamma+2)/gamma * delta ({x0} vs {(gamma + 2) / gamma * delta})"
            )
        if R is not None:
            if not R > 2 * delta / gamma:
                raise ValueError(f"precondition failed: R > 2 delta/gamma ({R} vs {2 * delta / gamma})")
            if not x0 < R + delta:
                raise ValueError(f"precondition failed: x0 < R + delta ({x0} vs {R + delta})")
        xp, xm = x0 + delta, x0 - delta
        log_lhs = float(logsumexp(logw + _log_gauss(xp - y) - Vy))
        L = _upper_limit(x0, delta, gamma, upper_limit)
        log_f = -float(potential(np.array([xm]))[0])
        log_rhs = _log_gauss(2 * delta) + log_f + _log_exp_square_integral(gamma + 1, L)
        passed = log_lhs >= log_rhs + np.log1p(-rtol)
        rows.append(LowerBoundRow(float(x0), float(delta), log_lhs, float(log_rhs), float(L),
                                  np.nan if R is None else float(R), bool(passed)))
    return rows
