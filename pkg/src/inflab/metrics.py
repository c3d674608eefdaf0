"""Functionals comparing grid densities.

Sup-type quantities are taken over the *support region*: nodes where both
densities exceed ``exp(-60)`` times their own maximum. Tail nodes below that
level carry only quadrature noise.
"""

import warnings
from dataclasses import dataclass, astuple, fields

import numpy as np

from .grid import second_log_derivative, finite_region, trapezoid_log_weights

__all__ = [
    "GridDependentWarning",
    "DivergenceReport",
    "LSIReport",
    "support_region",
    "fisher_infinity",
    "fisher_two",
    "kl_divergence",
    "hilbert_metric",
    "estimate_log_concavity",
    "moments",
    "lsi_chain_check",
    "divergence_report",
]

SUPPORT_CUT = 60.0


class GridDependentWarning(UserWarning):
    """The sup of the log-ratio derivative grows toward the grid boundary."""


def _check_same_grid(p, q):
    if p.grid != q.grid:
        raise ValueError("densities must live on the same grid")


def support_region(p, q, cut=SUPPORT_CUT):
    """Slice of nodes where both ``p`` and ``q`` are above ``exp(-cut)·max``."""
    _check_same_grid(p, q)
    keep = np.ones(p.grid.n, dtype=bool)
    for f in (p, q):
        fin = f.finite
        if not fin.any():
            raise ValueError("disjoint supports: a density is identically zero")
        keep &= fin & (f.v - f.v[fin].min() <= cut)
    idx = np.flatnonzero(keep)
    if idx.size < 3:
        raise ValueError("disjoint supports: fewer than 3 common nodes")
    # log-concave inputs give a single run; otherwise take the widest one
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = np.split(idx, breaks + 1)
    run = max(runs, key=len)
    return slice(run[0], run[-1] + 1)


def _log_ratio(p, q, sl):
    # log(p/q) = vq - vp
    return q.v[sl] - p.v[sl]


def _log_ratio_derivative(p, q, sl):
    return np.gradient(_log_ratio(p, q, sl), p.grid.h, edge_order=2)


def _edge_dominated(d, frac=0.05, rtol=1e-3):
    k = max(2, int(frac * d.size))
    inner = np.max(np.abs(d[k:-k])) if d.size > 2 * k else 0.0
    outer = max(np.max(np.abs(d[:k])), np.max(np.abs(d[-k:])))
    return outer > inner * (1 + rtol) + 1e-12


def fisher_infinity(p, q, *, return_flag=False):
    """``sup |d/dx log(p/q)|`` over the support region.

    If the sup sits at the region's edge and exceeds every interior value, the
    true sup over ℝ is likely infinite; a :class:`GridDependentWarning` is
    emitted (and the flag returned when ``return_flag`` is set).
    """
    sl = support_region(p, q)
    d = _log_ratio_derivative(p, q, sl)
    value = float(np.max(np.abs(d)))
    flag = bool(_edge_dominated(d))
    if flag:
        warnings.warn(
            "I_inf attained at the grid edge: value is grid-dependent (sup = inf)",
            GridDependentWarning,
            stacklevel=2,
        )
    if return_flag:
        return value, flag
    return value


def fisher_two(p, q):
    """``∫ |d/dx log(p/q)|² p dx`` with ``p`` normalized."""
    sl = support_region(p, q)
    d = _log_ratio_derivative(p, q, sl)
    pn = p.normalize()
    w = p.grid.h * np.exp(-pn.v[sl])
    w[[0, -1]] *= 0.5
    return float(np.sum(w * d**2))


def kl_divergence(p, q):
    """Relative entropy ``∫ log(p/q) p dx`` of the normalized densities.

    Uses the nonnegative integrand ``p (r + expm1(-r))``, ``r = log p/q``,
    which avoids cancellation when ``p ≈ q``.
    """
    _check_same_grid(p, q)
    pn, qn = p.normalize(), q.normalize()
    pos = pn.finite
    if np.any(pos & ~qn.finite):
        raise ValueError("absolute continuity violated: p > 0 where q = 0")
    lw = trapezoid_log_weights(p.grid)[pos]
    r = qn.v[pos] - pn.v[pos]
    pw = np.exp(lw - pn.v[pos])
    core = float(np.sum(pw * (r + np.expm1(-r))))
    # ∫(p - q) over supp p is 0 unless q carries mass where p vanishes
    q_on = float(np.sum(np.exp(lw - qn.v[pos])))
    p_on = float(np.sum(pw))
    return max(core + (p_on - q_on), 0.0)


def hilbert_metric(p, q):
    """Oscillation ``max - min`` of ``log(p/q)`` over the support region."""
    sl = support_region(p, q)
    r = _log_ratio(p, q, sl)
    return float(r.max() - r.min())


def _mass_region(f, level=0.99):
    fn = f.normalize()
    dens = np.where(fn.finite, np.exp(-fn.v), 0.0)
    h = f.grid.h
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * h * (dens[1:] + dens[:-1]))])
    tail = 0.5 * (1 - level)
    lo = int(np.searchsorted(cdf, tail, side="left"))
    hi = int(np.searchsorted(cdf, 1 - tail, side="left"))
    return max(lo - 1, 0), min(hi, f.grid.n - 1)


def estimate_log_concavity(f, level=0.99):
    """Smallest second difference of ``V`` over the central ``level`` mass."""
    sl = finite_region(f)
    if sl.stop - sl.start < 5:
        raise ValueError("need at least 5 finite nodes to estimate log-concavity")
    d2 = second_log_derivative(f)
    lo, hi = _mass_region(f, level)
    # interior stencils only: skip the ends of the finite run
    lo = max(lo, sl.start + 1)
    hi = min(hi, sl.stop - 2)
    if hi < lo:
        raise ValueError("mass region too narrow for a second difference")
    return float(np.min(d2[lo - sl.start: hi - sl.start + 1]))


def moments(f):
    """``(mass, mean, variance)`` by trapezoid quadrature."""
    lw = trapezoid_log_weights(f.grid) - f.v
    mass = f.mass()
    w = np.exp(lw - f.log_mass())
    x = f.x
    mean = float(np.sum(w * x))
    var = float(np.sum(w * (x - mean) ** 2))
    return mass, mean, var


@dataclass
class LSIReport:
    kl: float
    i_two_term: float
    i_inf_term: float
    gamma: float
    passed: bool


def lsi_chain_check(p, q, gamma, slack=1e-8, certify_tol=None):
    """Check ``KL(p||q) <= I_2/(2γ) <= I_inf²/(2γ)`` for a γ-log-concave ``q``."""
    if certify_tol is None:
        certify_tol = 10 * q.grid.h**2
    est = estimate_log_concavity(q)
    if est < gamma - certify_tol:
        raise ValueError(f"reference is not {gamma}-log-concave (estimate {est:.6g})")
    kl = kl_divergence(p, q)
    i2 = fisher_two(p, q) / (2 * gamma)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridDependentWarning)
        iinf = fisher_infinity(p, q) ** 2 / (2 * gamma)
    passed = kl <= i2 + slack and i2 <= iinf + slack
    return LSIReport(kl, i2, iinf, gamma, bool(passed))


@dataclass
class DivergenceReport:
    i_inf: float
    i_two: float
    kl: float
    hilbert: float
    support_left: float
    support_right: float
    i_inf_grid_dependent: bool = False

    @classmethod
    def csv_header(cls):
        return [f.name for f in fields(cls)]

    def csv_row(self):
        return list(astuple(self))


def divergence_report(p, q):
    sl = support_region(p, q)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridDependentWarning)
        i_inf, flag = fisher_infinity(p, q, return_flag=True)
    x = p.x
    return DivergenceReport(
        i_inf=i_inf,
        i_two=fisher_two(p, q),
        kl=kl_divergence(p, q),
        hilbert=hilbert_metric(p, q),
        support_left=float(x[sl.start]),
        support_right=float(x[sl.stop - 1]),
        i_inf_grid_dependent=flag,
    )
