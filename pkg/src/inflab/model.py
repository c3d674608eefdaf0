"""Selection functions and the infinitesimal-model operators.

    B[F](x) = ∬ G(x - (x1+x2)/2) F(x1) F(x2) / ||F|| dx1 dx2
    T[F]    = exp(-m) B[F]
    A[F]    = exp(-m) (G * F)          (single-parent, linear)

``B`` is evaluated as ``G * H / ||F||`` where ``H(s) = 2∫F(2s-y)F(y)dy`` is the
density of the parental mid-trait; on a uniform grid ``2s - y`` is again a node,
so no interpolation enters the double convolution.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .grid import (
    Grid1D,
    LogDensity,
    _lse_rows,
    logsumexp_convolve,
    trapezoid_log_weights,
)

__all__ = [
    "SelectionError",
    "SelectionSpec",
    "TruncationSpec",
    "gaussian_kernel",
    "midpoint_density",
    "apply_B",
    "apply_T",
    "apply_A",
    "log_concavity_update",
    "resample",
]

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class SelectionError(ValueError):
    """The selection function violates strong convexity or normalization."""


@dataclass(frozen=True)
class SelectionSpec:
    """Mortality function ``m`` with a certified convexity modulus ``beta``.

    Build instances with :meth:`quadratic`, :meth:`even_polynomial` or
    :meth:`tabulated`; ``kind`` selects how :meth:`values` evaluates ``m``.
    """

    kind: str
    beta: float
    coeffs: tuple = ()
    table_x: tuple = ()
    table_m: tuple = ()
    minimizer_residual: float = 0.0
    _interp: object = field(default=None, repr=False, compare=False)

    @classmethod
    def quadratic(cls, beta):
        if not beta > 0:
            raise SelectionError(f"H1 violated: beta must be positive, got {beta}")
        return cls("quadratic", float(beta))

    @classmethod
    def even_polynomial(cls, coeffs, beta=None, grid=None):
        """``m(x) = sum_k coeffs[k] x**k`` with only even powers.

        ``beta`` defaults to ``min m''`` over ``grid`` (or ``2*coeffs[2]`` when
        no grid is given); a declared ``beta`` is checked against that minimum.
        """
        c = tuple(float(a) for a in coeffs)
        if any(c[k] != 0.0 for k in range(1, len(c), 2)):
            raise SelectionError("even_polynomial needs zero odd coefficients")
        if c and c[0] != 0.0:
            raise SelectionError("H2 violated: m(0) must be 0")
        if any(a < 0 for a in c[4:]):
            # negative higher coefficients make m eventually concave
            raise SelectionError("H1 violated: negative leading coefficients")
        spec = cls("even_polynomial", np.nan, coeffs=c)
        x = grid.x if grid is not None else np.zeros(1)
        certified = float(np.min(spec.second_derivative(x)))
        if beta is None:
            beta = certified
        elif beta > certified + 1e-12:
            raise SelectionError(
                f"H1 violated: declared beta={beta} exceeds min m''={certified:.6g}"
            )
        if not beta > 0:
            raise SelectionError(f"H1 violated: beta={beta} is not positive")
        return cls("even_polynomial", float(beta), coeffs=c)

    @classmethod
    def tabulated(cls, x, m, beta=None):
        """Selection from samples ``m(x)`` on a uniform table.

        The table is translated by its argmin node and lowered to ``min m = 0``.
        Between nodes ``m`` is a not-a-knot cubic spline (C², so ``m''`` exists).
        ``beta`` is the smallest interior second difference minus ``2h²``.
        """
        x = np.asarray(x, dtype=float)
        m = np.asarray(m, dtype=float)
        if x.ndim != 1 or x.shape != m.shape or x.size < 5:
            raise SelectionError("tabulated selection needs matching 1-D arrays (>= 5 points)")
        h = x[1] - x[0]
        if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
            raise SelectionError("tabulated selection must be on a uniform table")
        d2 = (m[:-2] - 2 * m[1:-1] + m[2:]) / h**2
        certified = float(d2.min() - 2 * h**2)
        if beta is None:
            beta = certified
        elif beta > certified + 1e-12:
            raise SelectionError(
                f"H1 violated: declared beta={beta} exceeds certified {certified:.6g}"
            )
        if not beta > 0:
            raise SelectionError(f"H1 violated: certified beta={certified:.6g} <= 0")
        i = int(np.argmin(m))
        residual = 0.0
        if 0 < i < m.size - 1:
            # vertex of the parabola through the three nodes around the minimum
            denom = m[i - 1] - 2 * m[i] + m[i + 1]
            residual = 0.5 * h * (m[i - 1] - m[i + 1]) / denom
        x_shift = x - x[i]
        m_shift = m - m[i]
        return cls(
            "tabulated",
            float(beta),
            table_x=tuple(x_shift),
            table_m=tuple(m_shift),
            minimizer_residual=float(residual),
            _interp=CubicSpline(x_shift, m_shift, extrapolate=False),
        )

    def values(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * self.beta * x**2
        if self.kind == "even_polynomial":
            return np.polynomial.polynomial.polyval(x, self.coeffs)
        if self.kind == "tabulated":
            out = self._interp(x)
            return np.where(np.isnan(out), np.inf, out)
        raise SelectionError(f"unknown selection kind {self.kind!r}")

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return np.full_like(x, self.beta)
        if self.kind == "even_polynomial":
            d2 = np.polynomial.polynomial.polyder(self.coeffs, 2) if len(self.coeffs) > 2 else [0.0]
            return np.polynomial.polynomial.polyval(x, d2) + 0.0 * x
        if self.kind == "tabulated":
            return self._interp.derivative(2)(x)
        raise SelectionError(f"unknown selection kind {self.kind!r}")

    def certify(self, grid, tol=None):
        """Check ``m'' >= beta`` and ``min m = m(0) = 0`` on the nodes of ``grid``."""
        x = grid.x
        m = self.values(x)
        finite = np.isfinite(m)
        mf = m[finite]
        if tol is None:
            tol = 10 * grid.h**2
        d2 = (mf[:-2] - 2 * mf[1:-1] + mf[2:]) / grid.h**2
        if d2.size and d2.min() < self.beta - tol * max(1.0, self.beta):
            raise SelectionError(
                f"H1 violated on grid: min second difference {d2.min():.6g} < beta={self.beta}"
            )
        i = int(np.argmin(mf))
        if abs(x[finite][i]) > grid.h * (1 + 1e-9) or mf[i] < -1e-12:
            raise SelectionError("H2 violated: minimum of m is not 0 at x=0")
        return True


@dataclass(frozen=True)
class TruncationSpec:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"truncation radius must be positive, got {self.R}")

    def check(self, grid):
        grid.index_of(self.R)
        grid.index_of(-self.R)


def gaussian_kernel(grid):
    """Standard normal ``G`` as a :class:`LogDensity`."""
    x = grid.x
    return LogDensity(grid, 0.5 * x**2 + LOG_SQRT_2PI)


@lru_cache(maxsize=16)
def _difference_kernel(grid):
    # G sampled on every difference x_k - x_j of the grid
    span = grid.right - grid.left
    return gaussian_kernel(Grid1D(-span, span, 2 * grid.n - 1))


def _selection_values(m, grid):
    if m is None:
        return np.zeros(grid.n)
    if isinstance(m, SelectionSpec):
        return m.values(grid.x)
    m = np.asarray(m, dtype=float)
    if m.shape != (grid.n,):
        raise ValueError("selection array does not match the grid")
    return m


def _require_mass(f):
    if not f.finite.any():
        raise ValueError("zero mass: density vanishes identically")
    lm = f.log_mass()
    if not np.isfinite(lm):
        raise ValueError("zero mass: density vanishes identically")
    return lm


def midpoint_density(f):
    """Density of ``(X1 + X2)/2`` for ``X1, X2 ~ F`` i.i.d. (unnormalized).

    Returns ``H(s) = 2∫F(2s - y)F(y)dy`` on ``f.grid``; ``||H|| = ||F||²``.
    """
    g = f.grid
    if not g.is_symmetric:
        raise ValueError("midpoint_density needs a symmetric grid")
    g.zero_index()
    n = g.n
    j = np.arange(n)
    fterm = trapezoid_log_weights(g) - f.v
    negv = -f.v
    log2 = np.log(2.0)

    def rows(start, stop):
        k = 2 * np.arange(start, stop)[:, None] - j[None, :]
        inside = (k >= 0) & (k < n)
        vals = negv[np.clip(k, 0, n - 1)] + fterm[None, :]
        return np.where(inside, vals, -np.inf)

    return LogDensity(g, -(_lse_rows(rows, n) + log2))


def apply_B(f):
    """Recombination operator; preserves mass."""
    lm = _require_mass(f)
    mid = midpoint_density(f).shift_log(lm)
    return logsumexp_convolve(_difference_kernel(f.grid), mid, f.grid)


def apply_T(f, m, trunc=None):
    """One generation ``exp(-m) B[f]``; ``m=None`` means no selection.

    With ``trunc`` the result is set to zero outside ``[-R, R]``.
    """
    b = apply_B(f)
    v = b.v + _selection_values(m, f.grid)
    if trunc is not None:
        trunc.check(f.grid)
        v = np.where(np.abs(f.grid.x) <= trunc.R + 1e-9 * f.grid.h, v, np.inf)
    return LogDensity(f.grid, v)


def apply_A(f, m):
    """Linear single-parent operator ``exp(-m) (G * f)``."""
    _require_mass(f)
    conv = logsumexp_convolve(_difference_kernel(f.grid), f, f.grid)
    return LogDensity(f.grid, conv.v + _selection_values(m, f.grid))


def log_concavity_update(gamma, beta):
    """Log-concavity of ``T[F]`` when ``F`` is ``gamma``-log-concave."""
    if not (gamma > 0 and beta > 0):
        raise ValueError("gamma and beta must be positive")
    # 2g/(1+2g) written to stay finite at gamma = inf
    return beta + 1.0 / (1.0 + 0.5 / gamma)


def resample(f, grid):
    """Move ``f`` onto ``grid`` by monotone cubic interpolation of ``V``."""
    fin = f.finite
    interp = PchipInterpolator(f.x[fin], f.v[fin], extrapolate=False)
    v = interp(grid.x)
    return LogDensity(grid, np.where(np.isnan(v), np.inf, v))
