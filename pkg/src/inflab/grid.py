"""Uniform 1-D grids and densities stored as negative logs.

A density ``F`` is carried as ``v = -log F`` sampled on a :class:`Grid1D`.
``+inf`` entries encode ``F = 0`` (hard truncation); linear-space values are
only formed inside log-sum-exp reductions.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "Grid2D",
    "LogDensity",
    "EmptyDensityError",
    "default_grid",
    "trapezoid_log_weights",
    "logsumexp",
    "trapezoid_mass",
    "finite_region",
    "log_derivative",
    "second_log_derivative",
    "logsumexp_convolve",
]


class EmptyDensityError(ValueError):
    """Raised when a density has no finite entry (zero everywhere)."""


@dataclass(frozen=True)
class Grid1D:
    left: float
    right: float
    n: int

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError(f"grid needs left < right, got [{self.left}, {self.right}]")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs at least 8 nodes, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "left", float(self.left))
        object.__setattr__(self, "right", float(self.right))

    @classmethod
    def symmetric(cls, L, n):
        return cls(-float(L), float(L), n)

    @property
    def h(self):
        return (self.right - self.left) / (self.n - 1)

    @property
    def x(self):
        return self.left + self.h * np.arange(self.n)

    @property
    def is_symmetric(self):
        return self.left == -self.right

    def index_of(self, value, atol=1e-9):
        """Index of the node equal to ``value``; raises if ``value`` is off-grid."""
        k = (value - self.left) / self.h
        i = int(round(k))
        if abs(k - i) > atol or not 0 <= i < self.n:
            raise ValueError(f"{value} is not a node of {self}")
        return i

    def zero_index(self):
        if not self.is_symmetric or self.n % 2 == 0:
            raise ValueError("grid must be symmetric with an odd node count so 0 is a node")
        return self.n // 2

    def same_step(self, other, rtol=1e-12):
        return abs(self.h - other.h) <= rtol * max(self.h, other.h)


@dataclass(frozen=True)
class Grid2D:
    """Product grid for the parental traits (x1, x2)."""

    gx: Grid1D
    gy: Grid1D

    @property
    def shape(self):
        return (self.gx.n, self.gy.n)

    @property
    def cell_area(self):
        return self.gx.h * self.gy.h

    def mesh(self):
        return np.meshgrid(self.gx.x, self.gy.x, indexing="ij")


def default_grid(alpha_expected=1.0, n=2049):
    """Symmetric grid ``[-L, L]`` with ``L = max(10, 8/sqrt(alpha))``."""
    L = max(10.0, 8.0 / np.sqrt(alpha_expected))
    return Grid1D.symmetric(L, n)


def trapezoid_log_weights(grid):
    w = np.full(grid.n, np.log(grid.h))
    w[0] = w[-1] = np.log(grid.h / 2)
    return w


def logsumexp(a, axis=None):
    """Max-shifted log-sum-exp that returns ``-inf`` for all ``-inf`` slices."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(s.reshape(()))
    return np.squeeze(s, axis=axis)


@dataclass(frozen=True, eq=False)
class LogDensity:
    """A nonnegative function ``F = exp(-v)`` on a uniform grid."""

    grid: Grid1D
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"v has shape {v.shape}, grid has {self.grid.n} nodes")
        if np.any(np.isnan(v)) or np.any(v == -np.inf):
            raise ValueError("v must be real or +inf")
        v.flags.writeable = False
        object.__setattr__(self, "v", v)

    @classmethod
    def from_function(cls, grid, potential):
        return cls(grid, potential(grid.x))

    @classmethod
    def from_density(cls, grid, F):
        F = np.asarray(F, dtype=float)
        with np.errstate(divide="ignore"):
            return cls(grid, -np.log(F))

    @property
    def x(self):
        return self.grid.x

    @property
    def finite(self):
        return np.isfinite(self.v)

    def density(self):
        return np.exp(-self.v)

    def log_mass(self):
        if not self.finite.any():
            raise EmptyDensityError("empty density")
        return logsumexp(trapezoid_log_weights(self.grid) - self.v)

    def mass(self):
        return trapezoid_mass(self)

    def normalize(self):
        return LogDensity(self.grid, self.v + self.log_mass())

    def shift_log(self, c):
        """Multiply the density by ``exp(-c)``."""
        return LogDensity(self.grid, self.v + c)

    def truncate(self, R):
        v = np.where(np.abs(self.x) <= R + 1e-12 * self.grid.h, self.v, np.inf)
        return LogDensity(self.grid, v)


def trapezoid_mass(f):
    """Trapezoidal ``∫F dx`` accumulated in log space."""
    return float(np.exp(f.log_mass()))


def finite_region(f):
    """Slice of the single contiguous run of finite nodes."""
    idx = np.flatnonzero(f.finite)
    if idx.size == 0:
        raise EmptyDensityError("empty density")
    if idx[-1] - idx[0] + 1 != idx.size:
        raise ValueError("finite nodes do not form a contiguous region")
    return slice(idx[0], idx[-1] + 1)


def _region_values(f):
    sl = finite_region(f)
    v = f.v[sl]
    if v.size < 3:
        raise ValueError("need at least 3 finite nodes for a derivative")
    return sl, v


def log_derivative(f):
    """``d/dx log F = -V'`` on the finite region.

    Central differences inside, second-order one-sided stencils at the two ends.
    """
    _, v = _region_values(f)
    return -np.gradient(v, f.grid.h, edge_order=2)


def second_log_derivative(f):
    """``V''`` on the finite region by the 3-point stencil.

    The end nodes reuse the stencil of their inner neighbour.
    """
    _, v = _region_values(f)
    d2 = np.empty_like(v)
    d2[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / f.grid.h**2
    d2[0] = d2[1]
    d2[-1] = d2[-2]
    return d2


def _lse_rows(build_row_block, n_rows, chunk=256):
    out = np.empty(n_rows)
    for start in range(0, n_rows, chunk):
        stop = min(n_rows, start + chunk)
        out[start:stop] = logsumexp(build_row_block(start, stop), axis=1)
    return out


def logsumexp_convolve(f, g, out):
    """Convolution ``(f*g)(x_k) = ∫ f(x_k - y) g(y) dy`` in log space.

    ``y`` runs over ``g``'s nodes with trapezoid weights; ``x_k - y`` must land
    on ``f``'s nodes, so all three grids share one step and are aligned.
    Points falling outside ``f.grid`` count as ``F = 0``.
    """
    h = g.grid.h
    if not (f.grid.same_step(g.grid) and out.same_step(g.grid)):
        raise ValueError("convolution grids must share the same step h")
    offset = (out.left - g.grid.left - f.grid.left) / h
    base = int(round(offset))
    if abs(offset - base) > 1e-6:
        raise ValueError("convolution grids are not aligned on a common lattice")

    # f-index of out_k - g_j is base + k - j
    ng = g.grid.n
    nf = f.grid.n
    j = np.arange(ng)
    gterm = trapezoid_log_weights(g.grid) - g.v
    fv = f.v

    def rows(start, stop):
        k = np.arange(start, stop)[:, None]
        idx = base + k - j[None, :]
        inside = (idx >= 0) & (idx < nf)
        vals = -fv[np.clip(idx, 0, nf - 1)]
        return np.where(inside, vals + gterm[None, :], -np.inf)

    return LogDensity(out, -_lse_rows(rows, out.n))
