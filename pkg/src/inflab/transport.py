"""Discrete optimal transport with mixed ground norms, and the two-parent kernel.

Distances follow ``W_{p,q}``: transport cost ``||z - z'||_q ** p`` averaged
over a coupling, ``p``-th root taken; ``p = inf`` is the bottleneck (largest
displacement on the coupling's support). Masses are integerized to multiples
of ``1/SCALE`` so every solver works on exact integer flows.
"""

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from ._parallel import ordered_map
from .grid import Grid1D, Grid2D, log_derivative, logsumexp

# POT probes every installed array backend on import; only numpy is used here
for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

__all__ = [
    "SCALE",
    "DiscreteMeasure",
    "Kernel2D",
    "TransportReport",
    "integerize",
    "ground_cost",
    "build_transition_kernel",
    "wpq_lp",
    "bottleneck_winf",
    "w22_plan_displacement",
    "quantize_kernels",
    "verify_kernel_contraction",
    "l2_rate_comparison",
    "rates_from_alpha",
    "sample_test_functions",
    "TestFunction",
    "duality_check",
    "log_estimate_check",
]

SCALE = 10**9
KERNEL_CUT = 40.0


def _dual_exponent(q):
    if q == 1:
        return np.inf
    if q == np.inf:
        return 1.0
    return q / (q - 1.0)


def _qname(q):
    return "inf" if q == np.inf else str(int(q))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud in ``R^d`` with ``d`` in {1, 2}; weights sum to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (1, 2) or pts.shape[0] != w.shape[0]:
            raise ValueError("points must be (k, d) with d in {1, 2}, one weight per point")
        if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(pts)):
            raise ValueError("weights must be nonnegative and points finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_unnormalized(cls, points, weights):
        w = np.asarray(weights, dtype=float)
        return cls(points, w / w.sum())

    @classmethod
    def dirac(cls, point):
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def translate(self, shift):
        return DiscreteMeasure(self.points + np.asarray(shift, dtype=float), self.weights)


def integerize(weights, scale=SCALE):
    """Integer masses summing to ``scale`` by largest-remainder rounding."""
    w = np.asarray(weights, dtype=float)
    raw = w / w.sum() * scale
    base = np.floor(raw).astype(np.int64)
    short = int(scale - base.sum())
    if short:
        # stable order keeps ties deterministic
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def ground_cost(x, y, q):
    """Matrix of ``||x_i - y_j||_q``."""
    diff = x[:, None, :] - y[None, :, :]
    if q == np.inf:
        return np.max(np.abs(diff), axis=2)
    if q == 1:
        return np.sum(np.abs(diff), axis=2)
    return np.sum(np.abs(diff) ** q, axis=2) ** (1.0 / q)


@dataclass
class TransportReport:
    value: float
    kind: str
    plan_support_size: int
    max_l1_displacement: float = np.nan
    threshold_certificate: float = np.nan
    below_threshold_flow: float = np.nan
    plan: np.ndarray = field(default=None, repr=False)


def _check_pair(mu, nu, max_support):
    if mu.dim != nu.dim:
        raise ValueError("measures live in different dimensions")
    if max(len(mu), len(nu)) > max_support:
        raise ValueError(
            f"support too large ({len(mu)} x {len(nu)} > {max_support}): use bottleneck/sinkhorn path"
        )


def _exact_plan(a, b, cost):
    # network simplex on integer masses: the optimal vertex is an integer flow
    plan = ot.emd(a.astype(float), b.astype(float), cost, numItermax=10**8)
    return np.rint(plan).astype(np.int64)


def wpq_lp(mu, nu, p, q, max_support=400):
    """Exact ``W_{p,q}`` for ``p`` in {1, 2} by min-cost flow."""
    if p not in (1, 2):
        raise ValueError("wpq_lp handles p in {1, 2}; use bottleneck_winf for p = inf")
    _check_pair(mu, nu, max_support)
    a, b = integerize(mu.weights), integerize(nu.weights)
    dist = ground_cost(mu.points, nu.points, q)
    plan = _exact_plan(a, b, dist**p)
    total = float(np.sum(plan * dist**p)) / SCALE
    support = plan > 0
    l1 = ground_cost(mu.points, nu.points, 1)
    return TransportReport(
        value=total ** (1.0 / p),
        kind=f"W{p}{_qname(q)}",
        plan_support_size=int(support.sum()),
        max_l1_displacement=float(l1[support].max()),
        plan=plan,
    )


def w22_plan_displacement(mu, nu, max_support=400):
    """Exact ``W_{2,2}`` plan and the largest ``l1`` move on its support."""
    rep = wpq_lp(mu, nu, 2, 2, max_support=max_support)
    rep.kind = "W22"
    return rep


def _flow_graph(a, b, mask):
    k, l = mask.shape
    src, sink = 0, k + l + 1
    ii, jj = np.nonzero(mask)
    rows = np.concatenate([np.zeros(k, int), 1 + ii, 1 + k + np.arange(l)])
    cols = np.concatenate([1 + np.arange(k), 1 + k + jj, np.full(l, sink)])
    caps = np.concatenate([a, np.full(ii.size, SCALE), b]).astype(np.int32)
    graph = csr_matrix((caps, (rows, cols)), shape=(sink + 1, sink + 1))
    return graph, src, sink


def _max_flow(a, b, mask):
    graph, s, t = _flow_graph(a, b, mask)
    return maximum_flow(graph, s, t, method="dinic")


def bottleneck_winf(mu, nu, q, max_support=2500):
    """``W_{inf,q}`` as the smallest threshold admitting a full coupling.

    Feasibility at threshold ``t`` is a max-flow on the edges with
    ``||z - z'||_q <= t``; binary search runs over the sorted distinct costs.
    Points whose integerized mass is zero are dropped first.

    Rounding moves each capacity by less than one unit, so the integer max-flow
    is within ``k = #points`` of the exact one. A threshold counts as feasible
    when the flow reaches ``SCALE - k``. Every rejected threshold is then
    infeasible for the true weights, so the value never overshoots.
    """
    _check_pair(mu, nu, max_support)
    a_all, b_all = integerize(mu.weights), integerize(nu.weights)
    ka, kb = a_all > 0, b_all > 0
    a, b = a_all[ka], b_all[kb]
    dist = ground_cost(mu.points[ka], nu.points[kb], q)
    # every point must reach its nearest partner
    floor = max(dist.min(axis=1).max(), dist.min(axis=0).max())
    costs = np.unique(dist)
    cand = costs[costs >= floor]
    need = SCALE - (a.size + b.size)
    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _max_flow(a, b, dist <= cand[mid]).flow_value >= need:
            hi = mid
        else:
            lo = mid + 1
    t = float(cand[lo])
    res = _max_flow(a, b, dist <= t)
    k = a.size
    plan = res.flow.toarray()[1 : k + 1, k + 1 : k + 1 + b.size]
    below = costs[costs < t]
    below_flow = (
        float(_max_flow(a, b, dist <= below[-1]).flow_value) / SCALE if below.size else 0.0
    )
    support = plan > 0
    l1 = ground_cost(mu.points[ka], nu.points[kb], 1)
    return TransportReport(
        value=t,
        kind=f"Winf{_qname(q)}",
        plan_support_size=int(support.sum()),
        max_l1_displacement=float(l1[support].max()),
        threshold_certificate=t,
        below_threshold_flow=below_flow,
        plan=plan,
    )


# ---------------------------------------------------------------- kernels


@dataclass(frozen=True, eq=False)
class Kernel2D:
    """``w = -log P(x; x1, x2)`` on a 2-D grid, normalized by quadrature."""

    x: float
    grid: Grid2D
    w: np.ndarray
    z_log: float


def _potential_function(vbar):
    fin = vbar.finite
    interp = PchipInterpolator(vbar.x[fin], vbar.v[fin], extrapolate=False)

    def V(z):
        out = interp(z)
        return np.where(np.isnan(out), np.inf, out)

    return V


def _kernel_potential(x, V, z1, z2):
    return 0.5 * (x - 0.5 * (z1 + z2)) ** 2 + V(z1) + V(z2)


def _log_weights_2d(grid2):
    lw = []
    for g in (grid2.gx, grid2.gy):
        w = np.full(g.n, np.log(g.h))
        w[[0, -1]] = np.log(0.5 * g.h)
        lw.append(w)
    return lw[0][:, None] + lw[1][None, :]


def build_transition_kernel(x, vbar, grid2):
    """Two-parent transition density for offspring trait ``x``.

    ``w(x1, x2) = (x - (x1+x2)/2)^2 / 2 + Vbar(x1) + Vbar(x2) + z_log``.
    """
    V = _potential_function(vbar)
    z1, z2 = grid2.mesh()
    raw = _kernel_potential(x, V, z1, z2)
    z_log = logsumexp(_log_weights_2d(grid2) - raw)
    if not np.isfinite(z_log):
        raise ValueError("kernel normalization underflow: no finite cell")
    return Kernel2D(float(x), grid2, raw + z_log, float(z_log))


def kernel_grid(vbar, n=401, cut=60.0):
    """Square parental grid covering where ``Vbar - min Vbar <= cut``."""
    fin = vbar.finite
    keep = fin & (vbar.v - vbar.v[fin].min() <= cut)
    xs = vbar.x[keep]
    g = Grid1D(xs.min(), xs.max(), n)
    return Grid2D(g, g)


def quantize_kernels(vbar, xs, quantization, cut=KERNEL_CUT):
    """Cell-center measures of ``P(x; .)`` for each ``x`` on one shared lattice.

    The bounding box covers every cell where some kernel is within ``exp(-cut)``
    of its peak. Cells below ``exp(-cut)`` of a kernel's largest cell are
    dropped and the remaining masses renormalized.

    Returns the measures, the discarded mass fractions and the ``l1`` cell
    diameter.
    """
    V = _potential_function(vbar)
    fine = kernel_grid(vbar)
    z1, z2 = fine.mesh()
    lo1 = lo2 = np.inf
    hi1 = hi2 = -np.inf
    for x in xs:
        w = _kernel_potential(x, V, z1, z2)
        near = w - w.min() <= cut
        lo1, hi1 = min(lo1, z1[near].min()), max(hi1, z1[near].max())
        lo2, hi2 = min(lo2, z2[near].min()), max(hi2, z2[near].max())
    # pad by one fine step so boundary cells are fully inside
    pad = fine.gx.h
    e1 = np.linspace(lo1 - pad, hi1 + pad, quantization + 1)
    e2 = np.linspace(lo2 - pad, hi2 + pad, quantization + 1)
    c1, c2 = np.meshgrid(0.5 * (e1[1:] + e1[:-1]), 0.5 * (e2[1:] + e2[:-1]), indexing="ij")
    pts = np.column_stack([c1.ravel(), c2.ravel()])
    diam = (e1[1] - e1[0]) + (e2[1] - e2[0])
    measures, discarded = [], []
    for x in xs:
        logm = -_kernel_potential(x, V, pts[:, 0], pts[:, 1])
        keep = logm >= logm.max() - cut
        total = logsumexp(logm)
        kept = logsumexp(logm[keep])
        discarded.append(max(0.0, float(-np.expm1(kept - total))))
        measures.append(DiscreteMeasure(pts[keep], np.exp(logm[keep] - kept)))
    return measures, discarded, float(diam)


@dataclass
class ContractionRow:
    x: float
    x_tilde: float
    winf1: float
    ratio: float
    bound: float
    quantization: int
    discarded_mass: float
    passed: bool
    tolerance: float = 0.0
    max_l1_displacement: float = np.nan

    CSV_HEADER = (
        "x", "x_tilde", "winf1", "ratio", "bound", "quantization", "discarded_mass", "pass",
        "tolerance", "max_l1_displacement",
    )

    def csv_row(self):
        return [
            self.x, self.x_tilde, self.winf1, self.ratio, self.bound, self.quantization,
            self.discarded_mass, int(self.passed), self.tolerance, self.max_l1_displacement,
        ]


@dataclass
class KernelContractionReport:
    rho: float
    rows: list

    @property
    def passed(self):
        return all(r.passed for r in self.rows)


def _contraction_row(args):
    x, xt, rho, quantization, vbar, displacement = args
    (m1, m2), disc, diam = quantize_kernels(vbar, [x, xt], quantization)
    tol = 2.0 * diam
    rep = bottleneck_winf(m1, m2, 1)
    gap = abs(x - xt)
    disp = np.nan
    if displacement:
        disp = w22_plan_displacement(m1, m2, max_support=max(len(m1), len(m2))).max_l1_displacement
    if gap == 0:
        return ContractionRow(x, xt, rep.value, 0.0, rho, quantization, max(disc),
                              rep.value <= tol, tol, disp)
    ratio = rep.value / gap
    bound = rho + tol / gap
    return ContractionRow(x, xt, rep.value, ratio, bound, quantization, max(disc),
                          bool(ratio <= bound), tol, disp)


def verify_kernel_contraction(vbar, alpha, x_pairs, quantization=32, displacement=True,
                              workers=None, certify_tol=None):
    """Bottleneck ``W_{inf,1}`` between quantized kernels against ``rho |x - x~|``.

    Each ratio passes if it is at most ``2/(1+2 alpha)`` plus the quantization
    tolerance ``2 * (l1 cell diameter) / |x - x~|``. With ``displacement`` the
    exact ``W_{2,2}`` plan is also solved and its largest ``l1`` move reported.
    """
    from .metrics import estimate_log_concavity

    if certify_tol is None:
        certify_tol = 10 * vbar.grid.h**2
    est = estimate_log_concavity(vbar)
    if est < alpha - certify_tol:
        raise ValueError(f"Vbar is not {alpha}-log-concave (estimate {est:.6g})")
    rho = 2.0 / (1.0 + 2.0 * alpha)
    jobs = [(float(x), float(xt), rho, quantization, vbar, displacement) for x, xt in x_pairs]
    return KernelContractionReport(rho, ordered_map(_contraction_row, jobs, workers))


def rates_from_alpha(alpha):
    """``(2/(1+2 alpha), 1/alpha)``: the l1 and l2 one-step rates."""
    alpha = np.asarray(alpha, dtype=float)
    return 2.0 / (1.0 + 2.0 * alpha), 1.0 / alpha


def l2_rate_comparison(beta):
    from .eigen import solve_alpha

    r1, r2 = rates_from_alpha(solve_alpha(beta))
    return float(r1), float(r2)


# ---------------------------------------------------------------- dualities


@dataclass(frozen=True)
class TestFunction:
    """A profile ``v`` with a known sup of ``||grad v||_{q'}`` over a box.

    Used as ``u = v**p`` for finite ``p`` and ``u = exp(v)`` for ``p = inf``.
    """

    __test__ = False  # not a pytest class

    kind: str
    params: dict

    def value(self, z):
        z = np.atleast_2d(z)
        P = self.params
        if self.kind == "gaussian":
            r2 = np.sum((z - P["center"]) ** 2, axis=1)
            return P["offset"] + np.exp(-r2 / (2 * P["width"] ** 2))
        s = z @ P["slope"] + P["intercept"]
        if self.kind == "exp_linear":
            return np.exp(s)
        if self.kind == "linear":
            return s
        if self.kind == "softplus":
            return P["offset"] + np.logaddexp(0.0, s)
        raise ValueError(f"unknown test function {self.kind!r}")

    def positive(self):
        return self.kind != "linear"

    def lipschitz(self, q, lo, hi):
        """``sup ||grad v||_{q'}`` over the box ``[lo, hi]`` (componentwise)."""
        qd = _dual_exponent(q)
        P = self.params
        if self.kind == "gaussian":
            d = len(P["center"])
            # |grad v| = r/w^2 exp(-r^2/2w^2) peaks at r = w; the l_q'/l_2 ratio
            # of the direction is at most max(1, d^(1/q' - 1/2))
            ratio = max(1.0, d ** (1.0 / qd - 0.5))
            return ratio * np.exp(-0.5) / P["width"]
        a = np.asarray(P["slope"], dtype=float)
        anorm = np.linalg.norm(a, ord=qd)
        if self.kind == "linear":
            return anorm
        # the linear form a.z + c is largest at the box corner aligned with a
        corner = np.where(a >= 0, hi, lo)
        smax = corner @ a + P["intercept"]
        if self.kind == "exp_linear":
            return anorm * np.exp(smax)
        if self.kind == "softplus":
            return anorm / (1.0 + np.exp(-smax))
        raise ValueError(f"unknown test function {self.kind!r}")


def sample_test_functions(dim, rng):
    """One random instance of every test-function family in ``R^dim``."""
    slope = rng.normal(size=dim)
    return [
        TestFunction("gaussian", dict(center=rng.normal(size=dim), width=rng.uniform(0.5, 2.0),
                                      offset=rng.uniform(0.1, 1.0))),
        TestFunction("exp_linear", dict(slope=0.5 * slope, intercept=rng.normal())),
        TestFunction("linear", dict(slope=slope, intercept=rng.normal())),
        TestFunction("softplus", dict(slope=slope, intercept=rng.normal(), offset=0.1)),
    ]


def _phi(u_spec, measure, weights, p):
    v = u_spec.value(measure.points)
    if p == np.inf:
        with np.errstate(divide="ignore"):
            return logsumexp(np.log(weights) + v)
    return float(np.sum(weights * v**p)) ** (1.0 / p)


@dataclass
class DualityResult:
    kind: str
    p: float
    q: float
    lhs: float
    lipschitz: float
    distance: float
    rhs: float
    passed: bool


def transport_distance(mu, nu, p, q, max_support=400):
    if p == np.inf:
        return bottleneck_winf(mu, nu, q, max_support=max(max_support, 2500)).value
    return wpq_lp(mu, nu, p, q, max_support=max_support).value


def duality_check(u_spec, mu, nu, p, q, slack=1e-9):
    """``|Phi[mu] - Phi[nu]| <= sup ||grad v||_{q'} * W_{p,q}(mu, nu)``.

    ``Phi[mu] = (int v^p dmu)^{1/p}``, or ``log int e^v dmu`` when ``p = inf``.
    Both sides use the integerized weights the transport solver sees. The
    Lipschitz constant is taken over the bounding box of both supports, which
    contains every displacement interpolant between them.
    """
    if p != np.inf and not u_spec.positive():
        raise ValueError(f"{u_spec.kind} test function is not positive; only p = inf applies")
    wa = integerize(mu.weights) / SCALE
    wb = integerize(nu.weights) / SCALE
    lhs = abs(_phi(u_spec, mu, wa, p) - _phi(u_spec, nu, wb, p))
    both = np.vstack([mu.points, nu.points])
    lip = u_spec.lipschitz(q, both.min(axis=0), both.max(axis=0))
    dist = transport_distance(mu, nu, p, q)
    rhs = lip * dist
    return DualityResult(u_spec.kind, p, q, float(lhs), float(lip), float(dist), float(rhs),
                         bool(lhs <= rhs + slack))


@dataclass
class LogEstimateRow:
    x: float
    x_tilde: float
    lhs: float
    log_lipschitz: float
    winf1: float
    rhs: float
    winf2: float
    rhs_l2: float
    passed: bool
    norm_comparison: bool


def _log_u1(lu0, vbar, x, grid2):
    kern = build_transition_kernel(x, vbar, grid2)
    z1, z2 = grid2.mesh()
    return logsumexp(_log_weights_2d(grid2) + lu0(z1) + lu0(z2) - kern.w)


def log_estimate_check(u0, vbar, x_pairs, quantization=32, slack=1e-6, n2=401, workers=None):
    """``|log u1(x) - log u1(x~)| <= ||(log u0)'||_inf W_{inf,1}(P(x;.), P(x~;.))``.

    ``u0`` is passed as a :class:`LogDensity` (``v = -log u0``); ``u1`` is the
    one-step image under the normalized two-parent kernel, computed by 2-D
    quadrature. The ``l2`` variant with factor ``sqrt 2`` is evaluated alongside.
    """
    lip = float(np.max(np.abs(log_derivative(u0))))
    V0 = _potential_function(u0)

    def lu0(z):
        return -V0(z)

    grid2 = kernel_grid(vbar, n=n2)

    def row(pair):
        x, xt = pair
        lhs = abs(_log_u1(lu0, vbar, x, grid2) - _log_u1(lu0, vbar, xt, grid2))
        (m1, m2), _, _ = quantize_kernels(vbar, [x, xt], quantization)
        w1 = bottleneck_winf(m1, m2, 1).value
        w2 = bottleneck_winf(m1, m2, 2).value
        rhs, rhs2 = lip * w1, float(np.sqrt(2.0) * lip * w2)
        return LogEstimateRow(float(x), float(xt), float(lhs), lip, w1, rhs, w2, rhs2,
                              bool(lhs <= rhs + slack), bool(w1 <= np.sqrt(2.0) * w2 + 1e-12))

    return ordered_map(row, [tuple(p) for p in x_pairs], workers)
