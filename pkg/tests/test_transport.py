import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inflab.grid import Grid1D, Grid2D, LogDensity
from inflab.transport import (
    SCALE,
    DiscreteMeasure,
    bottleneck_winf,
    build_transition_kernel,
    duality_check,
    ground_cost,
    integerize,
    l2_rate_comparison,
    log_estimate_check,
    quantize_kernels,
    rates_from_alpha,
    sample_test_functions,
    TestFunction,
    transport_distance,
    verify_kernel_contraction,
    w22_plan_displacement,
    wpq_lp,
)

from conftest import gaussian

QS = [1, 2, np.inf]


def uniform(points):
    pts = np.asarray(points, dtype=float)
    return DiscreteMeasure(pts, np.full(len(pts), 1.0 / len(pts)))


def quantile_distance(x, y, p):
    # equal-size uniform measures on the line: sorted matching is optimal
    d = np.abs(np.sort(x) - np.sort(y))
    return d.max() if p == np.inf else np.mean(d**p) ** (1 / p)


def test_integerize_examples():
    assert integerize([1, 1, 1], scale=10).tolist() == [4, 3, 3]
    assert integerize([0.5, 0.5]).sum() == SCALE


@settings(max_examples=60, deadline=None)
@given(w=st.lists(st.floats(0, 1e3), min_size=1, max_size=30).filter(lambda w: sum(w) > 1e-6))
def test_integerize_property(w):
    out = integerize(w)
    assert out.sum() == SCALE
    raw = np.asarray(w) / np.sum(w) * SCALE
    assert np.all(np.abs(out - raw) < 1.0)


def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0]], [0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 3)), [0.5, 0.5])
    m = DiscreteMeasure.from_unnormalized([0.0, 1.0], [1.0, 3.0])
    assert np.allclose(m.weights, [0.25, 0.75]) and m.dim == 1


def test_ground_cost_norms():
    x = np.array([[0.0, 0.0]])
    y = np.array([[3.0, -4.0]])
    assert ground_cost(x, y, 1)[0, 0] == 7.0
    assert ground_cost(x, y, 2)[0, 0] == 5.0
    assert ground_cost(x, y, np.inf)[0, 0] == 4.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 12))
def test_one_dimensional_quantile_oracle(seed, n):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=n), rng.normal(1.0, 2.0, size=n)
    mu, nu = uniform(x), uniform(y)
    # rounding each weight by < 1/SCALE moves W_p^p by at most 2n/SCALE * max cost^p
    span = max(x.max(), y.max()) - min(x.min(), y.min())
    for p in (1, 2):
        err = abs(wpq_lp(mu, nu, p, 2).value ** p - quantile_distance(x, y, p) ** p)
        assert err <= 2 * n / SCALE * span**p + 1e-15
    assert np.isclose(bottleneck_winf(mu, nu, 2).value, quantile_distance(x, y, np.inf), rtol=1e-12)


def test_unequal_weights_line():
    # 1/2 at 0 and 1/2 at 1 against all mass at 1: W1 = 1/2, W2 = sqrt(1/2), Winf = 1
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    nu = DiscreteMeasure.dirac([1.0])
    assert np.isclose(wpq_lp(mu, nu, 1, 1).value, 0.5)
    assert np.isclose(wpq_lp(mu, nu, 2, 1).value, np.sqrt(0.5))
    assert bottleneck_winf(mu, nu, 1).value == 1.0


@pytest.mark.parametrize("q", QS)
def test_translation(q):
    rng = np.random.default_rng(5)
    mu = DiscreteMeasure.from_unnormalized(rng.normal(size=(7, 2)), rng.random(7) + 0.1)
    shift = np.array([0.3, -1.2])
    norm = np.linalg.norm(shift, ord=q)
    nu = mu.translate(shift)
    for p in (1, 2, np.inf):
        assert np.isclose(transport_distance(mu, nu, p, q), norm, rtol=1e-9)


@pytest.mark.parametrize("q", QS)
def test_dirac_pair(q):
    a, b = np.array([1.0, 2.0]), np.array([-0.5, 0.0])
    rep = bottleneck_winf(DiscreteMeasure.dirac(a), DiscreteMeasure.dirac(b), q)
    assert rep.value == np.linalg.norm(a - b, ord=q)


def _random_triple(seed, k=6, d=2):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(3):
        n = int(rng.integers(1, k + 1))
        out.append(DiscreteMeasure.from_unnormalized(rng.normal(size=(n, d)), rng.random(n) + 0.05))
    return out


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_metric_axioms_and_orderings(seed):
    a, b, c = _random_triple(seed)
    for q in QS:
        vals = [transport_distance(a, b, p, q) for p in (1, 2, np.inf)]
        # monotone in p
        assert vals[0] <= vals[1] + 1e-9 and vals[1] <= vals[2] + 1e-9
        for p in (1, 2, np.inf):
            ab = transport_distance(a, b, p, q)
            assert np.isclose(ab, transport_distance(b, a, p, q), rtol=1e-9, atol=1e-12)
            assert ab <= transport_distance(a, c, p, q) + transport_distance(c, b, p, q) + 1e-7
            assert transport_distance(a, a, p, q) < 1e-12
    # the l_inf ground norm is the smallest, l1 the largest
    for p in (1, 2, np.inf):
        d = [transport_distance(a, b, p, q) for q in (np.inf, 2, 1)]
        assert d[0] <= d[1] + 1e-9 and d[1] <= d[2] + 1e-9


def test_bottleneck_certificate():
    rng = np.random.default_rng(2)
    mu = DiscreteMeasure.from_unnormalized(rng.normal(size=(20, 2)), rng.random(20))
    nu = DiscreteMeasure.from_unnormalized(rng.normal(size=(15, 2)) + 1, rng.random(15))
    rep = bottleneck_winf(mu, nu, 1)
    k = len(mu) + len(nu)
    # below the threshold even the rounding budget cannot close the gap
    assert rep.below_threshold_flow < 1.0 - k / SCALE
    assert rep.plan.sum() >= SCALE - k
    cost = ground_cost(mu.points, nu.points, 1)
    assert cost[rep.plan > 0].max() <= rep.value


def test_support_cap_message():
    m = uniform(np.zeros((500, 1)))
    with pytest.raises(ValueError, match="bottleneck/sinkhorn"):
        wpq_lp(m, m, 2, 2)
    with pytest.raises(ValueError):
        wpq_lp(m, m, 3, 2, max_support=1000)


def test_w22_plan_reports_displacement():
    mu = uniform([[0.0, 0.0], [1.0, 1.0]])
    rep = w22_plan_displacement(mu, mu.translate([0.5, 0.25]))
    assert np.isclose(rep.value, np.hypot(0.5, 0.25))
    assert np.isclose(rep.max_l1_displacement, 0.75)


# ---------------------------------------------------------------- kernels

def _gauss_vbar(alpha, n=801):
    g = Grid1D.symmetric(10, n)
    return gaussian(g, 0.0, 1 / alpha)


def test_kernel_moments_match_bivariate_normal():
    alpha = 1.5
    vbar = _gauss_vbar(alpha)
    g = Grid1D.symmetric(7, 281)
    kern = build_transition_kernel(0.8, vbar, Grid2D(g, g))
    z1, z2 = kern.grid.mesh()
    w = np.exp(-kern.w) * g.h**2
    assert np.isclose(w.sum(), 1.0, atol=1e-6)
    # precision [[a+1/4, 1/4], [1/4, a+1/4]], linear term x/2 in each coordinate
    prec = np.array([[alpha + 0.25, 0.25], [0.25, alpha + 0.25]])
    mean = np.linalg.solve(prec, [0.4, 0.4])
    cov = np.linalg.inv(prec)
    m1, m2 = np.sum(w * z1), np.sum(w * z2)
    assert np.allclose([m1, m2], mean, atol=1e-6)
    assert np.isclose(np.sum(w * (z1 - m1) * (z2 - m2)), cov[0, 1], atol=1e-6)
    assert np.isclose(np.sum(w * (z1 - m1) ** 2), cov[0, 0], atol=1e-6)


def test_quantized_kernels():
    vbar = _gauss_vbar(1.78)
    (m1, m2), disc, diam = quantize_kernels(vbar, [0.0, 1.0], 24)
    assert max(disc) < 1e-15
    assert len(m1) <= 24 * 24 and m1.dim == 2
    # same lattice for both measures
    assert np.isin(m2.points[:, 0], np.unique(np.concatenate([m1.points[:, 0], m2.points[:, 0]]))).all()
    assert diam > 0


def test_gaussian_kernel_contraction_ratio():
    # for Gaussian Vbar the kernels are translates with l1 shift rho*|x - x~|
    alpha = 1.7807764064044151375
    rho = 2 / (1 + 2 * alpha)
    rep = verify_kernel_contraction(_gauss_vbar(alpha), alpha, [(0.0, 1.0), (-2.0, 2.0)],
                                    quantization=32, workers=1)
    assert rep.passed and np.isclose(rep.rho, rho)
    for row in rep.rows:
        assert row.ratio >= rho - 2 * row.tolerance / abs(row.x - row.x_tilde)
        assert len(row.csv_row()) == len(row.CSV_HEADER)


def test_kernel_contraction_rejects_weak_vbar():
    with pytest.raises(ValueError, match="log-concave"):
        verify_kernel_contraction(_gauss_vbar(0.5), 1.78, [(0.0, 1.0)], quantization=8)


def test_rates():
    r1, r2 = rates_from_alpha(np.array([0.5, 1.0, 2.0]))
    assert np.allclose(r1, [1.0, 2 / 3, 0.4]) and np.allclose(r2, [2.0, 1.0, 0.5])
    a, b = l2_rate_comparison(1.0)
    assert np.isclose(a, 0.43844718719116972509) and np.isclose(b, 0.56155281280883027491)
    assert a < b


# ---------------------------------------------------------------- dualities

@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_duality_inequalities(seed):
    rng = np.random.default_rng(seed)
    a, b, _ = _random_triple(seed)
    for u in sample_test_functions(2, rng):
        for p in ((1, 2, np.inf) if u.positive() else (np.inf,)):
            for q in QS:
                assert duality_check(u, a, b, p, q).passed


def test_duality_dirac_linear_equality():
    u = TestFunction("linear", dict(slope=np.array([2.0]), intercept=0.3))
    res = duality_check(u, DiscreteMeasure.dirac([0.5]), DiscreteMeasure.dirac([-1.0]), np.inf, 1)
    assert np.isclose(res.lhs, res.rhs, rtol=1e-14)


def test_duality_rejects_nonpositive():
    u = TestFunction("linear", dict(slope=np.array([1.0]), intercept=0.0))
    m = DiscreteMeasure.dirac([0.0])
    with pytest.raises(ValueError, match="not positive"):
        duality_check(u, m, m, 2, 1)


def test_lipschitz_constants_bound_gradients():
    rng = np.random.default_rng(9)
    lo, hi = np.array([-2.0, -1.0]), np.array([1.5, 2.0])
    z = rng.uniform(lo, hi, size=(4000, 2))
    eps = 1e-6
    for u in sample_test_functions(2, rng):
        for q in QS:
            qd = {1: np.inf, 2: 2, np.inf: 1}[q]
            grad = np.column_stack([
                (u.value(z + eps * e) - u.value(z - eps * e)) / (2 * eps) for e in np.eye(2)
            ])
            assert np.linalg.norm(grad, ord=qd, axis=1).max() <= u.lipschitz(q, lo, hi) * (1 + 1e-6)


def test_log_estimate_rows():
    alpha = 1.7807764064044151375
    vbar = _gauss_vbar(alpha, n=401)
    u0 = LogDensity(vbar.grid, -0.1 * np.sin(vbar.x))
    rows = log_estimate_check(u0, vbar, [(0.0, 1.0)], quantization=16, n2=201, workers=1)
    (r,) = rows
    assert r.passed and r.norm_comparison
    assert np.isclose(r.log_lipschitz, 0.1, rtol=1e-3)


def test_duality_equal_measures():
    rng = np.random.default_rng(4)
    mu = DiscreteMeasure.from_unnormalized(rng.normal(size=(5, 2)), rng.random(5) + 0.1)
    for u in sample_test_functions(2, rng):
        res = duality_check(u, mu, mu, np.inf, 2)
        assert res.lhs == 0.0 and res.distance == 0.0 and res.passed
