import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inflab.grid import (
    EmptyDensityError,
    Grid1D,
    LogDensity,
    default_grid,
    log_derivative,
    logsumexp_convolve,
    second_log_derivative,
    trapezoid_mass,
)

from conftest import gaussian


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(1.0, 0.0, 10)
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 7)
    g = Grid1D.symmetric(5, 11)
    assert np.allclose(g.x, np.linspace(-5, 5, 11))
    assert g.x[g.zero_index()] == 0.0
    with pytest.raises(ValueError):
        Grid1D.symmetric(5, 10).zero_index()


def test_default_grid_rule():
    assert default_grid(1.0).right == 10.0
    assert default_grid(0.25).right == 16.0
    assert default_grid().n == 2049


def test_gaussian_mass():
    g = Grid1D.symmetric(10, 2001)
    assert abs(trapezoid_mass(gaussian(g)) - 1) < 1e-10


def test_constant_mass_exact():
    g = Grid1D(0.0, 1.0, 101)
    assert trapezoid_mass(LogDensity(g, np.zeros(101))) == pytest.approx(1.0, abs=1e-15)


def test_empty_density():
    g = Grid1D(0.0, 1.0, 11)
    with pytest.raises(EmptyDensityError, match="empty density"):
        trapezoid_mass(LogDensity(g, np.full(11, np.inf)))


def test_mass_no_overflow():
    g = Grid1D(0.0, 1.0, 101)
    f = LogDensity(g, np.full(101, -700.0))
    assert np.isclose(np.log(trapezoid_mass(f)), 700.0)


def test_mass_order_two():
    # halving h cuts the error of a wide, truncated Gaussian by about 4
    errs = []
    for n in (41, 81, 161):
        g = Grid1D(-1.0, 2.0, n)
        f = gaussian(g, 0.0, 1.0)
        from scipy.stats import norm
        exact = norm.cdf(2.0) - norm.cdf(-1.0)
        errs.append(abs(trapezoid_mass(f) - exact))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_log_derivative_gaussian():
    g = Grid1D.symmetric(6, 601)
    d = log_derivative(gaussian(g, 0.0, 0.5))
    assert np.max(np.abs(d - (-g.x / 0.5))) < 1e-9


def test_log_derivative_constant_and_abs():
    g = Grid1D.symmetric(3, 61)
    assert np.allclose(log_derivative(LogDensity(g, np.zeros(61))), 0.0)
    d = log_derivative(LogDensity(g, np.abs(g.x)))
    off = np.abs(g.x) > 2 * g.h
    assert np.allclose(d[off], -np.sign(g.x[off]))
    assert np.isfinite(d).all()


def test_log_derivative_needs_three_nodes():
    g = Grid1D(0.0, 1.0, 11)
    v = np.full(11, np.inf)
    v[4:6] = 0.0
    with pytest.raises(ValueError):
        log_derivative(LogDensity(g, v))


def test_log_derivative_on_truncated_region():
    g = Grid1D.symmetric(4, 81)
    f = gaussian(g).truncate(2.0)
    d = log_derivative(f)
    x = g.x[f.finite]
    assert d.size == x.size
    assert np.allclose(d, -x, atol=1e-12)


def test_second_log_derivative_examples():
    g = Grid1D.symmetric(2, 401)
    assert np.allclose(second_log_derivative(gaussian(g, 0, 0.7))[1:-1], 1 / 0.7)
    d2 = second_log_derivative(LogDensity(g, g.x**4))
    assert np.max(np.abs(d2[1:-1] - 12 * g.x[1:-1] ** 2)) < 3 * g.h**2 * 2
    assert np.allclose(second_log_derivative(LogDensity(g, 3 * g.x + 1)), 0.0, atol=1e-9)


@pytest.mark.parametrize("pot, d1, d2", [
    (lambda x: x**2, lambda x: -2 * x, lambda x: 2 + 0 * x),
    (lambda x: x**4, lambda x: -4 * x**3, lambda x: 12 * x**2),
    (lambda x: np.cosh(x), lambda x: -np.sinh(x), lambda x: np.cosh(x)),
])
def test_derivatives_order_two(pot, d1, d2):
    e1, e2 = [], []
    for n in (101, 201):
        g = Grid1D(-1.5, 1.5, n)
        f = LogDensity(g, pot(g.x))
        inner = slice(1, -1)
        e1.append(np.max(np.abs(log_derivative(f)[inner] - d1(g.x)[inner])))
        e2.append(np.max(np.abs(second_log_derivative(f)[inner] - d2(g.x)[inner])))
    if e1[1] > 1e-9:
        assert e1[0] / e1[1] > 3.5
    if e2[1] > 1e-9:
        assert e2[0] / e2[1] > 3.5


def test_convolve_gaussians_add_variance():
    g = Grid1D.symmetric(12, 2401)  # h = 0.01
    out = logsumexp_convolve(gaussian(g), gaussian(g), g)
    ref = gaussian(g, 0, 2.0)
    sel = np.abs(g.x) <= 6
    assert np.max(np.abs(out.v - ref.v)[sel]) < 1e-6


def test_convolve_mass_fubini():
    g = Grid1D.symmetric(15, 1501)
    f = gaussian(g, 0.5, 0.8).shift_log(-np.log(2.0))
    q = gaussian(g, -1.0, 1.5).shift_log(np.log(3.0))
    out = logsumexp_convolve(f, q, g)
    assert abs(out.mass() - f.mass() * q.mass()) < 1e-8


def test_convolve_spike_shifts():
    # a spike at x = c integrates to weight*f(x - c); compare with direct quadrature
    g = Grid1D.symmetric(4, 65)
    c_idx = 40
    spike_v = np.full(65, np.inf)
    spike_v[c_idx] = 0.0
    spike = LogDensity(g, spike_v)
    f = gaussian(g, 0.3, 0.5)
    out = logsumexp_convolve(f, spike, g)
    F = np.exp(-f.v)
    direct = np.array([
        g.h * np.interp(x - g.x[c_idx], g.x, F, left=0.0, right=0.0) for x in g.x
    ])
    fin = direct > 0
    assert np.allclose(np.exp(-out.v[fin]), direct[fin], rtol=1e-12)


def test_convolve_matches_linear_space():
    rng = np.random.default_rng(3)
    g = Grid1D.symmetric(3, 121)
    f = LogDensity(g, 0.4 * g.x**2 + 0.1 * rng.random(121))
    q = LogDensity(g, 0.7 * (g.x - 0.2) ** 2)
    out = logsumexp_convolve(f, q, g)
    F, Q = np.exp(-f.v), np.exp(-q.v)
    w = np.full(121, g.h)
    w[[0, -1]] *= 0.5
    naive = np.zeros(121)
    for k in range(121):
        for j in range(121):
            i = 60 + k - j  # node index of x_k - y_j
            if 0 <= i < 121:
                naive[k] += w[j] * Q[j] * F[i]
    assert np.allclose(np.exp(-out.v), naive, rtol=1e-12, atol=0)


def test_convolve_underflow_immune():
    g = Grid1D.symmetric(60, 601)
    f = LogDensity(g, 0.5 * g.x**2)  # F ~ exp(-1800) at the edge
    out = logsumexp_convolve(f, f, g)
    exact = g.x**2 / 4 - 0.5 * np.log(np.pi)  # ∫exp(-y²/2-(x-y)²/2) = sqrt(pi) exp(-x²/4)
    sel = np.abs(g.x) <= 50  # V up to 625 plus tails near 1400 inside the sums
    assert np.max(np.abs(out.v[sel] - exact[sel])) < 1e-8


def test_convolve_mismatched_steps():
    a = Grid1D.symmetric(5, 101)
    b = Grid1D.symmetric(5, 51)
    with pytest.raises(ValueError):
        logsumexp_convolve(gaussian(a), gaussian(b), a)


@settings(max_examples=25, deadline=None)
@given(shift=st.integers(-20, 20))
def test_mass_translation_invariant(shift):
    g = Grid1D.symmetric(10, 401)
    base = 0.5 * (g.x / 1.3) ** 2
    moved = 0.5 * ((g.x - shift * g.h) / 1.3) ** 2
    assert np.isclose(LogDensity(g, base).mass(), LogDensity(g, moved).mass(), rtol=1e-12)
