import logging
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from zetashift import moments as M
from zetashift.arithmetic import mean_square_coefficients, sieve, shifted_coefficients
from zetashift.rmt import confluent_constant
from zetashift.zeta import ShiftConfig, zeta_half_line

ONE = ShiftConfig((1,), (0,))


# -- parameters ---------------------------------------------------------------

def test_lambda0_root():
    lam = M.lambda0()
    assert abs(math.exp(-lam) - lam - lam * lam / 2) < 1e-12
    assert lam == pytest.approx(0.4912, abs=1e-4)


@given(st.floats(1e3, 1e8), st.floats(0.5, 4))
def test_w_single_shift(T, k):
    assert M.variance_scale_w(T, ShiftConfig((k,), (0.3,))) == k * k * math.log(math.log(T))


def test_w_pair_selects_inverse_gap():
    T = 1e5
    lt = math.log(T)
    d = 2.0 / lt
    w = M.variance_scale_w(T, ShiftConfig((1, 1), (0, d)))
    assert w == pytest.approx(2 * math.log(lt) + 2 * math.log(1 / d), rel=1e-15)
    w_close = M.variance_scale_w(T, ShiftConfig((1, 1), (0, 0.1 / lt)))
    assert w_close == pytest.approx(4 * math.log(lt), rel=1e-15)


def test_bound_parameters_ranges():
    cfg = ShiftConfig((3, 3), (0, 0.2))
    T = 1e6
    W = M.variance_scale_w(T, cfg)
    L = math.log(W)
    p1 = M.BoundParameters.from_config(T, 0.9 * W, cfg)
    p2 = M.BoundParameters.from_config(T, 1.5 * W, cfg)
    p3 = M.BoundParameters.from_config(T, W * L, cfg)
    assert p1.A == pytest.approx(0.5 * cfg.R * L)
    assert p2.A == pytest.approx(0.5 * cfg.R * W * L / (1.5 * W))
    assert p3.A == cfg.R
    for p in (p1, p2, p3):
        assert p.x == pytest.approx(T ** (p.A / p.V))
        assert p.z == pytest.approx(p.x ** (1 / math.log(math.log(T))))


# -- quadrature ---------------------------------------------------------------

@pytest.fixture(scope="module")
def moment_1e4():
    return M.shifted_moment(1e4, ONE)


def test_second_moment_order(moment_1e4):
    r = moment_1e4
    assert r.value >= 0
    assert 0.5 <= r.value / (1e4 * math.log(1e4)) <= 2
    fine = M.shifted_moment(1e4, ONE, r.grid_step / 4)
    assert fine.value == pytest.approx(r.value, rel=1e-6)


def test_halving_step_within_error_estimate():
    coarse = M.shifted_moment(2000, ONE, grid_step=0.1)
    fine = M.shifted_moment(2000, ONE, grid_step=0.05)
    assert abs(fine.value - coarse.value) < coarse.quadrature_error_estimate


def test_shift_invariance():
    c = 0.37
    shifted = M.shifted_moment(1000, ShiftConfig((1,), (c,)), grid_step=0.02)
    moved = M.moment_on_interval(1000 + c, 2000 + c, ONE, grid_step=0.02)
    assert shifted.value == pytest.approx(moved.value, abs=shifted.quadrature_error_estimate + 1e-9 * moved.value)


def test_moment_preconditions():
    with pytest.raises(ValueError):
        M.shifted_moment(50, ONE)
    with pytest.raises(ValueError):
        M.shifted_moment(1000, ONE, grid_step=0.2)


def test_dyadic_assembly():
    r = M.moment_dyadic(800, ONE, grid_step=0.02)
    parts = (M.moment_on_interval(400, 800, ONE, 0.02).value
             + M.moment_on_interval(200, 400, ONE, 0.02).value
             + M.moment_on_interval(100, 200, ONE, 0.02).value
             + M.moment_on_interval(0, 100, ONE, 0.02).value)
    assert r.value == pytest.approx(parts, rel=1e-14)
    assert (r.a, r.b) == (0.0, 800)


def test_threads_do_not_change_result():
    a = M.shifted_moment(300, ONE, 0.02, threads=1)
    b = M.shifted_moment(300, ONE, 0.02, threads=4)
    assert a.value == b.value


# -- conjectured leading term ---------------------------------------------------

def test_conjecture_examples():
    T = 1e6
    lt = math.log(T)
    assert M.conjectured_leading(T, 1, 0.0) == ("coalescing", pytest.approx(T * lt**4))
    assert M.conjectured_leading(T, 2, 0.0) == ("coalescing", pytest.approx(T * lt**16))
    d = 100 / lt
    assert M.conjectured_leading(T, 1, d) == ("separated", pytest.approx(T * lt**2 / d**2))
    regime, v = M.conjectured_leading(T, 1, 1 / lt)
    assert regime == "critical"
    assert v == pytest.approx(confluent_constant(1, 1.0) * T * lt**4, rel=1e-12)


def test_conjecture_continuity():
    T = 1e4
    lt = math.log(T)
    base = M.conjectured_leading(T, 1, 0.0, normalized=True)[1]
    at_edge = M.conjectured_leading(T, 1, 0.1 / lt, normalized=True)[1]
    just_past = M.conjectured_leading(T, 1, 0.1001 / lt, normalized=True)
    assert just_past[0] == "critical"
    assert at_edge == pytest.approx(base, rel=0.1)
    assert just_past[1] == pytest.approx(base, rel=0.1)


# -- level sets -----------------------------------------------------------------

@pytest.fixture(scope="module")
def level_1e5():
    return M.level_values(1e5, ONE, 100_000, seed=0)


def test_measure_extremes_and_monotone():
    V = [-1e6, -2, 0, 1, 2, 3, 1e6]
    out = M.measure_level_set(1e4, V, ONE, 20_000, seed=1)
    meas = [m for _, m in out]
    assert meas[0] == 1e4 and meas[-1] == 0
    assert all(a >= b for a, b in zip(meas, meas[1:]))
    with pytest.raises(ValueError):
        M.measure_level_set(1e4, V, ONE, 500, seed=1)


def test_measure_seeded_reproducible():
    a = M.measure_level_set(1e4, [0.0, 1.0], ONE, 5000, seed=9)
    b = M.measure_level_set(1e4, [0.0, 1.0], ONE, 5000, seed=9)
    assert a == b


def test_gaussian_tail_shape(level_1e5):
    _, vals = level_1e5
    T = 1e5
    V = np.arange(2.0, 8.01, 0.25)
    meas = M._measure_from_values(T, vals, V)
    ok = meas > 0   # levels beyond the sample's reach carry no information
    assert ok.sum() >= 3
    W = M.variance_scale_w(T, ONE)
    slope = np.polyfit(-V[ok] ** 2 / W, np.log(meas[ok] / T), 1)[0]
    assert 0.5 <= slope <= 2


def _branch(T, V, W):
    L = math.log(W)
    if V <= W:
        return 1, 1 / V - 2 * V * (1 - 4 / L) / W
    if V <= 0.5 * W * L:
        a = 7 / (4 * W * L)
        return 2, 1 / V - 2 * V * (1 - a * V) * (1 - 2 * a * V) / W
    return 3, -(math.log(V) + 1) / 129


def test_bound_boundary_uses_first_branch(caplog):
    cfg = ShiftConfig((4, 4), (0, 0.01))
    T = 1e6
    W = M.variance_scale_w(T, cfg)
    p = M.BoundParameters.from_config(T, W, cfg)
    with caplog.at_level(logging.DEBUG, logger="zetashift.moments"):
        b = M.theorem_bound(p)
    L = math.log(W)
    assert b == pytest.approx(T * W / math.sqrt(W) * math.exp(-W * (1 - 4 / L)), rel=1e-12)
    assert "V = W" in caplog.text


def test_bound_rejects_small_v():
    p = M.BoundParameters.from_config(1e4, 2.0, ONE)
    with pytest.raises(ValueError):
        M.theorem_bound(p)


def test_bound_trivial_below_range():
    p = M.BoundParameters.from_config(1e6, 5.0, ShiftConfig((3, 3), (0, 0.1)))
    assert p.V < p.lower_edge
    assert M.theorem_bound(p) == 1e6


@given(st.floats(4, 8), st.integers(5, 8), st.floats(0.05, 1.0))
def test_bound_at_most_t_for_large_w(log10_T, k, v_frac):
    T = 10.0**log10_T
    cfg = ShiftConfig((k, k), (0.0, 0.0))
    W = M.variance_scale_w(T, cfg)
    edge = 10 * math.sqrt(math.log(math.log(T)))
    V = edge + v_frac * (W * math.log(W) - edge)
    assert M.theorem_bound(M.BoundParameters.from_config(T, V, cfg)) <= T


def test_bound_exceeds_t_for_small_w():
    # with W = log log T the factor 1 - 4/log W is negative, so the literal
    # first-range formula grows; the bound is only informative for large W
    cfg = ShiftConfig((2, 2), (0, 0))
    T = 1e4
    p = M.BoundParameters.from_config(T, 20.0, cfg)
    assert p.lower_edge <= 20.0 <= p.W
    assert M.theorem_bound(p) > T


@given(st.floats(4, 8), st.integers(2, 8), st.floats(0.0, 1.0))
def test_bound_monotonicity_follows_derivative(log10_T, k, frac):
    T = 10.0**log10_T
    cfg = ShiftConfig((k, k), (0.0, 0.0))
    W = M.variance_scale_w(T, cfg)
    if W < 20:
        return
    lo = 10 * math.sqrt(math.log(math.log(T)))
    hi = W * math.log(W)
    V = lo + frac * (hi - lo)
    h = 1e-6 * V
    b1, d1 = _branch(T, V, W)
    b2, _ = _branch(T, V + h, W)
    if b1 != b2 or V < 3:
        return
    f0 = math.log(M.theorem_bound(M.BoundParameters.from_config(T, V, cfg)))
    f1 = math.log(M.theorem_bound(M.BoundParameters.from_config(T, V + h, cfg)))
    if abs(d1) * h > 1e-9 * max(1, abs(f0)):
        assert (f1 - f0) * d1 > 0
    if b1 == 3:
        assert f1 < f0


def test_bound_decreasing_on_provable_ranges():
    cfg = ShiftConfig((6, 6), (0, 0))
    T = 1e6
    W = M.variance_scale_w(T, cfg)
    L = math.log(W)
    c = 1 - 4 / L
    def vals(a, b):
        V = np.linspace(a, b, 200)
        return np.array([M.theorem_bound(M.BoundParameters.from_config(T, v, cfg)) for v in V])
    start1 = max(10 * math.sqrt(math.log(math.log(T))), math.sqrt(W / (2 * c))) + 1e-6
    assert np.all(np.diff(vals(start1, W)) < 0)
    assert np.all(np.diff(vals(0.5 * W * L * 1.001, 3 * W * L)) < 0)


# -- layer cake -----------------------------------------------------------------

@pytest.mark.parametrize("cfg", [ONE, ShiftConfig((1, 1), (0, 0.01))])
def test_layer_cake(cfg):
    lhs, rhs = M.layer_cake_check(1e4, cfg, 100_000, seed=2)
    assert rhs == pytest.approx(lhs, rel=0.01)
    _, rhs_wide = M.layer_cake_check(1e4, cfg, 100_000, seed=2, v_range=(-60, 60))
    assert rhs_wide == pytest.approx(rhs, rel=1e-3)


# -- pointwise inequality ---------------------------------------------------------

@pytest.fixture(scope="module")
def small_table():
    return sieve(10**5)


def test_prop_main_sweep(small_table):
    rng = np.random.default_rng(4)
    t = rng.uniform(1e4, 1e5, 10_000)
    _, _, slack = M.prop_main_check(t, np.floor(t**0.3), 0.5, small_table)
    assert np.max(slack) <= 0.5


def test_prop_main_lambda_continuity(small_table):
    t, x = 31415.9, 200.0
    lam0 = M.lambda0()
    lams = np.linspace(lam0, 0.5, 6)
    rows = [M.prop_main_check(t, x, lam, small_table) for lam in lams]
    rhs = np.array([r[1] for r in rows])
    assert np.max(np.abs(np.diff(rhs))) < 0.05
    assert all(r[2] <= 0.5 for r in rows)
    with pytest.raises(ValueError):
        M.prop_main_check(t, x, 0.3, small_table)


def test_prop_main_at_zero(small_table):
    # a zero of zeta above the t >= 50 domain: lhs is very negative, rhs finite
    gamma = 60.831778524609809
    lhs, rhs, slack = M.prop_main_check(gamma, 50.0, 0.5, small_table)
    assert lhs < -8 and math.isfinite(rhs) and slack < 0


def test_prop_main_direct_sum(small_table):
    t, x, lam = 12345.6, 97.0, 0.6
    lx = math.log(x)
    total = 0.0
    for n in range(2, int(x) + 1):
        f = small_table.factorize(n)
        if len(f) != 1:
            continue
        p = next(iter(f))
        total += (math.log(p) * n ** (-0.5 - lam / lx) * math.cos(t * math.log(n))
                  * math.log(x / n) / lx / math.log(n))
    total += (1 + lam) / 2 * math.log(t) / lx
    assert M.prop_main_check(t, x, lam, small_table)[1] == pytest.approx(total, rel=1e-12)


def test_prime_moment_spot_check(small_table):
    for k in (1, 2):
        integral, bound = M.prime_moment_check(1e6, 50, k, small_table)
        assert integral <= bound


# -- Dirichlet polynomials ---------------------------------------------------------

@given(st.integers(1, 400), st.floats(0, 1e5), st.floats(0.01, 0.2), st.integers(0, 2**31))
def test_nufft_matches_direct(n_terms, t0, h, seed):
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal(n_terms) + 1j * rng.standard_normal(n_terms)
    freqs = np.log(np.arange(1, n_terms + 1))
    a = M.dirichlet_poly_on_grid(coef, freqs, t0, h, 257)
    b = M.dirichlet_poly_on_grid(coef, freqs, t0, h, 257, method="direct")
    assert np.max(np.abs(a - b)) <= 1e-9 * np.sum(np.abs(coef))


def test_a_mean_square_trivial():
    numeric, diagonal, _ = M.a_mean_square(1e4, 1, ShiftConfig((1, 1), (0, 0.5)))
    assert numeric == pytest.approx(1e4, rel=1e-9)
    assert diagonal == 1e4
    with pytest.raises(ValueError):
        M.a_mean_square(1e4, 101, ONE)


def test_a_mean_square_routes_agree():
    cfg = ShiftConfig((1, 2), (0, 0.4))
    a = M.a_mean_square(5000, 40, cfg, method="nufft")
    b = M.a_mean_square(5000, 40, cfg, method="direct")
    assert a[0] == pytest.approx(b[0], rel=1e-10)


def test_a_mean_square_order_of_leading():
    T, x = 1e5, 200
    lt = math.log(T)
    ratios = []
    for d in (0.0, 1 / lt, 10 / lt, 0.5):
        numeric, diagonal, leading = M.a_mean_square(T, x, ShiftConfig((1, 1), (0, d)))
        assert numeric / diagonal == pytest.approx(1, abs=0.05)
        ratios.append(numeric / leading)
    assert min(ratios) > 0.05 and max(ratios) < 5


def test_smoothed_l_single():
    v = M.smoothed_l_value(50.0, ONE, 1e4, 10**5)
    assert abs(v - zeta_half_line(50.0)) <= 5e-3
    with pytest.raises(ValueError):
        M.smoothed_l_value(50.0, ONE, 1e4, 10**4)


def test_smoothed_l_gamma_pole_term():
    # the leading discrepancy is the residue -L(-1, t)/X from Gamma's pole at -1
    cfg = ShiftConfig((1, 1), (0, 0.3))
    t, X = 100.0, 1e4
    v = M.smoothed_l_value(t, cfg, X)
    oracle = zeta_half_line(t) * zeta_half_line(t + 0.3)
    l_minus = complex(mpmath.zeta(mpmath.mpc(-0.5, t)) * mpmath.zeta(mpmath.mpc(-0.5, t + 0.3)))
    assert abs(v - (oracle - l_minus / X)) < 5e-3
    assert abs(v - oracle) == pytest.approx(abs(l_minus) / X, rel=0.1)


def test_smoothed_l_cauchy_in_x():
    cfg = ShiftConfig((1, 1), (0, 0.3))
    vals = [M.smoothed_l_value(100.0, cfg, X) for X in (1e3, 2e3, 4e3, 8e3, 1.6e4)]
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] < diffs[:-1])


def test_kernel_properties():
    assert M.bump_kernel(1.0) == 0 and M.bump_kernel(2.0) == 0
    assert M.bump_kernel(1.5) == pytest.approx(math.exp(-4))
    y = np.linspace(0, 3, 301)
    assert np.all(M.bump_kernel(y) >= 0)
    mass = M.kernel_fourier(0.0)[0]
    assert mass.imag == pytest.approx(0, abs=1e-15)
    xi = np.array([5.0, 10, 20, 40, 80, 160])
    decay = np.abs(M.kernel_fourier(xi)) * xi**4
    # |K^(xi)| <= C_4 xi^-4 with C_4 fitted on the grid; faster-than-power decay shows up as a falling tail
    c4 = decay.max()
    assert np.isfinite(c4) and decay[-1] < decay[-3] < c4


def test_s1_single_zeta_against_direct_quadrature():
    T = 1e4
    v = M.s1_kernel_integral(T, ONE, x=1)
    h = 0.01
    t = T + h * np.arange(int(T / h) + 1)
    direct = abs(h * np.sum(zeta_half_line(t) * M.bump_kernel(t / T)))
    assert v == pytest.approx(direct, rel=0.01)


def test_s1_diagonal_main_term():
    T, x = 1e5, 200
    cfg = ShiftConfig((1, 1), (0, 0.3))
    v = M.s1_kernel_integral(T, cfg, x=x)
    main = T * mean_square_coefficients(shifted_coefficients(x, cfg)) * M.kernel_fourier(0.0)[0].real
    assert 0.5 <= v / main <= 1.5


def test_s1_cauchy_schwarz_chain():
    T, x = 1e4, 100
    cfg = ShiftConfig((1, 1), (0, 0.3))
    s1 = M.s1_kernel_integral(T, cfg, x=x)
    numeric, _, _ = M.a_mean_square(T, x, cfg)
    moment = M.shifted_moment(T, cfg).value
    assert s1**2 / numeric <= moment * 1.05
