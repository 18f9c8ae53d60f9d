import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from zetashift.zeta import (ShiftConfig, ZetaEvalOptions, ZetaRangeError, em_error_bound,
                            hardy_z, log_shifted_abs, riemann_siegel_theta, shifted_product,
                            zeta_euler_maclaurin, zeta_half_line)

EM = ZetaEvalOptions(method="euler_maclaurin")


def rs_tolerance(t):
    return np.maximum(1e-6, 1e-3 * np.asarray(t) ** -0.75)


def test_value_at_half():
    assert zeta_half_line(0.0) == pytest.approx(-1.4603545088095868, abs=1e-10)


def test_first_zero():
    assert abs(zeta_half_line(14.134725)) <= 1e-4
    assert abs(zeta_half_line(14.134725141734693, EM)) <= 1e-8


def test_methods_agree_at_100():
    assert abs(zeta_half_line(100.0) - zeta_half_line(100.0, EM)) <= 1e-6


def test_against_mpmath_spot_values():
    for t in (20.0, 250.5, 3000.0, 1e5 + 0.25):
        ref = complex(mpmath.zeta(mpmath.mpc(0.5, t)))
        assert abs(zeta_half_line(t) - ref) <= rs_tolerance(t)


def test_euler_maclaurin_bound_is_tiny():
    for t in (0.0, 50.0, 1e3, 1e4):
        assert em_error_bound(0.5 + 1j * t, max(32, math.ceil(t)), 12) < 1e-8
    assert zeta_euler_maclaurin(2.0) == pytest.approx(math.pi**2 / 6, rel=1e-13)


def test_theta_values():
    assert riemann_siegel_theta(0.0) == 0.0
    assert abs(riemann_siegel_theta(17.8456)) <= 1e-4


def test_theta_matches_integral_of_derivative():
    def dtheta(t):
        return float(mpmath.re(mpmath.digamma(0.25 + 0.5j * t)) / 2 - mpmath.log(mpmath.pi) / 2)
    integral = mpmath.quad(dtheta, [100, 300, 600, 1000])
    diff = riemann_siegel_theta(1000.0) - riemann_siegel_theta(100.0)
    assert abs(diff - float(integral)) <= 1e-5


def test_range_check():
    with pytest.raises(ZetaRangeError):
        zeta_half_line(2e8)
    with pytest.raises(ValueError):
        ZetaEvalOptions(rs_correction_terms=5)


def test_z_reality(rng):
    t = rng.uniform(10, 1e5, 10_000)
    v = np.exp(1j * riemann_siegel_theta(t)) * zeta_half_line(t)
    assert np.max(np.abs(v.imag)) <= 1e-5
    assert np.allclose(v.real, hardy_z(t), atol=1e-9)


@given(st.floats(0, 5e4))
def test_conjugate_symmetry(t):
    assert zeta_half_line(-t) == pytest.approx(zeta_half_line(t).conjugate(), abs=1e-12)


def test_method_agreement_random(rng):
    t = np.concatenate([rng.uniform(10, 100, 300), 10 ** rng.uniform(2, 4, 700)])
    rs = zeta_half_line(t)
    em = np.array([zeta_half_line(x, EM) for x in t])
    assert np.all(np.abs(rs - em) <= rs_tolerance(t))


def test_fewer_correction_terms_are_less_accurate():
    t = 1000.0
    ref = zeta_half_line(t, EM)
    errs = [abs(zeta_half_line(t, ZetaEvalOptions(rs_correction_terms=n)) - ref) for n in range(5)]
    assert errs[4] < errs[2] < errs[0]


def test_shifted_product_examples():
    c1 = ShiftConfig((1,), (0,))
    assert shifted_product(20.0, c1) == pytest.approx(abs(zeta_half_line(20.0)) ** 2, rel=1e-14)
    cc = ShiftConfig((1,), (0.37,))
    assert shifted_product(50.0, cc) == pytest.approx(shifted_product(50.37, c1), rel=1e-14)
    c2 = ShiftConfig((1, 1), (0, 0.01))
    direct = abs(zeta_half_line(50.0)) ** 2 * abs(zeta_half_line(50.01)) ** 2
    assert shifted_product(50.0, c2) == pytest.approx(direct, rel=1e-8)
    oracle = abs(zeta_half_line(50.0, EM)) ** 2 * abs(zeta_half_line(50.01, EM)) ** 2
    assert shifted_product(50.0, c2) == pytest.approx(oracle, rel=1e-4)


@given(st.floats(10, 1e4), st.floats(-2, 2), st.floats(0.5, 2))
def test_shifted_product_nonnegative_and_log_consistent(t, a, k):
    cfg = ShiftConfig((k, 1.0), (0.0, a if a != 0 else 0.1))
    p = shifted_product(t, cfg)
    assert p >= 0
    assert math.log(p) == pytest.approx(2 * log_shifted_abs(t, cfg), rel=1e-9, abs=1e-9)


def test_shift_config_validation():
    with pytest.raises(ValueError):
        ShiftConfig((1, 1), (0, 0, 0))
    with pytest.raises(ValueError):
        ShiftConfig((1, 1, 1), (0, 0, 0.5))
    with pytest.raises(ValueError):
        ShiftConfig((0,), (0,))
    cfg = ShiftConfig((1, 2), (0, 0.5))
    assert (cfg.m, cfg.R, cfg.sum_sq) == (2, 3, 5)
    assert list(cfg.pairs()) == [(0, 1, 2.0, 0.5)]


def test_beta_proxy():
    T = 1e4
    assert ShiftConfig((1, 1), (0, 0.5)).beta_proxy(T) == 0.0
    d = 0.05
    assert ShiftConfig((1, 1), (0, d)).beta_proxy(T) == pytest.approx(d * math.log(T))
