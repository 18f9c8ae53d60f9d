"""Evaluation of zeta(1/2 + it) and products of shifted values.

Two evaluation paths:

* Riemann-Siegel: the main sum of Z(t) plus the remainder series
  ``C_0 .. C_3`` built from derivatives of
  ``Psi(p) = cos(2 pi (p^2 - p - 1/16)) / cos(2 pi p)``.  Fast, vectorised,
  used for t >= 10.
* Euler-Maclaurin: slow but with a rigorous remainder bound.  It is the
  reference every cross-check is measured against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import bernoulli, loggamma

__all__ = [
    "ZetaEvalOptions",
    "ShiftConfig",
    "ZetaRangeError",
    "riemann_siegel_theta",
    "hardy_z",
    "zeta_half_line",
    "zeta_euler_maclaurin",
    "em_error_bound",
    "shifted_product",
    "log_shifted_abs",
    "T_MAX",
    "RS_MIN_T",
]

T_MAX = 1e8
RS_MIN_T = 10.0
_TWO_PI = 2.0 * math.pi
# elements per block in the vectorised main sum
_BLOCK_ELEMS = 1 << 21


class ZetaRangeError(ValueError):
    """Height outside the engine's validated range."""


@dataclass(frozen=True)
class ZetaEvalOptions:
    """How to evaluate zeta on the critical line.

    ``rs_correction_terms`` counts remainder terms ``C_0, C_1, ...`` (0 keeps
    the bare main sum).  ``em_terms=None`` picks ``max(ceil(|t|), 32)``
    summands, which together with ``em_bernoulli_order`` keeps the
    Euler-Maclaurin remainder bound below 1e-10 on the validated range.
    """

    method: str = "riemann_siegel"
    rs_correction_terms: int = 4
    em_terms: int | None = None
    em_bernoulli_order: int = 12

    def __post_init__(self):
        if self.method not in ("riemann_siegel", "euler_maclaurin"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 <= self.rs_correction_terms <= 4:
            raise ValueError("rs_correction_terms must be in 0..4")
        if self.em_bernoulli_order < 1:
            raise ValueError("em_bernoulli_order must be >= 1")


DEFAULT_OPTIONS = ZetaEvalOptions()


@dataclass(frozen=True)
class ShiftConfig:
    """Exponents ``k_i`` and vertical shifts ``alpha_i`` of a shifted moment."""

    exponents: tuple
    shifts: tuple

    def __init__(self, exponents: Sequence[float], shifts: Sequence[float]):
        exps = tuple(float(k) for k in exponents)
        alph = tuple(float(a) for a in shifts)
        if len(exps) == 0 or len(exps) != len(alph):
            raise ValueError("exponents and shifts must be non-empty and of equal length")
        if any(not k > 0 for k in exps):
            raise ValueError("exponents must be positive")
        if len(set(alph)) != len(alph) and not all(a == alph[0] for a in alph):
            # repeated shifts are allowed only in the fully degenerate case, which
            # the arithmetic module uses as the coalescing limit
            raise ValueError("shifts must be pairwise distinct")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "shifts", alph)

    @property
    def m(self) -> int:
        return len(self.exponents)

    @property
    def R(self) -> float:
        return sum(self.exponents)

    @property
    def sum_sq(self) -> float:
        return sum(k * k for k in self.exponents)

    def pairs(self):
        """Yield ``(i, j, k_i k_j, |alpha_i - alpha_j|)`` for ``i < j``."""
        for i in range(self.m):
            for j in range(i + 1, self.m):
                yield i, j, self.exponents[i] * self.exponents[j], abs(self.shifts[i] - self.shifts[j])

    def integer_exponents(self) -> tuple:
        if any(k != int(k) for k in self.exponents):
            raise ValueError("this operation needs positive integer exponents")
        return tuple(int(k) for k in self.exponents)

    def beta_proxy(self, T: float) -> float:
        """Finite-T stand-in for beta: largest ``|a_i - a_j| log T <= 1``, else 0."""
        logT = math.log(T)
        vals = [d * logT for *_, d in self.pairs() if d * logT <= 1.0]
        return max(vals, default=0.0)


# ---------------------------------------------------------------------------
# theta


def riemann_siegel_theta(t):
    """Riemann-Siegel theta function.

    Asymptotic series for ``t >= 10`` and ``Im log Gamma(1/4 + it/2) - (t/2) log pi``
    below.  Odd in t.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    a = np.abs(t_arr)
    out = np.empty_like(a)
    big = a >= RS_MIN_T
    if np.any(big):
        tb = a[big]
        inv = 1.0 / tb
        inv2 = inv * inv
        out[big] = (0.5 * tb * np.log(tb / _TWO_PI) - 0.5 * tb - math.pi / 8
                    + inv * (1 / 48 + inv2 * (7 / 5760 + inv2 * (31 / 80640 + inv2 * 127 / 430080))))
    if np.any(~big):
        ts = a[~big]
        out[~big] = loggamma(0.25 + 0.5j * ts).imag - 0.5 * ts * math.log(math.pi)
    out = np.copysign(out, t_arr) if np.any(t_arr < 0) else out
    if np.ndim(t) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Riemann-Siegel remainder


@lru_cache(maxsize=None)
def _psi_taylor(n_coef: int = 90) -> np.ndarray:
    """Taylor coefficients of Psi about p = 1/2 in powers of x = p - 1/2.

    Psi = -cos(2 pi x^2 - 5 pi / 8) / cos(2 pi x) is entire; the coefficients are
    obtained by exact power-series division carried out at 80 digits.
    """
    import mpmath as mp

    with mp.workdps(80):
        pi = mp.pi
        num = [mp.mpf(0)] * n_coef
        den = [mp.mpf(0)] * n_coef
        for j in range(0, n_coef, 2):
            # -cos(2 pi x^2 - 5pi/8) = -sum_r cos^(r)(-5pi/8) (2 pi x^2)^r / r!
            r = j // 2
            deriv = mp.cos(-5 * pi / 8 + r * pi / 2)
            num[j] = -deriv * (2 * pi) ** r / mp.factorial(r)
            den[j] = (-1) ** r * (2 * pi) ** j / mp.factorial(j)
        q = [mp.mpf(0)] * n_coef
        for j in range(n_coef):
            acc = num[j]
            for i in range(1, j + 1):
                acc -= den[i] * q[j - i]
            q[j] = acc / den[0]
        return np.array([float(c) for c in q])


def _poly_derivative(coefs: np.ndarray, order: int) -> np.ndarray:
    return np.polynomial.polynomial.polyder(coefs, order) if order else coefs


@lru_cache(maxsize=None)
def _rs_remainder_polys() -> tuple:
    """Polynomials in x = p - 1/2 for C_0 .. C_4."""
    c = _psi_taylor()
    d = [_poly_derivative(c, k) for k in range(13)]
    pi2 = math.pi**2
    pi4, pi6, pi8 = pi2**2, pi2**3, pi2**4

    def comb(*terms):
        size = max(len(v) for _, v in terms)
        out = np.zeros(size)
        for w, v in terms:
            out[: len(v)] += w * v
        return out

    C0 = d[0]
    C1 = comb((-1 / (96 * pi2), d[3]))
    C2 = comb((1 / (64 * pi2), d[2]), (1 / (18432 * pi4), d[6]))
    C3 = comb((-1 / (64 * pi2), d[1]), (-1 / (3840 * pi4), d[5]), (-1 / (5308416 * pi6), d[9]))
    C4 = comb((1 / (128 * pi2), d[0]), (19 / (24576 * pi4), d[4]),
              (11 / (5898240 * pi6), d[8]), (1 / (2038431744 * pi8), d[12]))
    return C0, C1, C2, C3, C4


def _rs_main_sum(t: np.ndarray, theta: np.ndarray, N: np.ndarray) -> np.ndarray:
    """``2 sum_{n <= N(t)} n^-1/2 cos(theta - t log n)`` with t sorted ascending."""
    out = np.zeros_like(t)
    start = 0
    size = t.size
    while start < size:
        step = max(1, _BLOCK_ELEMS // int(N[start]))
        stop = min(size, start + step)
        nmax = int(N[stop - 1])
        n = np.arange(1, nmax + 1, dtype=np.float64)
        logn = np.log(n)
        w = 1.0 / np.sqrt(n)
        tb = t[start:stop, None]
        terms = np.cos(theta[start:stop, None] - tb * logn[None, :]) * w[None, :]
        nmin = int(N[start])
        if nmin < nmax:
            mask = n[None, :] <= N[start:stop, None]
            terms = np.where(mask, terms, 0.0)
        out[start:stop] = 2.0 * terms.sum(axis=1)
        start = stop
    return out


def hardy_z(t, rs_correction_terms: int = 4):
    """Hardy's Z-function by the Riemann-Siegel formula, for t >= 10."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t_arr < RS_MIN_T) or np.any(t_arr > T_MAX):
        raise ZetaRangeError("Riemann-Siegel path needs 10 <= t <= 1e8")
    order = np.argsort(t_arr, kind="stable")
    ts = t_arr[order]
    a = np.sqrt(ts / _TWO_PI)
    N = np.floor(a)
    p = a - N
    theta = riemann_siegel_theta(ts)
    z = _rs_main_sum(ts, theta, N)
    if rs_correction_terms > 0:
        x = p - 0.5
        polys = _rs_remainder_polys()
        inv_a = 1.0 / a
        rem = np.zeros_like(ts)
        scale = np.ones_like(ts)
        for k in range(rs_correction_terms):
            rem += np.polynomial.polynomial.polyval(x, polys[k]) * scale
            scale = scale * inv_a
        sign = np.where(N.astype(np.int64) % 2 == 1, 1.0, -1.0)
        z = z + sign * rem / np.sqrt(a)
    out = np.empty_like(z)
    out[order] = z
    if np.ndim(t) == 0:
        return float(out[0])
    return out.reshape(np.shape(t))


# ---------------------------------------------------------------------------
# Euler-Maclaurin


@lru_cache(maxsize=None)
def _bernoulli_even(order: int) -> np.ndarray:
    b = bernoulli(2 * order + 2)
    return np.array([b[2 * j] / math.factorial(2 * j) for j in range(order + 2)])


def em_error_bound(s: complex, n_terms: int, order: int) -> float:
    """Remainder bound for Euler-Maclaurin with ``n_terms`` and ``order`` corrections.

    ``|R| <= |s (s+1) ... (s+2m)| |B_{2m+2}| / ((2m+2)! (sigma+2m+1)) N^(-sigma-2m-1)``.
    """
    sigma = s.real
    m = order
    poch = 1.0
    for j in range(2 * m + 1):
        poch *= abs(s + j)
    b = abs(_bernoulli_even(m)[m + 1])
    return poch * b / (sigma + 2 * m + 1) * float(n_terms) ** (-sigma - 2 * m - 1)


def zeta_euler_maclaurin(s: complex, n_terms: int | None = None, order: int = 12) -> complex:
    """zeta(s) for Re s > -2m by Euler-Maclaurin summation.

    With ``n_terms=None`` the number of summands is ``max(ceil(|Im s|), 32)``.
    """
    s = complex(s)
    if s == 1:
        raise ValueError("pole at s = 1")
    N = n_terms if n_terms is not None else max(int(math.ceil(abs(s.imag))), 32)
    n = np.arange(1, N, dtype=np.float64)
    logn = np.log(n)
    head = np.sum(np.exp(-s * logn))
    logN = math.log(N)
    NS = np.exp(-s * logN)
    total = head + N * NS / (s - 1) + 0.5 * NS
    b = _bernoulli_even(order)
    poch = s
    powN = NS / N  # N^(-s-1)
    for j in range(1, order + 1):
        total += b[j] * poch * powN
        poch *= (s + 2 * j - 1) * (s + 2 * j)
        powN /= N * N
    return complex(total)


# ---------------------------------------------------------------------------
# public evaluation


def _check_range(t_arr: np.ndarray):
    if not np.all(np.isfinite(t_arr)) or np.any(np.abs(t_arr) > T_MAX):
        raise ZetaRangeError(f"|t| must be finite and <= {T_MAX:g}")


def zeta_half_line(t, opts: ZetaEvalOptions = DEFAULT_OPTIONS):
    """zeta(1/2 + it) for real t (scalar or array).

    The Riemann-Siegel path is used for ``|t| >= 10``; smaller heights, and
    every height when ``opts.method == "euler_maclaurin"``, go through the
    Euler-Maclaurin reference.  Negative t use ``zeta(conj s) = conj zeta(s)``.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    _check_range(t_arr)
    a = np.abs(t_arr)
    out = np.empty(t_arr.shape, dtype=np.complex128)
    use_rs = (a >= RS_MIN_T) if opts.method == "riemann_siegel" else np.zeros(a.shape, bool)
    if np.any(use_rs):
        ar = a[use_rs]
        z = hardy_z(ar, opts.rs_correction_terms)
        out[use_rs] = z * np.exp(-1j * riemann_siegel_theta(ar))
    for idx in np.flatnonzero(~use_rs):
        n_terms = opts.em_terms
        if n_terms is not None:
            n_terms = max(n_terms, int(math.ceil(a[idx])))
        out[idx] = zeta_euler_maclaurin(0.5 + 1j * a[idx], n_terms, opts.em_bernoulli_order)
    neg = t_arr < 0
    out[neg] = np.conj(out[neg])
    if np.ndim(t) == 0:
        return complex(out[0])
    return out.reshape(np.shape(t))


def log_shifted_abs(t, config: ShiftConfig, opts: ZetaEvalOptions = DEFAULT_OPTIONS):
    """``sum_i k_i log|zeta(1/2 + i(t + alpha_i))|``; ``-inf`` at an exact zero."""
    t_arr = np.asarray(t, dtype=np.float64)
    total = np.zeros(np.shape(t_arr))
    with np.errstate(divide="ignore"):
        for k, alpha in zip(config.exponents, config.shifts):
            total = total + k * np.log(np.abs(zeta_half_line(t_arr + alpha, opts)))
    if np.ndim(t) == 0:
        return float(total)
    return total


def shifted_product(t, config: ShiftConfig, opts: ZetaEvalOptions = DEFAULT_OPTIONS):
    """``prod_i |zeta(1/2 + i(t + alpha_i))|^(2 k_i)``."""
    t_arr = np.asarray(t, dtype=np.float64)
    total = np.ones(np.shape(t_arr))
    for k, alpha in zip(config.exponents, config.shifts):
        total = total * np.abs(zeta_half_line(t_arr + alpha, opts)) ** (2 * k)
    if np.ndim(t) == 0:
        return float(total)
    return total
