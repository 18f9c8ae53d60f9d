"""Special functions and small exact kernels.

Barnes G at positive integers, the Keating-Snaith arithmetic factor a(k),
the sinc function ``f(z) = sin(pi z)/(pi z)`` with its derivatives,
Vandermonde products and a small pivoted determinant that works for any
scalar type (float, complex, ``mpmath.mpf``/``mpc``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "SincSeries",
    "barnes_g",
    "barnes_ratio",
    "arithmetic_factor_a",
    "sinc",
    "sinc_derivative",
    "vandermonde",
    "dense_determinant",
    "SINC_SWITCH",
    "SINC_MAX_ORDER",
]

#: Below this |z| the Taylor series is used for sinc derivatives.
SINC_SWITCH = 0.1
#: Largest derivative order served by :func:`sinc_derivative` in double precision.
SINC_MAX_ORDER = 12
#: Constant in the prime-product tail bound exp(C k^4 / (P log P)) - 1.
A_TAIL_CONSTANT = 1.0


def barnes_g(n: int) -> int:
    """Barnes G-function at a positive integer, exactly.

    Uses ``G(1) = 1`` and ``G(z+1) = Gamma(z) G(z)``, so that
    ``G(n) = prod_{i=1}^{n-2} i!``.  Python integers never overflow; callers
    wanting a float should use :func:`barnes_ratio` or ``float()``, which raises
    ``OverflowError`` above roughly ``n = 100``.
    """
    if isinstance(n, bool) or int(n) != n:
        raise TypeError("barnes_g is only defined here for integer arguments")
    n = int(n)
    if n < 1:
        raise ValueError(f"barnes_g requires n >= 1, got {n}")
    g = 1
    fact = 1
    for i in range(1, n - 1):
        fact *= i
        g *= fact
    return g


def barnes_ratio(k: int) -> float:
    """``G(k+1)^2 / G(2k+1)``, the leading constant of the 2k-th CUE moment."""
    return float(Fraction(barnes_g(k + 1) ** 2, barnes_g(2 * k + 1)))


def arithmetic_factor_a(k: float, prime_cutoff: int = 10**6, series_cutoff: int = 200):
    """Truncated Euler product for the arithmetic factor ``a(k)``.

    Parameters
    ----------
    k : float
        Positive real exponent.
    prime_cutoff : int
        Product over primes ``p <= prime_cutoff``.
    series_cutoff : int
        Local series summed for ``0 <= m <= series_cutoff``.

    Returns
    -------
    value : float
    tail : float
        Bound on ``|a(k) - value|``.  It combines a geometric majorant for the
        local-series tails with ``exp(C k^4 / (P log P)) - 1`` for the primes
        beyond the cutoff; the latter follows from
        ``log(local factor) = -k^2 (k-1)^2 / (4 p^2) + O(k^6 p^-3)`` and is only
        meaningful once ``prime_cutoff`` is large compared with ``k^2``.
    """
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    if prime_cutoff < 2 or series_cutoff < 1:
        raise ValueError("prime_cutoff >= 2 and series_cutoff >= 1 required")
    from .arithmetic import sieve

    primes = sieve(int(prime_cutoff)).primes.astype(np.float64)
    m = np.arange(series_cutoff + 1, dtype=np.float64)
    # c_m = Gamma(m+k) / (m! Gamma(k)) via its ratio recurrence
    ratios = np.ones_like(m)
    ratios[1:] = (m[:-1] + k) / m[1:]
    coef_sq = np.cumprod(ratios) ** 2

    log_value = 0.0
    log_series_err = 0.0
    chunk = 4096
    m_next = series_cutoff + 1
    c_next_sq = coef_sq[-1] * ((series_cutoff + k) / m_next) ** 2
    rho_coef = max(((m_next + k) / (m_next + 1)) ** 2, 1.0)
    for start in range(0, primes.size, chunk):
        p = primes[start:start + chunk]
        inv = 1.0 / p
        series = np.polynomial.polynomial.polyval(inv, coef_sq)
        log_value += float(np.sum(k * k * np.log1p(-inv) + np.log(series)))
        rho = rho_coef * inv
        if np.any(rho >= 1.0):
            raise ValueError("series_cutoff too small for a geometric tail bound")
        tail = c_next_sq * inv ** m_next / (1.0 - rho)
        log_series_err += float(np.sum(np.log1p(tail / series)))
    value = math.exp(log_value)
    prime_tail = math.expm1(A_TAIL_CONSTANT * k**4 / (prime_cutoff * math.log(prime_cutoff)))
    total_rel = math.expm1(log_series_err) + prime_tail + math.expm1(log_series_err) * prime_tail
    return value, value * total_rel


@dataclass(frozen=True)
class SincSeries:
    """Taylor coefficients ``(-1)^n pi^(2n) / (2n+1)!`` of ``sin(pi z)/(pi z)``.

    ``coefficients[n]`` multiplies ``z^(2n)``; ``truncation_order`` is the
    highest power of ``z`` kept.
    """

    truncation_order: int
    coefficients: tuple = field(init=False)

    def __post_init__(self):
        n_terms = self.truncation_order // 2 + 1
        coefs = []
        c = 1.0
        for n in range(n_terms):
            coefs.append(c)
            c *= -(math.pi**2) / ((2 * n + 2) * (2 * n + 3))
        object.__setattr__(self, "coefficients", tuple(coefs))

    def derivative(self, order: int, z):
        """``f^(order)(z)`` from the truncated series (accurate for small |z|)."""
        if 2 * order + 4 > self.truncation_order:
            raise ValueError("truncation_order too small for this derivative order")
        z = np.asarray(z, dtype=np.float64)
        out = np.zeros_like(z)
        for n, c in enumerate(self.coefficients):
            power = 2 * n - order
            if power < 0:
                continue
            falling = math.perm(2 * n, order)
            out = out + c * falling * z**power
        return out


@lru_cache(maxsize=None)
def _sinc_series(order: int) -> SincSeries:
    return SincSeries(truncation_order=2 * order + 30)


def _sinc_closed_form(order: int, z):
    # Leibniz rule on sin(pi z) * (pi z)^-1
    total = np.zeros_like(z)
    for j in range(order + 1):
        r = order - j
        sin_part = math.pi**j * np.sin(math.pi * z + j * math.pi / 2)
        inv_part = (-1) ** r * math.factorial(r) / (math.pi * z ** (r + 1))
        total = total + math.comb(order, j) * sin_part * inv_part
    return total


def sinc_derivative(order: int, z):
    """Derivative of ``f(z) = sin(pi z)/(pi z)`` of the given order.

    Taylor series for ``|z| < SINC_SWITCH`` (no cancellation near 0), the
    differentiated closed form elsewhere.  Accepts scalars or arrays.
    """
    if order < 0 or order > SINC_MAX_ORDER:
        raise ValueError(f"order must be in [0, {SINC_MAX_ORDER}], got {order}")
    z_arr = np.asarray(z, dtype=np.float64)
    # evaluate at |z| so the parity f^(n)(-z) = (-1)^n f^(n)(z) holds exactly
    a = np.abs(z_arr)
    small = a < SINC_SWITCH
    out = np.empty_like(z_arr)
    if np.any(small):
        out[small] = _sinc_series(order).derivative(order, a[small])
    if np.any(~small):
        out[~small] = _sinc_closed_form(order, a[~small])
    if order % 2:
        out = np.where(z_arr < 0, -out, out)
    if np.ndim(z) == 0:
        return float(out)
    return out


def sinc(z):
    return sinc_derivative(0, z)


def vandermonde(xs: Sequence) -> float:
    """``prod_{j<k} (x_k - x_j)``; 1 for a single point."""
    xs = list(xs)
    if not xs:
        raise ValueError("vandermonde needs at least one point")
    out = 1
    for k in range(len(xs)):
        for j in range(k):
            out *= xs[k] - xs[j]
    return out


def dense_determinant(matrix):
    """Determinant by Gaussian elimination with partial pivoting.

    Works on any square table of numbers supporting ``abs`` and field
    arithmetic, so it is usable with ``mpmath`` scalars for extended precision.
    Dimensions 1 and 2 use the explicit formula.
    """
    rows = [list(r) for r in matrix]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError("dense_determinant needs a non-empty square matrix")
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    det = 1
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(rows[r][col]))
        if rows[pivot][col] == 0:
            return 0 * rows[0][0]
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
            det = -det
        piv = rows[col][col]
        det = det * piv
        for r in range(col + 1, n):
            factor = rows[r][col] / piv
            if factor == 0:
                continue
            row_r, row_c = rows[r], rows[col]
            for c in range(col + 1, n):
                row_r[c] = row_r[c] - factor * row_c[c]
    return det
