"""Sieve-backed prime and divisor machinery.

Everything here is array based: a :class:`PrimeTable` holds the
smallest-prime-factor table, Dirichlet convolutions run in O(x log x) on
numpy arrays, and the prime sums are vectorised over t.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .zeta import ShiftConfig

__all__ = [
    "PrimeTable",
    "DirichletCoefficients",
    "sieve",
    "cached_sieve",
    "von_mangoldt",
    "dirichlet_convolve",
    "divisor_k",
    "shifted_coefficients",
    "prime_cos_sum",
    "dirichlet_poly_s1_s2",
    "prime_power_tail",
    "h_local_factor",
    "h_correction_product",
    "mean_square_coefficients",
    "write_prime_cache",
    "read_prime_cache",
]

SIEVE_MAX = 10**8
CACHE_MAGIC = b"ZSPT"
CACHE_VERSION = 1


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Primes up to ``limit`` with a smallest-prime-factor table.

    ``spf[n]`` is the least prime dividing n for ``2 <= n <= limit``
    (``spf[0] = spf[1] = 0``).
    """

    limit: int
    primes: np.ndarray
    spf: np.ndarray

    def _check(self, n: int):
        if not 1 <= n <= self.limit:
            raise ValueError(f"n = {n} outside table range [1, {self.limit}]")

    def is_prime(self, n: int) -> bool:
        self._check(n)
        return n >= 2 and int(self.spf[n]) == n

    def smallest_prime_factor(self, n: int) -> int:
        self._check(n)
        if n < 2:
            raise ValueError("1 has no prime factor")
        return int(self.spf[n])

    def factorize(self, n: int) -> dict:
        """``{p: e}`` with ``n = prod p^e``."""
        self._check(n)
        out: dict = {}
        while n > 1:
            p = int(self.spf[n])
            out[p] = out.get(p, 0) + 1
            n //= p
        return out

    def primes_upto(self, x: float) -> np.ndarray:
        return self.primes[: np.searchsorted(self.primes, x, side="right")]

    def von_mangoldt_array(self) -> np.ndarray:
        """``Lambda(n)`` for ``0 <= n <= limit`` (index 0 unused)."""
        lam = np.zeros(self.limit + 1)
        for p in self.primes:
            p = int(p)
            lp = math.log(p)
            q = p
            while q <= self.limit:
                lam[q] = lp
                if q > self.limit // p:
                    break
                q *= p
        return lam


def sieve(limit: int) -> PrimeTable:
    """Smallest-prime-factor sieve up to ``limit`` (2 <= limit <= 1e8)."""
    limit = int(limit)
    if not 2 <= limit <= SIEVE_MAX:
        raise ValueError(f"sieve limit must be in [2, {SIEVE_MAX}], got {limit}")
    dtype = np.int32 if limit < 2**31 else np.int64
    spf = np.zeros(limit + 1, dtype=dtype)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    rest = np.flatnonzero(spf == 0)
    rest = rest[rest >= 2]
    spf[rest] = rest
    primes = rest.astype(np.int64)
    spf.setflags(write=False)
    primes.setflags(write=False)
    return PrimeTable(limit=limit, primes=primes, spf=spf)


def write_prime_cache(table: PrimeTable, path) -> None:
    """Write the primality bit array: ``ZSPT``, version byte, u64 LE limit, packed bits.

    Bit n (little-endian within each byte) is set iff n is prime, n = 0..limit.
    """
    bits = np.zeros(table.limit + 1, dtype=bool)
    bits[table.primes] = True
    payload = np.packbits(bits, bitorder="little").tobytes()
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC + bytes([CACHE_VERSION]) + struct.pack("<Q", table.limit) + payload)


def read_prime_cache(path) -> PrimeTable:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC or data[4] != CACHE_VERSION:
        raise ValueError(f"{path} is not a version-{CACHE_VERSION} prime cache")
    (limit,) = struct.unpack("<Q", data[5:13])
    bits = np.unpackbits(np.frombuffer(data[13:], dtype=np.uint8), bitorder="little")
    primes = np.flatnonzero(bits[: limit + 1]).astype(np.int64)
    # rebuild spf from the primes; cheaper than re-sieving only in I/O terms, but
    # it keeps the table contract identical whatever the source
    spf = np.zeros(limit + 1, dtype=np.int32 if limit < 2**31 else np.int64)
    for p in primes[: np.searchsorted(primes, math.isqrt(limit), side="right")]:
        block = spf[p * p :: p]
        block[block == 0] = p
    spf[primes] = primes
    spf.setflags(write=False)
    primes.setflags(write=False)
    return PrimeTable(limit=int(limit), primes=primes, spf=spf)


@lru_cache(maxsize=4)
def cached_sieve(limit: int) -> PrimeTable:
    """Sieve, memoised in process and on disk under ``$ZETASHIFT_CACHE_DIR`` if set."""
    cache_dir = os.environ.get("ZETASHIFT_CACHE_DIR")
    if cache_dir:
        path = Path(cache_dir) / f"primes_{limit}.zspt"
        if path.exists():
            return read_prime_cache(path)
        table = sieve(limit)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_prime_cache(table, path)
        return table
    return sieve(limit)


def von_mangoldt(n: int, table: PrimeTable) -> float:
    """``log p`` if n is a power of the prime p, else 0."""
    table._check(n)
    if n < 2:
        return 0.0
    p = int(table.spf[n])
    while n % p == 0:
        n //= p
    return math.log(p) if n == 1 else 0.0


# ---------------------------------------------------------------------------
# Dirichlet convolution


def dirichlet_convolve(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``h(n) = sum_{de=n} f(d) g(e)`` for ``1 <= n <= x``; arrays indexed from 0 (unused).

    Pairs (d, e) are split on ``min(d, e) <= sqrt(x)`` so the Python loop is
    O(sqrt x) while the numpy work is O(x log x).
    """
    x = min(len(f), len(g)) - 1
    dtype = np.result_type(f, g)
    h = np.zeros(x + 1, dtype=dtype)
    r = math.isqrt(x)
    for d in range(1, r + 1):
        # d the smaller factor: e from d to x // d
        hi = x // d
        if hi < d:
            break
        e = np.arange(d, hi + 1)
        h[d * e] += f[d] * g[d : hi + 1]
        # e the smaller factor (strictly): d' = multiples ranging over (d, x // d]
        if hi > d:
            dd = np.arange(d + 1, hi + 1)
            h[d * dd] += g[d] * f[d + 1 : hi + 1]
    return h


def divisor_k(k: int, up_to: int) -> np.ndarray:
    """``d_k(n)`` for ``0 <= n <= up_to`` (index 0 is 0), by k-1 convolutions with 1."""
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    ones = np.ones(up_to + 1, dtype=np.int64)
    ones[0] = 0
    d = ones.copy()
    for _ in range(int(k) - 1):
        d = dirichlet_convolve(d, ones)
    return d


@dataclass(frozen=True, eq=False)
class DirichletCoefficients:
    """Coefficients ``a_j`` (1 <= j <= x) of the truncated product and ``D(j) = |a_j|^2``.

    Arrays are indexed by j directly; index 0 holds 0.
    """

    x: int
    config: ShiftConfig
    a: np.ndarray
    D: np.ndarray


def shifted_coefficients(x: int, config: ShiftConfig) -> DirichletCoefficients:
    """``a_j = sum_{n_1...n_m = j} prod_i d_{k_i}(n_i) n_i^(-i alpha_i)`` for j <= x."""
    ks = config.integer_exponents()
    x = int(x)
    if not 1 <= x <= 10**7:
        raise ValueError("x must be in [1, 1e7]")
    n = np.arange(x + 1, dtype=np.float64)
    logn = np.log(np.maximum(n, 1.0))
    a = None
    cache: dict = {}
    for k, alpha in zip(ks, config.shifts):
        if k not in cache:
            cache[k] = divisor_k(k, x).astype(np.float64)
        tw = cache[k] * np.exp(-1j * alpha * logn)
        tw[0] = 0
        a = tw if a is None else dirichlet_convolve(a, tw)
    D = np.abs(a) ** 2
    return DirichletCoefficients(x=x, config=config, a=a, D=D)


def mean_square_coefficients(coeffs: DirichletCoefficients) -> float:
    """``sum_{j <= x} D(j) / j``."""
    j = np.arange(1, coeffs.x + 1, dtype=np.float64)
    return float(np.sum(coeffs.D[1:] / j))


# ---------------------------------------------------------------------------
# prime sums


def prime_cos_sum(a: float, z: float, table: PrimeTable):
    """``sum_{p <= z} cos(a log p) / p`` and the main term ``log min(1/|a|, log z)``.

    The returned bound excludes the O(1); at a = 0 it is ``log log z``.
    """
    if z > table.limit:
        raise ValueError("z exceeds the prime table")
    p = table.primes_upto(z).astype(np.float64)
    s = float(np.sum(np.cos(a * np.log(p)) / p))
    logz = math.log(z)
    cap = logz if a == 0 else min(1.0 / abs(a), logz)
    return s, math.log(cap)


def _prime_weights(x: float, table: PrimeTable, config: ShiftConfig):
    p = table.primes_upto(x).astype(np.float64)
    logp = np.log(p)
    logx = math.log(x)
    coef = np.zeros(p.size, dtype=np.complex128)
    for k, alpha in zip(config.exponents, config.shifts):
        coef += k * np.exp(-1j * alpha * logp)
    w = coef * np.exp(-(0.5 + 0.5 / logx) * logp) * (np.log(x / p) / logx)
    return p, logp, w


def _twisted_sum(t: np.ndarray, logp: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.zeros(t.shape, dtype=np.complex128)
    if logp.size == 0:
        return out
    block = max(1, (1 << 21) // logp.size)
    flat_t = t.ravel()
    flat_out = out.ravel()
    for s in range(0, flat_t.size, block):
        tb = flat_t[s : s + block]
        flat_out[s : s + block] = np.exp(-1j * np.outer(tb, logp)) @ w
    return flat_out.reshape(t.shape)


def dirichlet_poly_s1_s2(t, config: ShiftConfig, x: float, z: float, table: PrimeTable):
    """The split prime polynomials ``S_1(t)`` (p <= z) and ``S_2(t)`` (z < p <= x).

    Both are ``|sum_p (sum_i k_i p^(-i alpha_i)) p^(-1/2 - 0.5/log x - it) log(x/p)/log x|``
    over their respective prime ranges.  Vectorised over t.
    """
    if not z <= x <= table.limit:
        raise ValueError("need z <= x <= table.limit")
    t_arr = np.asarray(t, dtype=np.float64)
    p, logp, w = _prime_weights(x, table, config)
    small = p <= z
    s1 = np.abs(_twisted_sum(t_arr, logp[small], w[small]))
    s2 = np.abs(_twisted_sum(t_arr, logp[~small], w[~small]))
    if np.ndim(t) == 0:
        return float(s1), float(s2)
    return s1, s2


def prime_power_tail(t, x: float, sigma: float, table: PrimeTable,
                     min_power: int = 2, max_power: int | None = None):
    """``|sum_{p^j <= x, j >= 2} Lambda(p^j) p^(-j(sigma+it)) (log(x/p^j)/log x) / log(p^j)|``.

    ``min_power``/``max_power`` restrict j, e.g. to separate squares from
    higher powers.
    """
    if sigma < 0.5:
        raise ValueError("sigma must be >= 1/2")
    if x > float(table.limit) ** 2:
        raise ValueError("x exceeds table.limit^2")
    t_arr = np.asarray(t, dtype=np.float64)
    if x < 4:
        return 0.0 if np.ndim(t) == 0 else np.zeros(t_arr.shape)
    logx = math.log(x)
    primes = table.primes_upto(math.sqrt(x)).astype(np.float64)
    log_n, weight = [], []
    j = min_power
    while True:
        if max_power is not None and j > max_power:
            break
        pj = primes[primes ** j <= x]
        if pj.size == 0:
            break
        ln = j * np.log(pj)
        log_n.append(ln)
        # Lambda(n) / log n = 1/j
        weight.append(np.exp(-sigma * ln) * (logx - ln) / logx / j)
        j += 1
    if not log_n:
        return 0.0 if np.ndim(t) == 0 else np.zeros(t_arr.shape)
    ln = np.concatenate(log_n)
    w = np.concatenate(weight).astype(np.complex128)
    val = np.abs(_twisted_sum(t_arr, ln, w))
    if np.ndim(t) == 0:
        return float(val)
    return val


def _local_coefficients(p: int, config: ShiftConfig, nu_max: int) -> np.ndarray:
    """``a_{p^nu}`` for nu = 0..nu_max: coefficients of prod_i (1 - p^(-i alpha_i) X)^(-k_i)."""
    out = np.zeros(nu_max + 1, dtype=np.complex128)
    out[0] = 1.0
    logp = math.log(p)
    for k, alpha in zip(config.exponents, config.shifts):
        u = np.exp(-1j * alpha * logp)
        # binomial series (1 - uX)^(-k): coefficient C(nu + k - 1, nu) u^nu
        series = np.empty(nu_max + 1, dtype=np.complex128)
        c = 1.0
        for nu in range(nu_max + 1):
            series[nu] = c * u**nu
            c *= (nu + k) / (nu + 1)
        out = np.convolve(out, series)[: nu_max + 1]
    return out


def h_local_factor(s: complex, p: int, config: ShiftConfig, tol: float = 1e-15) -> complex:
    """Euler factor ``sum_nu D(p^nu) p^(-nu(1+s))`` of ``H(s) = sum_j D(j) j^(-1-s)``.

    Summed until the terms fall below ``tol`` (relative) and are decreasing.
    """
    s = complex(s)
    if s.real <= 0:
        raise ValueError("H(s) local factor diverges for Re(s) <= 0")
    nu_max = 16
    while True:
        a = _local_coefficients(p, config, nu_max)
        nu = np.arange(nu_max + 1)
        terms = np.abs(a) ** 2 * np.exp(-nu * (1 + s) * math.log(p))
        total = complex(np.sum(terms))
        tail = abs(terms[-1])
        if tail < tol * max(abs(total), 1.0) and abs(terms[-1]) <= abs(terms[-2]):
            return total
        nu_max *= 2
        if nu_max > 4096:
            raise ArithmeticError("local factor did not converge")


def h_correction_product(s: complex, config: ShiftConfig, table: PrimeTable,
                         prime_cutoff: int | None = None) -> complex:
    """Partial Euler product of H(s) divided by its predicted zeta-power factors.

    The prediction is ``zeta(s+1)^(sum k_i^2) prod_{i<j} zeta(s+1+i d_ij)^(k_i k_j)
    zeta(s+1-i d_ij)^(k_i k_j)`` with ``d_ij = alpha_i - alpha_j``, each zeta taken
    as its own Euler product over the same primes.  The ratio is the partial
    product of the correction G(s); it should converge as the cutoff grows.
    """
    s = complex(s)
    cutoff = table.limit if prime_cutoff is None else prime_cutoff
    log_ratio = 0j
    for p in table.primes_upto(cutoff):
        p = int(p)
        lp = math.log(p)
        log_pred = -config.sum_sq * np.log(1 - np.exp(-(1 + s) * lp))
        for i, j, kk, _ in config.pairs():
            d = config.shifts[i] - config.shifts[j]
            log_pred += -kk * (np.log(1 - np.exp(-(1 + s + 1j * d) * lp))
                               + np.log(1 - np.exp(-(1 + s - 1j * d) * lp)))
        log_ratio += np.log(h_local_factor(s, p, config)) - log_pred
    return complex(np.exp(log_ratio))
