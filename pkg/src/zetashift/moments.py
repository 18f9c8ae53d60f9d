"""Experiment layer: shifted moments, level sets and the Dirichlet-polynomial checks.

All integrals live on ``[T, 2T]``.  Zeta values come from the Riemann-Siegel
engine; Dirichlet polynomials on uniform t-grids are evaluated with a
type-1 NUFFT (direct summation is kept as the oracle).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .arithmetic import PrimeTable, cached_sieve, mean_square_coefficients, shifted_coefficients
from .rmt import COALESCING_MAX, SEPARATED_MIN, confluent_constant
from .zeta import (DEFAULT_OPTIONS, ShiftConfig, ZetaEvalOptions, log_shifted_abs,
                   shifted_product, zeta_half_line)

__all__ = [
    "BoundParameters",
    "MomentResult",
    "lambda0",
    "variance_scale_w",
    "default_grid_step",
    "shifted_moment",
    "moment_on_interval",
    "moment_dyadic",
    "conjectured_leading",
    "level_values",
    "measure_level_set",
    "theorem_bound",
    "layer_cake_check",
    "prop_main_check",
    "prime_moment_check",
    "dirichlet_poly_on_grid",
    "a_mean_square",
    "smoothed_l_value",
    "bump_kernel",
    "kernel_fourier",
    "s1_kernel_integral",
]

log = logging.getLogger(__name__)

_CHUNK = 1 << 18
V_RANGE = (-40.0, 40.0)
V_STEP = 1e-3


# ---------------------------------------------------------------------------
# parameters


def lambda0() -> float:
    """Positive root of ``exp(-l) = l + l^2/2``."""
    return optimize.brentq(lambda l: math.exp(-l) - l - 0.5 * l * l, 0.1, 1.0, xtol=1e-15, rtol=1e-15)


def variance_scale_w(T: float, config: ShiftConfig) -> float:
    """``W = (sum k_i^2) log log T + sum_{i<j} 2 k_i k_j log min(1/|a_i - a_j|, log T)``."""
    logT = math.log(T)
    w = config.sum_sq * math.log(logT)
    for _, _, kk, d in config.pairs():
        cap = logT if d == 0 else min(1.0 / d, logT)
        w += 2.0 * kk * math.log(cap)
    return w


@dataclass(frozen=True)
class BoundParameters:
    """Parameters of the level-set bound at height T and level V."""

    T: float
    V: float
    W: float
    A: float
    x: float
    z: float
    lambda0: float
    R: float = 1.0

    @classmethod
    def from_config(cls, T: float, V: float, config: ShiftConfig) -> "BoundParameters":
        W = variance_scale_w(T, config)
        R = config.R
        logW = math.log(W) if W > 1 else float("nan")
        if V <= W:
            # also used below 10 sqrt(log log T), where the three ranges are silent
            A = 0.5 * R * logW
        elif V <= 0.5 * W * logW:
            A = 0.5 * R * W * logW / V
        else:
            A = R
        loglogT = math.log(math.log(T))
        x = math.exp(math.log(T) * A / V) if V > 0 else float("inf")
        z = math.exp(math.log(x) / loglogT) if math.isfinite(x) else float("inf")
        return cls(T=T, V=V, W=W, A=A, x=x, z=z, lambda0=lambda0(), R=R)

    @property
    def lower_edge(self) -> float:
        return 10.0 * math.sqrt(math.log(math.log(self.T)))


@dataclass(frozen=True)
class MomentResult:
    value: float
    quadrature_error_estimate: float
    grid_step: float
    T: float
    config: ShiftConfig
    a: float = float("nan")
    b: float = float("nan")


# ---------------------------------------------------------------------------
# quadrature


def default_grid_step(T: float) -> float:
    return min(0.02, 1.0 / (4.0 * math.log(T)))


def _eval_grid(fn, t: np.ndarray, threads: int | None):
    chunks = [t[s:s + _CHUNK] for s in range(0, t.size, _CHUNK)]
    if threads is None or threads <= 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts)


def _simpson_pair(f: np.ndarray, h: float):
    """Composite Simpson at step h and at 2h (every other node); len(f) - 1 divisible by 4."""
    def simpson(g, step):
        return step / 3.0 * (g[0] + g[-1] + 4.0 * g[1:-1:2].sum() + 2.0 * g[2:-1:2].sum())
    return simpson(f, h), simpson(f[::2], 2 * h)


def _moment_interval(a: float, b: float, config: ShiftConfig, grid_step: float,
                     opts: ZetaEvalOptions, threads: int | None):
    n = int(math.ceil((b - a) / grid_step))
    n += (-n) % 4
    h = (b - a) / n
    t = a + h * np.arange(n + 1)
    f = _eval_grid(lambda c: shifted_product(c, config, opts), t, threads)
    fine, coarse = _simpson_pair(f, h)
    return fine, abs(fine - coarse), h


def moment_on_interval(a: float, b: float, config: ShiftConfig, grid_step: float,
                       opts: ZetaEvalOptions = DEFAULT_OPTIONS,
                       threads: int | None = None) -> MomentResult:
    """Simpson quadrature of the shifted product over ``[a, b]``."""
    if not b > a:
        raise ValueError("need b > a")
    value, err, h = _moment_interval(a, b, config, grid_step, opts, threads)
    return MomentResult(value=value, quadrature_error_estimate=err, grid_step=h, T=a,
                        config=config, a=a, b=b)


def shifted_moment(T: float, config: ShiftConfig, grid_step: float | None = None,
                   opts: ZetaEvalOptions = DEFAULT_OPTIONS, threads: int | None = None) -> MomentResult:
    """``int_T^{2T} prod_i |zeta(1/2 + i(t + alpha_i))|^{2 k_i} dt`` by composite Simpson.

    The error estimate is ``|S_h - S_2h|`` with both rules on one grid.
    """
    if T < 100:
        raise ValueError("T must be >= 100")
    step = default_grid_step(T) if grid_step is None else float(grid_step)
    if not 0 < step <= 0.1:
        raise ValueError("grid_step must be in (0, 0.1]")
    return moment_on_interval(T, 2 * T, config, step, opts, threads)


def moment_dyadic(T: float, config: ShiftConfig, grid_step: float | None = None,
                  t_min: float = 100.0, opts: ZetaEvalOptions = DEFAULT_OPTIONS,
                  threads: int | None = None) -> MomentResult:
    """The moment over ``[0, T]`` as dyadic blocks ``[T/2^(j+1), T/2^j]`` plus a base block."""
    step = default_grid_step(max(T, 100.0)) if grid_step is None else float(grid_step)
    total, err = 0.0, 0.0
    hi = float(T)
    while hi / 2 >= t_min:
        v, e, _ = _moment_interval(hi / 2, hi, config, step, opts, threads)
        total += v
        err += e
        hi /= 2
    v, e, _ = _moment_interval(0.0, hi, config, step, opts, threads)
    return MomentResult(value=total + v, quadrature_error_estimate=err + e, grid_step=step,
                        T=T, config=config, a=0.0, b=T)


def conjectured_leading(T: float, k: int, delta: float, normalized: bool = False):
    """Leading term of the shifted 2k-th moment with shift difference ``delta``.

    By default the three regimes carry no constants (coalescing and critical
    differ by ``C_k``).  With ``normalized=True`` the random-matrix constants
    ``G^2(2k+1)/G(4k+1)`` and ``G^4(k+1)/G^2(2k+1)`` are attached to the outer
    regimes, which makes the value continuous in ``delta log T`` up to
    finite-c corrections.
    """
    from .special import barnes_g

    if T < 100:
        raise ValueError("T must be >= 100")
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    k = int(k)
    logT = math.log(T)
    c = abs(delta) * logT
    if c <= COALESCING_MAX:
        const = barnes_g(2 * k + 1) ** 2 / barnes_g(4 * k + 1) if normalized else 1.0
        return "coalescing", float(const) * T * logT ** (4 * k * k)
    if c >= SEPARATED_MIN:
        const = barnes_g(k + 1) ** 4 / barnes_g(2 * k + 1) ** 2 if normalized else 1.0
        return "separated", float(const) * T * logT ** (2 * k * k) / abs(delta) ** (2 * k * k)
    return "critical", confluent_constant(k, c) * T * logT ** (4 * k * k)


# ---------------------------------------------------------------------------
# level sets


def _jittered_points(T: float, n_points: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    h = T / n_points
    return T + h * (np.arange(n_points) + rng.random(n_points))


def level_values(T: float, config: ShiftConfig, n_points: int, seed: int,
                 opts: ZetaEvalOptions = DEFAULT_OPTIONS, threads: int | None = None):
    """Jittered points in ``[T, 2T]`` and ``sum_i k_i log|zeta(1/2 + i(t + alpha_i))|`` there."""
    if n_points < 1000:
        raise ValueError("n_points must be >= 1000")
    t = _jittered_points(T, n_points, seed)
    return t, _eval_grid(lambda c: log_shifted_abs(c, config, opts), t, threads)


def _measure_from_values(T: float, values: np.ndarray, V_grid) -> np.ndarray:
    srt = np.sort(values)
    V = np.asarray(V_grid, dtype=np.float64)
    count = srt.size - np.searchsorted(srt, V, side="left")
    return T * count / srt.size


def measure_level_set(T: float, V_grid, config: ShiftConfig, n_points: int, seed: int,
                      opts: ZetaEvalOptions = DEFAULT_OPTIONS, threads: int | None = None):
    """Estimated measure of ``{t in [T, 2T] : sum k_i log|zeta| >= V}`` for each V.

    Returns a list of ``(V, measure)``; nonincreasing in V since one point
    set serves every level.
    """
    _, vals = level_values(T, config, n_points, seed, opts, threads)
    meas = _measure_from_values(T, vals, V_grid)
    return list(zip((float(v) for v in V_grid), (float(m) for m in meas)))


def theorem_bound(params: BoundParameters) -> float:
    """Level-set bound at ``params.V`` (implied constant taken as 1).

    Below ``10 sqrt(log log T)`` no range applies and the trivial bound T is
    returned.
    """
    T, V, W = params.T, params.V, params.W
    if V < 3:
        raise ValueError("V must be >= 3")
    if V < params.lower_edge:
        return T
    logW = math.log(W)
    first = T * V / math.sqrt(W) * math.exp(-(V * V / W) * (1 - 4 / logW))
    second = T * V / math.sqrt(W) * math.exp(-(V * V / W) * (1 - 7 * V / (4 * W * logW)) ** 2)
    if V <= W:
        if V == W:
            log.debug("V = W: first range %.6g, second range %.6g, log ratio %.4g",
                      first, second, math.log(first / second))
        return first
    if V <= 0.5 * W * logW:
        return second
    return T * math.exp(-V * math.log(V) / 129.0)


def layer_cake_check(T: float, config: ShiftConfig, n_points: int = 100_000,
                     grid_step: float = V_STEP, seed: int = 0, v_range=V_RANGE,
                     opts: ZetaEvalOptions = DEFAULT_OPTIONS, threads: int | None = None):
    """Both sides of ``int prod|zeta|^{2k_i} dt = 2 int e^{2V} meas(S(T, V)) dV``.

    ``lhs`` is the point-set average of the product times T; ``rhs`` is the
    trapezoid rule in V (step ``grid_step``) applied to the empirical
    measure on the same points.
    """
    _, vals = level_values(T, config, n_points, seed, opts, threads)
    lhs = T * float(np.mean(np.exp(2.0 * vals)))
    n_v = int(round((v_range[1] - v_range[0]) / grid_step))
    V = np.linspace(v_range[0], v_range[1], n_v + 1)
    meas = _measure_from_values(T, vals, V)
    rhs = 2.0 * float(integrate.trapezoid(np.exp(2.0 * V) * meas, V))
    return lhs, rhs


# ---------------------------------------------------------------------------
# pointwise inequality


def prop_main_check(t, x, lam: float, table: PrimeTable, opts: ZetaEvalOptions = DEFAULT_OPTIONS):
    """``log|zeta(1/2+it)|`` against the prime-power majorant.

    ``rhs = Re sum_{n<=x} Lambda(n) n^(-1/2 - lam/log x - it) (log(x/n)/log x) / log n
    + (1+lam)/2 * log t / log x``.  Vectorised over t and x (broadcast).
    Returns ``(lhs, rhs, slack_required)`` with ``slack = lhs - rhs``.
    """
    t_arr, x_arr = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(x, dtype=np.float64))
    if np.any(x_arr < 2) or np.any(x_arr > t_arr**2):
        raise ValueError("need 2 <= x <= t^2")
    if np.any(t_arr < 50):
        raise ValueError("t must be >= 50")
    if lam < lambda0() - 1e-12:
        raise ValueError("lambda must be >= lambda0")
    x_max = int(np.max(x_arr))
    if x_max > table.limit:
        raise ValueError("x exceeds the prime table")
    lam_n = table.von_mangoldt_array()[: x_max + 1]
    n = np.flatnonzero(lam_n)
    logn = np.log(n.astype(np.float64))
    weight = lam_n[n] / logn
    tf, xf = t_arr.ravel(), x_arr.ravel()
    rhs = np.empty(tf.size)
    block = max(1, (1 << 20) // max(n.size, 1))
    for s in range(0, tf.size, block):
        tb, xb = tf[s:s + block, None], xf[s:s + block, None]
        logx = np.log(xb)
        mask = n[None, :] <= xb
        terms = weight * np.exp(-(0.5 + lam / logx) * logn) * np.cos(tb * logn) * (logx - logn) / logx
        rhs[s:s + block] = np.where(mask, terms, 0.0).sum(axis=1)
    rhs += 0.5 * (1 + lam) * np.log(tf) / np.log(xf)
    with np.errstate(divide="ignore"):
        lhs = np.log(np.abs(zeta_half_line(tf, opts)))
    lhs, rhs = lhs.reshape(t_arr.shape), rhs.reshape(t_arr.shape)
    if lhs.ndim == 0:
        return float(lhs), float(rhs), float(lhs - rhs)
    return lhs, rhs, lhs - rhs


def prime_moment_check(T: float, x: float, k: int, table: PrimeTable, n_points: int = 20_000,
                       seed: int = 0):
    """Spot check of ``int_T^{2T} |sum_{p<=x} p^(-1/2-it)|^{2k} dt << T k! (sum 1/p)^k``.

    Returns ``(integral estimate, T k! (sum_{p<=x} 1/p)^k)``; the integral is a
    jittered-grid average, so it is a Monte-Carlo estimate.
    """
    if x**k > T / math.log(T):
        raise ValueError("need x^k <= T / log T")
    p = table.primes_upto(x).astype(np.float64)
    t = _jittered_points(T, n_points, seed)
    vals = np.abs(dirichlet_poly_on_grid_direct(p ** -0.5, np.log(p), t)) ** (2 * k)
    return T * float(vals.mean()), T * math.factorial(k) * float(np.sum(1.0 / p)) ** k


# ---------------------------------------------------------------------------
# Dirichlet polynomials


def dirichlet_poly_on_grid_direct(coef: np.ndarray, freqs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``sum_j coef_j exp(-i t freqs_j)`` at arbitrary t, by blocked direct summation."""
    t = np.asarray(t, dtype=np.float64)
    coef = np.asarray(coef, dtype=np.complex128)
    out = np.empty(t.size, dtype=np.complex128)
    block = max(1, (1 << 21) // max(coef.size, 1))
    for s in range(0, t.size, block):
        out[s:s + block] = np.exp(-1j * np.outer(t[s:s + block], freqs)) @ coef
    return out


def dirichlet_poly_on_grid(coef: np.ndarray, freqs: np.ndarray, t_start: float, step: float,
                           n_pts: int, method: str = "nufft", eps: float = 1e-12) -> np.ndarray:
    """``sum_j coef_j exp(-i t freqs_j)`` at ``t = t_start + q step``, q = 0..n_pts-1.

    The NUFFT route centres the grid at ``t_c`` and computes the type-1
    transform with nodes ``step * freqs`` (mod 2pi) and strengths
    ``coef * exp(-i t_c freqs)``.
    """
    coef = np.asarray(coef, dtype=np.complex128)
    freqs = np.asarray(freqs, dtype=np.float64)
    if method == "direct":
        return dirichlet_poly_on_grid_direct(coef, freqs, t_start + step * np.arange(n_pts))
    if method != "nufft":
        raise ValueError(f"unknown method {method!r}")
    import finufft

    q0 = n_pts // 2
    t_c = t_start + q0 * step
    nodes = np.mod(step * freqs + math.pi, 2 * math.pi) - math.pi
    strengths = coef * np.exp(-1j * np.mod(t_c * freqs, 2 * math.pi))
    return finufft.nufft1d1(nodes, strengths, n_pts, isign=-1, eps=eps)


def _a_series(x: int, config: ShiftConfig):
    coeffs = shifted_coefficients(x, config)
    n = np.arange(1, x + 1, dtype=np.float64)
    return coeffs, coeffs.a[1:] * n**-0.5, np.log(n)


def a_mean_square(T: float, x: int, config: ShiftConfig, grid_step: float = 0.05,
                  method: str = "nufft"):
    """Mean square of ``A(t) = sum_{j<=x} a_j j^(-1/2-it)`` over ``[T, 2T]``.

    Returns ``(numeric, diagonal, leading)`` with ``diagonal = T sum D(j)/j``
    and ``leading = T (log x)^(sum k_i^2) prod_{i<j} min(1/|a_i-a_j|, log x)^(2 k_i k_j)``.
    """
    x = int(x)
    if x < 1:
        raise ValueError("x must be >= 1")
    if x * x > T:
        raise ValueError("x must satisfy x^2 <= T")
    coeffs, c, freqs = _a_series(x, config)
    n = int(math.ceil(T / grid_step))
    n += (-n) % 2
    h = T / n
    vals = dirichlet_poly_on_grid(c, freqs, T, h, n + 1, method=method)
    f = np.abs(vals) ** 2
    numeric = h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())
    diagonal = T * mean_square_coefficients(coeffs)
    logx = math.log(x) if x > 1 else 0.0
    leading = T * logx ** config.sum_sq
    for _, _, kk, d in config.pairs():
        cap = logx if d == 0 else min(1.0 / d, logx)
        leading *= cap ** (2 * kk)
    return float(numeric), float(diagonal), float(leading)


def smoothed_l_value(t, config: ShiftConfig, cutoff_X: float, n_max: int | None = None):
    """``sum_{n<=n_max} a_n n^(-1/2-it) exp(-n/X)``, the smoothed product of shifted zetas.

    ``n_max`` defaults to ``10 X``.  The difference from the true product
    is dominated by the Gamma-pole term ``-L(-1, t)/X``, so X must grow
    with the conductor ``(t/2pi)^R``.
    """
    n_max = int(10 * cutoff_X) if n_max is None else int(n_max)
    if n_max < 10 * cutoff_X:
        raise ValueError("n_max must be >= 10 * cutoff_X")
    coeffs, c, freqs = _a_series(n_max, config)
    n = np.arange(1, n_max + 1, dtype=np.float64)
    c = c * np.exp(-n / cutoff_X)
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = dirichlet_poly_on_grid_direct(c, freqs, t_arr)
    return complex(out[0]) if np.ndim(t) == 0 else out


def bump_kernel(y):
    """``K(y) = exp(-1/((y-1)(2-y)))`` on (1, 2), zero elsewhere."""
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    inside = (y > 1) & (y < 2)
    out[inside] = np.exp(-1.0 / ((y[inside] - 1) * (2 - y[inside])))
    return out if out.ndim else float(out)


def kernel_fourier(xi) -> np.ndarray:
    """``K^(xi) = int K(y) e^(-i xi y) dy`` by quadrature; ``K^(0) = int K``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    out = np.empty(xi.size, dtype=np.complex128)
    for i, w in enumerate(xi):
        re = integrate.quad(lambda y: float(bump_kernel(y)) * math.cos(w * y), 1, 2, limit=400,
                            epsabs=1e-16, epsrel=1e-12)[0]
        im = integrate.quad(lambda y: -float(bump_kernel(y)) * math.sin(w * y), 1, 2, limit=400,
                            epsabs=1e-16, epsrel=1e-12)[0]
        out[i] = re + 1j * im
    return out


def s1_kernel_integral(T: float, config: ShiftConfig, x: int | None = None,
                       cutoff_X: float | None = None, n_max: int | None = None,
                       grid_step: float | None = None, method: str = "nufft") -> float:
    """``|int L(0,t) conj(A(t)) K(t/T) dt|`` with L the smoothed sum.

    The integrand is smooth and vanishes to all orders at T and 2T, so the
    trapezoid rule converges spectrally once the step resolves the largest
    frequency ``log n_max + log x``.
    """
    x = int(math.isqrt(int(T))) if x is None else int(x)
    X = float(T) if cutoff_X is None else float(cutoff_X)
    n_max = int(10 * X) if n_max is None else int(n_max)
    if n_max < x:
        raise ValueError("n_max must be >= x")
    _, c_l, f_l = _a_series(n_max, config)
    n = np.arange(1, n_max + 1, dtype=np.float64)
    c_l = c_l * np.exp(-n / X)
    _, c_a, f_a = _a_series(x, config)
    h = grid_step or min(0.1, math.pi / (math.log(n_max) + math.log(max(x, 2)) + 1.0))
    n_pts = int(math.ceil(T / h))
    h = T / n_pts
    L = dirichlet_poly_on_grid(c_l, f_l, T, h, n_pts + 1, method=method)
    A = dirichlet_poly_on_grid(c_a, f_a, T, h, n_pts + 1, method=method)
    t = T + h * np.arange(n_pts + 1)
    integrand = L * np.conj(A) * bump_kernel(t / T)
    return float(abs(h * integrand.sum()))
