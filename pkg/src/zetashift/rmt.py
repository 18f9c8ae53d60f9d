"""Random-matrix side: Haar sampling, CUE moments, sinc determinants.

Haar unitaries come from the QR factorisation of a complex Ginibre matrix
with the diagonal phase correction.  Eigenphases are read off the Hermitian
Cayley transform ``i (I - U)(I + U)^-1`` whose eigenvalues are
``-tan(theta/2)``; this is several times faster than the general
non-symmetric eigensolver and equally accurate once U is rotated away from
an eigenvalue at -1.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from .special import barnes_g, dense_determinant

__all__ = [
    "UnitarySample",
    "MCEstimate",
    "NumericalInstabilityError",
    "haar_unitary",
    "sample_haar_eigenphases",
    "eigenphases",
    "char_poly_abs",
    "log_char_poly_abs",
    "mc_shifted_rmt_moment",
    "cue_density_quadrature",
    "koster_ratio",
    "confluent_ratio",
    "confluent_constant",
    "regime_prediction",
    "COALESCING_MAX",
    "SEPARATED_MIN",
]

N_MAX = 512
#: ``|alpha| N`` at or below this is the coalescing regime.
COALESCING_MAX = 0.1
#: ``|alpha| N`` at or above this is the separated regime.
SEPARATED_MIN = 10.0
KOSTER_MIN_GAP = 1e-6
CONFLUENT_MAX_MULTIPLICITY = 12
CONFLUENT_EPS = (1e-2, 1e-3, 1e-4)
CONFLUENT_RTOL = 1e-5
# Cayley transform is re-done on a rotated matrix when |tan(theta/2)| exceeds this
_CAYLEY_LIMIT = 1e6


class NumericalInstabilityError(ArithmeticError):
    """Two independent evaluation routes disagree beyond tolerance."""


@dataclass(frozen=True)
class UnitarySample:
    N: int
    eigenphases: np.ndarray

    def __post_init__(self):
        if len(self.eigenphases) != self.N:
            raise ValueError("need exactly N eigenphases")


@dataclass(frozen=True)
class MCEstimate:
    """Monte-Carlo mean with ``standard_error = std(ddof=1) / sqrt(n_samples)``."""

    mean: float
    standard_error: float
    n_samples: int
    seed: int

    def z_score(self, exact: float) -> float:
        return (self.mean - exact) / self.standard_error if self.standard_error > 0 else (
            0.0 if self.mean == exact else math.inf)


# ---------------------------------------------------------------------------
# sampling


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def haar_unitary(N: int, rng, batch: int | None = None) -> np.ndarray:
    """Haar unitary matrices, shape ``(N, N)`` or ``(batch, N, N)``."""
    if not 1 <= N <= N_MAX:
        raise ValueError(f"N must be in [1, {N_MAX}], got {N}")
    gen = _as_generator(rng)
    shape = (N, N) if batch is None else (batch, N, N)
    z = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    # without this correction Q is not Haar distributed
    return q * (d / np.abs(d))[..., None, :]


def _cayley_phases(u: np.ndarray, rotation: float) -> np.ndarray:
    n = u.shape[-1]
    eye = np.eye(n)
    v = u * np.exp(1j * rotation) if rotation else u
    a = 1j * np.linalg.solve(eye + v, eye - v)
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    lam = np.linalg.eigvalsh(a)
    # eigenvalue e^{i theta} of v maps to lam = tan(theta/2)
    return lam, 2.0 * np.arctan(lam) - rotation


def eigenphases(u: np.ndarray) -> np.ndarray:
    """Sorted eigenphases in [0, 2pi) of a unitary matrix or a stack of them."""
    u = np.asarray(u, dtype=np.complex128)
    single = u.ndim == 2
    if single:
        u = u[None]
    lam, phases = _cayley_phases(u, 0.0)
    bad = np.flatnonzero(np.max(np.abs(lam), axis=-1) > _CAYLEY_LIMIT)
    for b in bad:
        # an eigenvalue sits near -1; rotate by an irrational fraction of a turn
        for rot in (math.pi * (math.sqrt(5) - 1), 1.0, 2.0):
            lam_b, ph_b = _cayley_phases(u[b], rot)
            if np.max(np.abs(lam_b)) <= _CAYLEY_LIMIT:
                phases[b] = ph_b
                break
        else:
            phases[b] = np.angle(np.linalg.eigvals(u[b]))
    out = np.sort(np.mod(phases, 2 * math.pi), axis=-1)
    # mod can return exactly 2pi for tiny negative inputs
    out[out >= 2 * math.pi] = 0.0
    out = np.sort(out, axis=-1)
    return out[0] if single else out


def sample_haar_eigenphases(N: int, rng_state) -> UnitarySample:
    """Eigenphases of one Haar-distributed N x N unitary, sorted ascending."""
    return UnitarySample(N=N, eigenphases=eigenphases(haar_unitary(N, rng_state)))


def log_char_poly_abs(phases: np.ndarray, thetas) -> np.ndarray:
    """``sum_n log|2 sin((theta_n - theta)/2)|`` for phase sets ``(..., N)`` and angles ``(L,)``.

    Returns shape ``(..., L)``.
    """
    ph = np.asarray(phases, dtype=np.float64)
    th = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    diff = ph[..., :, None] - th
    with np.errstate(divide="ignore"):
        return np.log(np.abs(2.0 * np.sin(0.5 * diff))).sum(axis=-2)


def char_poly_abs(sample: UnitarySample, theta: float) -> float:
    """``prod_n |1 - e^{i(theta_n - theta)}|`` evaluated in log space."""
    ph = np.asarray(sample.eigenphases, dtype=np.float64)
    d = np.mod(ph - theta, 2 * math.pi)
    if np.any(np.minimum(d, 2 * math.pi - d) < 1e-15):
        return 0.0
    return float(np.exp(log_char_poly_abs(ph, [theta])[0]))


# ---------------------------------------------------------------------------
# Monte Carlo


def _chunk_values(N, exponents, angles, size, seed, chunk, variance_reduction):
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))
    k = np.asarray(exponents, dtype=np.float64)
    phi = np.asarray(angles, dtype=np.float64)
    if variance_reduction == "palm":
        # CUE(N+1) seen from one of its eigenvalues is CUE(N) tilted by |Lambda|^2
        ph = eigenphases(haar_unitary(N + 1, gen, batch=size))
        n1 = N + 1
        idx = np.arange(n1)
        # remaining points relative to removed point i, placed so i sits at phi_0
        rel = ph[:, None, :] - ph[:, :, None] + phi[0]       # (B, i, j)
        out = np.zeros((size, n1))
        for kk, a in zip(k - np.eye(len(k))[0], phi):
            if kk == 0:
                continue
            s = np.abs(2.0 * np.sin(0.5 * (rel - a)))
            s[:, idx, idx] = 1.0
            with np.errstate(divide="ignore"):
                out += 2.0 * kk * np.log(s).sum(axis=2)
        return n1 * np.exp(out).mean(axis=1)
    ph = eigenphases(haar_unitary(N, gen, batch=size))
    if variance_reduction == "rotation":
        n_rot = int(round(N * k.sum())) + 1
        psi = gen.uniform(0, 2 * math.pi) + 2 * math.pi * np.arange(n_rot) / n_rot
        thetas = (phi[:, None] + psi[None, :]).ravel()
        logs = log_char_poly_abs(ph, thetas).reshape(size, len(phi), n_rot)
        return np.exp(2.0 * np.einsum("i,bil->bl", k, logs)).mean(axis=1)
    logs = log_char_poly_abs(ph, phi)
    return np.exp(2.0 * logs @ k)


def mc_shifted_rmt_moment(N: int, exponents: Sequence[float], angles: Sequence[float],
                          n_samples: int, seed: int, chunk_size: int = 1000,
                          variance_reduction: str = "none", threads: int | None = None) -> MCEstimate:
    """Monte-Carlo estimate of ``E prod_i |Lambda(e^{i phi_i})|^{2 k_i}`` over Haar U(N).

    Parameters
    ----------
    variance_reduction : {"none", "rotation", "palm"}
        ``"rotation"`` averages each draw over ``N sum(k) + 1`` equispaced
        rotations (a conditional expectation, so still unbiased; exact in the
        rotation for integer k).  ``"palm"`` draws U(N+1), removes each
        eigenvalue in turn and uses ``E[|Lambda(phi_1)|^2 F] = (N+1) E_palm[F]``;
        it needs ``k_1 >= 1`` and cuts the variance of high moments by orders
        of magnitude.
    chunk_size, threads
        Samples are drawn in chunks seeded by ``SeedSequence(seed, spawn_key=(chunk,))``
        and merged in chunk order, so the result depends on ``chunk_size`` but
        not on ``threads``.
    """
    if not 1 <= N <= N_MAX:
        raise ValueError(f"N must be in [1, {N_MAX}]")
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    if len(exponents) != len(angles) or not exponents:
        raise ValueError("exponents and angles must be non-empty and of equal length")
    if any(not kk > 0 for kk in exponents):
        raise ValueError("exponents must be positive")
    if variance_reduction not in ("none", "rotation", "palm"):
        raise ValueError(f"unknown variance_reduction {variance_reduction!r}")
    if variance_reduction == "palm" and exponents[0] < 1:
        raise ValueError("palm estimator needs exponents[0] >= 1")
    if variance_reduction == "palm" and N + 1 > N_MAX:
        raise ValueError("palm estimator samples U(N+1)")
    seed = int(seed)
    sizes = [min(chunk_size, n_samples - s) for s in range(0, n_samples, chunk_size)]

    def work(c):
        return _chunk_values(N, exponents, angles, sizes[c], seed, c, variance_reduction)

    if threads is None or threads <= 1:
        parts = [work(c) for c in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    vals = np.concatenate(parts)
    return MCEstimate(mean=float(vals.mean()),
                      standard_error=float(vals.std(ddof=1) / math.sqrt(vals.size)),
                      n_samples=int(vals.size), seed=seed)


def cue_density_quadrature(N: int, exponents: Sequence[float], angles: Sequence[float],
                           n_grid: int = 256) -> float:
    """Brute-force CUE moment for N in {1, 2} from the eigenphase density.

    The periodic trapezoid rule is exact for trigonometric polynomials of
    degree below ``n_grid``, which covers integer exponents.
    """
    th = 2 * math.pi * np.arange(n_grid) / n_grid
    k = np.asarray(exponents, dtype=np.float64)
    logs = log_char_poly_abs(th[:, None], angles)          # (n_grid, m)
    f = np.exp(2.0 * logs @ k)
    if N == 1:
        return float(f.mean())
    if N == 2:
        density = np.abs(np.exp(1j * th)[:, None] - np.exp(1j * th)[None, :]) ** 2 / 2.0
        return float(np.einsum("i,ij,j->", f, density, f) / n_grid**2)
    raise ValueError("brute-force quadrature only for N = 1, 2")


# ---------------------------------------------------------------------------
# sinc determinants


def _dps_for(points) -> int:
    pts = [float(p) for p in points]
    digits = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            gap = abs(pts[i] - pts[j])
            if gap < 1:
                digits += math.log10(1.0 / gap)
    return int(30 + 2 * digits)


def _koster_mp(mus):
    n = len(mus)
    rows = [[mpmath.sincpi(mus[j] - mus[k]) if j != k else mpmath.mpf(1) for k in range(n)]
            for j in range(n)]
    det = dense_determinant(rows)
    vdm_sq = mpmath.mpf(1)
    two_pi = 2 * mpmath.pi
    for j in range(n):
        for k in range(j + 1, n):
            vdm_sq *= (two_pi * (mus[k] - mus[j])) ** 2
    return det / vdm_sq


def koster_ratio(mus: Sequence[float], dps: int | None = None) -> float:
    """``det(f(mu_j - mu_k)) / Delta^2(2 pi mu)`` with ``f(z) = sin(pi z)/(pi z)``.

    Evaluated in mpmath at a precision chosen from the gaps, so close
    arguments do not lose digits to cancellation.
    """
    mus = [float(m) for m in mus]
    if not mus:
        raise ValueError("need at least one point")
    srt = sorted(mus)
    gaps = [b - a for a, b in zip(srt, srt[1:])]
    if gaps and min(gaps) < KOSTER_MIN_GAP:
        raise ValueError(f"points closer than {KOSTER_MIN_GAP}; use confluent_ratio for coalescing points")
    with mpmath.workdps(dps or _dps_for(mus)):
        val = _koster_mp([mpmath.mpf(m) for m in mus])
        return float(val)


def _sinc_taylor(d, order: int):
    """Coefficients ``f^(n)(d)/n!`` for n = 0..order, in the current mpmath precision."""
    pi = mpmath.pi
    if d == 0:
        out = [mpmath.mpf(0)] * (order + 1)
        for n in range(0, order + 1, 2):
            out[n] = (-1) ** (n // 2) * pi**n / mpmath.factorial(n + 1)
        return out
    # sin(pi(d+h)) and 1/(pi(d+h)) as power series in h
    s, c = mpmath.sin(pi * d), mpmath.cos(pi * d)
    sin_ser = []
    for n in range(order + 1):
        trig = (s, c, -s, -c)[n % 4]
        sin_ser.append(trig * pi**n / mpmath.factorial(n))
    inv_ser = [(-1) ** n / (pi * d ** (n + 1)) for n in range(order + 1)]
    return [mpmath.fsum(sin_ser[j] * inv_ser[n - j] for j in range(n + 1)) for n in range(order + 1)]


def _confluent_derivative(nodes):
    """Divided-difference matrix route (entries ``(-1)^s f^(r+s)(nu_a - nu_b) / (r! s!)``)."""
    index = [(a, r) for a, (_, m) in enumerate(nodes) for r in range(m)]
    M = len(index)
    vals = [mpmath.mpf(v) for v, _ in nodes]
    max_order = 2 * max(m for _, m in nodes)
    cache = {}
    for a in range(len(nodes)):
        for b in range(len(nodes)):
            cache[a, b] = _sinc_taylor(vals[a] - vals[b], max_order)
    rows = []
    for a, r in index:
        row = []
        for b, s in index:
            # f^(r+s)/(r!s!) = taylor[r+s] (r+s)!/(r!s!)
            coef = cache[a, b][r + s] * mpmath.binomial(r + s, r)
            row.append((-1) ** s * coef)
        rows.append(row)
    det = dense_determinant(rows)
    denom = (2 * mpmath.pi) ** (M * (M - 1))
    for a in range(len(nodes)):
        for b in range(a + 1, len(nodes)):
            denom *= (vals[b] - vals[a]) ** (2 * nodes[a][1] * nodes[b][1])
    return det / denom


def _confluent_richardson(nodes):
    """Perturb each node to ``nu + eps (0, 1, ..., m-1)`` and extrapolate eps -> 0."""
    samples = []
    for eps in CONFLUENT_EPS:
        pts = [v + eps * r for v, m in nodes for r in range(m)]
        with mpmath.workdps(_dps_for(pts)):
            mp_pts = [mpmath.mpf(v) + mpmath.mpf(eps) * r for v, m in nodes for r in range(m)]
            samples.append(_koster_mp(mp_pts))
    # Neville extrapolation of the quadratic through the three samples to eps = 0
    with mpmath.workdps(60):
        xs = [mpmath.mpf(e) for e in CONFLUENT_EPS]
        p = list(samples)
        for level in range(1, len(xs)):
            for i in range(len(xs) - level):
                j = i + level
                p[i] = (xs[j] * p[i] - xs[i] * p[i + 1]) / (xs[j] - xs[i])
        return p[0]


def _normalise_nodes(nodes):
    out = []
    for v, m in nodes:
        if int(m) != m or m < 1:
            raise ValueError("multiplicities must be positive integers")
        out.append((float(v), int(m)))
    if sum(m for _, m in out) > CONFLUENT_MAX_MULTIPLICITY:
        raise ValueError(f"total multiplicity must be <= {CONFLUENT_MAX_MULTIPLICITY}")
    # identical node values merge
    merged: dict = {}
    for v, m in out:
        merged[v] = merged.get(v, 0) + m
    return sorted(merged.items())


def confluent_ratio(nodes: Sequence[tuple]) -> float:
    """Confluent limit of :func:`koster_ratio` as groups of points coalesce.

    ``nodes`` is a sequence of ``(value, multiplicity)``.  Two routes are
    evaluated: Richardson extrapolation of perturbed Koster ratios in extended
    precision, and the determinant of the scaled-derivative matrix.  They must
    agree to ``CONFLUENT_RTOL`` relative, otherwise
    :class:`NumericalInstabilityError` is raised.
    """
    nodes = _normalise_nodes(nodes)
    if all(m == 1 for _, m in nodes):
        return koster_ratio([v for v, _ in nodes]) if len(nodes) > 1 else 1.0
    richardson = _confluent_richardson(nodes)
    pts = [v for v, _ in nodes]
    digits = 0.0
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            gap = abs(pts[i] - pts[j])
            if gap < 1:
                digits += nodes[i][1] * nodes[j][1] * math.log10(1.0 / gap)
    with mpmath.workdps(int(40 + 2 * digits)):
        derivative = _confluent_derivative(nodes)
    a, b = float(richardson), float(derivative)
    if abs(a - b) > CONFLUENT_RTOL * max(abs(a), abs(b)):
        raise NumericalInstabilityError(
            f"confluent routes disagree: extrapolated {a!r} vs derivative matrix {b!r}")
    return b


def confluent_constant(k: int, c: float) -> float:
    """``C_k(c)``: k points at 0 and k points at ``c / 2pi`` coalescing."""
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    return confluent_ratio(((0.0, int(k)), (c / (2 * math.pi), int(k))))


def regime_prediction(k: int, alpha: float, N: int,
                      coalescing_max: float = COALESCING_MAX, separated_min: float = SEPARATED_MIN):
    """Leading term of ``E |Lambda(1)|^{2k} |Lambda(e^{i alpha})|^{2k}`` by regime of ``|alpha| N``.

    Returns ``(regime, leading)`` with regime one of ``"coalescing"``,
    ``"critical"``, ``"separated"``.
    """
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    if N < 2:
        raise ValueError("N must be >= 2")
    if not -math.pi < alpha <= math.pi:
        raise ValueError("alpha must lie in (-pi, pi]")
    k = int(k)
    c = abs(alpha) * N
    if c <= coalescing_max:
        ratio = barnes_g(2 * k + 1) ** 2 / barnes_g(4 * k + 1)
        return "coalescing", float(ratio) * float(N) ** (4 * k * k)
    if c >= separated_min:
        gap = abs(1 - complex(math.cos(alpha), math.sin(alpha)))
        if gap < 1e-9:
            raise ValueError("alpha too close to 0 mod 2pi for the separated regime")
        const = barnes_g(k + 1) ** 4 / barnes_g(2 * k + 1) ** 2
        return "separated", gap ** (-2 * k * k) * float(const) * float(N) ** (2 * k * k)
    return "critical", confluent_constant(k, c) * float(N) ** (4 * k * k)
