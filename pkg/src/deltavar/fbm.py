"""Exact Gaussian sampling of iterated fractional Brownian motion ``J^m B^H``.

The covariance matrix of ``J^m B^H`` on a fine grid is numerically singular
for ``m >= 1`` (neighbouring values are almost collinear).  Instead of
factorizing it directly, the path is described by its *difference table*

    y = (x_0, Delta x_0, ..., Delta^{m} x_0, Delta^{m+1} x_0, ..., Delta^{m+1} x_{n-2-m})

which is an invertible linear image of x.  The ``Delta^{m+1}`` block is
stationary with covariance ``h**(2s) mu rho(lag)`` and well conditioned like
fractional Gaussian noise; the few leading entries carry the low-frequency
part.  Factorizing the covariance of y and recovering x by repeated cumulative
sums is exact in law.  When ``a = 0`` the value ``x_0 = 0`` is dropped.
"""

import functools
from dataclasses import dataclass
from math import comb

import mpmath
import numpy as np
from scipy.linalg import toeplitz

from .constants import CorrelationTable, _DPS, _check_hurst, _cov_mp
from .errors import InvalidParameterError, NumericalError
from .findiff import GridFunction, forward_differences
from .rng import NormalStream

MAX_POINTS = 2 ** 15
JITTER_LADDER = (0.0, 1e-14, 1e-12)


@dataclass(frozen=True)
class FbmSpec:
    """Parameters of a ``J^m B^H`` path sampled at ``n_points`` grid points of ``[a, b]``."""

    m: int
    H: float
    a: float = 0.0
    b: float = 1.0
    n_points: int = 1025
    seed: int = 0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise InvalidParameterError(f"m must be a non-negative integer, got {self.m}")
        _check_hurst(self.H)
        if not 0.0 <= self.a < self.b:
            raise InvalidParameterError(f"need 0 <= a < b, got a={self.a}, b={self.b}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise InvalidParameterError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")

    @property
    def s(self):
        return self.m + self.H

    @property
    def h(self):
        return (self.b - self.a) / (self.n_points - 1)

    def with_seed(self, seed):
        return FbmSpec(self.m, self.H, self.a, self.b, self.n_points, seed)


@dataclass(frozen=True)
class IteratedFbmPath:
    spec: FbmSpec
    values: GridFunction
    jitter: float = 0.0


def _difference_table_cov(m, H, a, b, n):
    """Covariance of the difference table of ``J^m B^H`` (see module docstring)."""
    p = m + 1
    s = m + H
    h = (b - a) / (n - 1)
    n_tail = n - p
    zero_start = a == 0.0
    heads = list(range(1 if zero_start else 0, min(p, n)))
    n_head = len(heads)

    table = CorrelationTable(p, m, H)

    cov = np.empty((n_head + max(n_tail, 0),) * 2)
    with mpmath.workdps(_DPS):
        Hm = mpmath.mpf(H)
        if zero_start:
            # integer time units, rescaled by self-similarity at the end
            times = [mpmath.mpf(i) for i in range(n)]
            scale = h ** (2 * s)
        else:
            am, hm = mpmath.mpf(a), mpmath.mpf(b - a) / (n - 1)
            times = [am + i * hm for i in range(n)]
            scale = 1.0
        # G[k][r] = Cov(x_k, x_r) for the p leading grid points
        G = [[_cov_mp(m, Hm, times[k], times[r]) for r in range(n)] for k in range(min(p, n))]

        def head_weights(i):
            return [(k, (-1) ** (i - k) * comb(i, k)) for k in range(i + 1)]

        head_rows = []
        for i in heads:
            row = [mpmath.mpf(0)] * n
            for k, w in head_weights(i):
                gk = G[k]
                for r in range(n):
                    row[r] += w * gk[r]
            head_rows.append(row)  # Cov(Delta^i x_0, x_r)

        for u, i in enumerate(heads):
            for v, i2 in enumerate(heads):
                cov[u, v] = float(sum(w * head_rows[u][k] for k, w in head_weights(i2))) * scale
            if n_tail > 0:
                row = head_rows[u]
                wp = [(-1) ** (p - l) * comb(p, l) for l in range(p + 1)]
                cross = [float(sum(wp[l] * row[j + l] for l in range(p + 1))) * scale
                         for j in range(n_tail)]
                cov[u, n_head:] = cross
                cov[n_head:, u] = cross

    if n_tail > 0:
        stat = table(np.arange(n_tail)) * (table.mu * h ** (2 * s))
        cov[n_head:, n_head:] = toeplitz(stat)
    return cov, n_head, zero_start, p


@functools.lru_cache(maxsize=8)
def _factor(m, H, a, b, n):
    cov, n_head, zero_start, p = _difference_table_cov(m, H, a, b, n)
    dim = cov.shape[0]
    avg = np.trace(cov) / dim
    last = None
    for jit in JITTER_LADDER:
        try:
            L = np.linalg.cholesky(cov + (jit * avg) * np.eye(dim) if jit else cov)
        except np.linalg.LinAlgError as exc:
            last = exc
            continue
        L.setflags(write=False)
        return L, jit * avg, n_head, zero_start, p
    w = np.linalg.eigvalsh(cov)
    raise NumericalError(
        f"Cholesky failed at maximal jitter for m={m}, H={H}, n={n}: "
        f"eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}], condition ~ {abs(w[-1] / w[0]):.3e}"
    ) from last


def _reconstruct(y, n, n_head, zero_start, p):
    """Invert the difference table by repeated cumulative sums (last axis)."""
    head = np.zeros(y.shape[:-1] + (p,))
    start = 1 if zero_start else 0
    nh = min(p, n) - start
    head[..., start:start + nh] = y[..., :nh]
    d = y[..., n_head:]
    for i in range(p - 1, -1, -1):
        first = head[..., i:i + 1]
        d = np.concatenate([first, first + np.cumsum(d, axis=-1)], axis=-1)
    return d[..., :n]


def sample_iterated_fbm(spec: FbmSpec, max_points: int = MAX_POINTS) -> IteratedFbmPath:
    """Draw one exact sample of ``J^m B^H`` on the grid of ``spec``.

    The draw is a deterministic function of ``spec`` (including its seed).
    """
    if spec.n_points > max_points:
        raise InvalidParameterError(
            f"n_points={spec.n_points} exceeds the Cholesky bound {max_points}")
    L, jitter, n_head, zero_start, p = _factor(spec.m, float(spec.H), float(spec.a),
                                               float(spec.b), int(spec.n_points))
    z = NormalStream(int(spec.seed)).normal(L.shape[0])
    y = L @ z
    x = _reconstruct(y, spec.n_points, n_head, zero_start, p)
    if zero_start:
        x[0] = 0.0
    return IteratedFbmPath(spec=spec, values=GridFunction(x, spec.a, spec.b), jitter=jitter)


def sample_fgn_increments(spec: FbmSpec, M: int, h_steps: int = 1) -> GridFunction:
    """``M``-th differences with step ``h_steps * h`` of a sampled ``J^m B^H`` path."""
    if int(M) != M or M <= spec.m:
        raise InvalidParameterError(f"need an integer M > m, got M={M}, m={spec.m}")
    if int(h_steps) != h_steps or h_steps < 1:
        raise InvalidParameterError(f"h_steps must be a positive integer, got {h_steps}")
    path = sample_iterated_fbm(spec)
    d = forward_differences(path.values.values, M, stride=h_steps)
    return GridFunction(d, spec.a, spec.a + spec.h * (d.size - 1))
