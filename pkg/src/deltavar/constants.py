"""Constants entering the CLTs and the SPDE estimators.

Covariance sums of iterated fBm suffer from severe cancellation (the terms
grow like ``lag**(2s)`` while their combination decays), so every closed-form
sum in this module is evaluated in extended precision with :mod:`mpmath` and
rounded to ``float`` once at the end.
"""

import math
from dataclasses import dataclass, field
from math import comb, factorial

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import InvalidParameterError, NumericalError

_DPS = 40
_HALF_TOL = 1e-8


def _mpf(x):
    return mpmath.mpf(x) if not isinstance(x, mpmath.mpf) else x


def _check_hurst(H):
    if not 0.0 < H < 1.0:
        raise InvalidParameterError(f"Hurst index must lie in (0, 1), got {H}")


def _check_order(M, m):
    if int(m) != m or m < 0:
        raise InvalidParameterError(f"m must be a non-negative integer, got {m}")
    if int(M) != M or M < 1:
        raise InvalidParameterError(f"M must be a positive integer, got {M}")
    if not M > m:
        raise InvalidParameterError(f"need M > m, got M={M}, m={m}")


@dataclass(frozen=True)
class RegularityDecomposition:
    """Split of a non-integer regularity ``s = m + H`` with ``H`` in (0, 1)."""

    s: float
    m: int
    H: float


def decompose(s, tol=1e-9) -> RegularityDecomposition:
    """Write ``s`` as ``m + H``; integer ``s`` (within ``tol``) is rejected."""
    if not s > 0:
        raise InvalidParameterError(f"regularity must be positive, got {s}")
    if abs(s - round(s)) < tol:
        raise InvalidParameterError(f"regularity must not be an integer, got {s}")
    m = int(math.floor(s))
    return RegularityDecomposition(s=s, m=m, H=s - m)


def tau(q: int) -> float:
    """Absolute moment ``E|Z|**q`` of a standard normal."""
    if int(q) != q or q < 0:
        raise InvalidParameterError(f"q must be a non-negative integer, got {q}")
    # tau_q = (q-1)!! for even q and sqrt(2/pi) (q-1)!! for odd q
    val = 1.0 if q % 2 == 0 else math.sqrt(2.0 / math.pi)
    for j in range(q - 1, 0, -2):
        val *= j
    return val


def normal_moment(q: int) -> float:
    """Plain moment ``E[Z**q]`` of a standard normal (zero for odd ``q``)."""
    if int(q) != q or q < 0:
        raise InvalidParameterError(f"q must be a non-negative integer, got {q}")
    return tau(q) if q % 2 == 0 else 0.0


def hermite(k: int, x):
    """Probabilists' Hermite polynomial ``He_k(x)``."""
    if int(k) != k or k < 0:
        raise InvalidParameterError(f"k must be a non-negative integer, got {k}")
    x = np.asarray(x, dtype=np.float64)
    prev, cur = np.ones_like(x), x.copy()
    if k == 0:
        out = prev
    else:
        for j in range(1, k):
            prev, cur = cur, x * cur - j * prev
        out = cur
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# covariance of iterated fBm and of its finite differences
# ---------------------------------------------------------------------------

def _rising(H, n):
    # prod_{i=1}^{n} (2H + i), empty product = 1
    p = mpmath.mpf(1)
    for i in range(1, n + 1):
        p *= 2 * H + i
    return p


def _cov_mp(m, H, t, r):
    t, r = _mpf(t), _mpf(r)
    s2 = 2 * m + 2 * H
    acc = mpmath.mpf(0)
    for k in range(m + 1):
        num = t ** (m - k) * r ** (m + k + 2 * H) + r ** (m - k) * t ** (m + k + 2 * H)
        acc += (-1) ** k * num / (2 * factorial(m - k) * _rising(H, m + k))
    acc += (-1) ** (m + 1) * abs(t - r) ** s2 / (2 * _rising(H, 2 * m))
    return acc


def iterated_fbm_cov(m: int, H: float, t: float, r: float) -> float:
    """``E[J^m B^H_t J^m B^H_r]`` for ``t, r >= 0`` (closed form)."""
    _check_hurst(H)
    if int(m) != m or m < 0:
        raise InvalidParameterError(f"m must be a non-negative integer, got {m}")
    if t < 0 or r < 0:
        raise InvalidParameterError("times must be non-negative")
    with mpmath.workdps(_DPS):
        return float(_cov_mp(int(m), _mpf(H), t, r))


def iterated_fbm_cov_matrix(m: int, H: float, times) -> np.ndarray:
    """Covariance matrix of ``J^m B^H`` at the given non-negative times."""
    times = [float(x) for x in np.asarray(times, dtype=np.float64).ravel()]
    _check_hurst(H)
    if min(times) < 0:
        raise InvalidParameterError("times must be non-negative")
    n = len(times)
    K = np.empty((n, n))
    with mpmath.workdps(_DPS):
        Hm = _mpf(H)
        for i in range(n):
            for j in range(i, n):
                K[i, j] = K[j, i] = float(_cov_mp(int(m), Hm, times[i], times[j]))
    return K


def _diff_cov_mp(M, m, H, t, r, h):
    acc = mpmath.mpf(0)
    for k in range(M + 1):
        for l in range(M + 1):
            w = (-1) ** (2 * M - k - l) * comb(M, k) * comb(M, l)
            acc += w * _cov_mp(m, H, t + k * h, r + l * h)
    return acc


def difference_cov(M, m, H, t, r, h=1.0) -> float:
    """``E[Delta_h^M J^m B^H_t Delta_h^M J^m B^H_r]`` by the double binomial sum."""
    _check_hurst(H)
    if t < 0 or r < 0 or not h > 0:
        raise InvalidParameterError("need t, r >= 0 and h > 0")
    with mpmath.workdps(_DPS):
        return float(_diff_cov_mp(int(M), int(m), _mpf(H), _mpf(t), _mpf(r), _mpf(h)))


def mu(M: int, m: int, H: float) -> float:
    """Scale constant ``mu_{M,s}`` with ``E|Delta_h^M J^m B^H|^2 = mu h^{2s}``.

    Evaluates the closed-form triple sum (diagonal plus ``j < k`` part).
    """
    _check_order(M, m)
    _check_hurst(H)
    with mpmath.workdps(_DPS):
        return float(_mu_mp(int(M), int(m), _mpf(H)))


def _mu_mp(M, m, H):
    s2 = 2 * m + 2 * H
    diag = mpmath.mpf(0)
    for k in range(M + 1):
        inner = mpmath.mpf(0)
        for p in range(m + 1):
            inner += (-1) ** p * mpmath.mpf(k) ** s2 / (factorial(m - p) * _rising(H, m + p))
        diag += comb(M, k) ** 2 * inner
    off = mpmath.mpf(0)
    for k in range(M + 1):
        for j in range(k):
            kk, jj = mpmath.mpf(k), mpmath.mpf(j)
            inner = (-1) ** (m + 1) * (kk - jj) ** s2 / _rising(H, 2 * m)
            for p in range(m + 1):
                num = kk ** (m - p) * jj ** (m + p + 2 * H) + jj ** (m - p) * kk ** (m + p + 2 * H)
                inner += (-1) ** p * num / (factorial(m - p) * _rising(H, m + p))
            off += (-1) ** (2 * M - k - j) * comb(M, k) * comb(M, j) * inner
    return diag + off


def mu_oracle(M: int, m: int, H: float) -> float:
    """``mu_{M,s}`` as the variance of ``Delta_1^M J^m B^H_0`` from the covariance."""
    _check_order(M, m)
    _check_hurst(H)
    with mpmath.workdps(_DPS):
        return float(_diff_cov_mp(int(M), int(m), _mpf(H), mpmath.mpf(0), mpmath.mpf(0),
                                  mpmath.mpf(1)))


class CorrelationTable:
    """Autocorrelation ``rho_{M,s}(lag)`` of the ``M``-th difference sequence.

    Lags below ``direct_lags`` use the exact double binomial sum of the
    covariance at ``t = 0``, ``r = lag``, ``h = 1``.  For larger lags the
    polynomial parts of the covariance are annihilated (``M > m``) and what
    remains is a ``2M``-th central difference of ``|x|**(2s)``; its binomial
    series in ``1/lag`` converges geometrically there and is evaluated in
    float64 without cancellation.

    The table is immutable after construction and safe to share.
    """

    N_SERIES_TERMS = 16

    def __init__(self, M: int, m: int, H: float):
        _check_order(M, m)
        _check_hurst(H)
        self.M, self.m, self.H = int(M), int(m), float(H)
        self.s = self.m + self.H
        self.direct_lags = max(16, 8 * self.M)
        with mpmath.workdps(_DPS):
            Hm = _mpf(self.H)
            mu_mp = _mu_mp(self.M, self.m, Hm)
            self.mu = float(mu_mp)
            zero, one = mpmath.mpf(0), mpmath.mpf(1)
            head = [_diff_cov_mp(self.M, self.m, Hm, zero, mpmath.mpf(lag), one) / mu_mp
                    for lag in range(self.direct_lags)]
            pref = (-1) ** (self.m + 1) / (2 * _rising(Hm, 2 * self.m)) / mu_mp
            s2 = 2 * self.m + 2 * Hm
            coefs = []
            for i in range(self.N_SERIES_TERMS):
                n = 2 * self.M + 2 * i
                S_n = sum((-1) ** d * comb(2 * self.M, self.M + d) * d ** n
                          for d in range(-self.M, self.M + 1))
                coefs.append(float(pref * mpmath.binomial(s2, n) * S_n))
        self._head = np.array([float(x) for x in head])
        self._coefs = tuple(coefs)
        if self.finite_support:
            # the values are small rationals; the extended-precision sums leave ~1e-39
            # where they should vanish, both beyond lag M-1 and inside the support
            self._head[self.M:] = 0.0
            self._head[np.abs(self._head) < 1e-30] = 0.0
        self._head.setflags(write=False)
        self.decay_exponent = 2 * self.s - 2 * self.M

    @property
    def asymptotic_coefficient(self) -> float:
        """``A`` in ``rho(lag) ~ A lag**(2s - 2M)``; zero when rho has finite support."""
        return self._coefs[0]

    @property
    def finite_support(self) -> bool:
        # 2s an odd integer below 2M: every series coefficient vanishes
        return all(c == 0.0 for c in self._coefs)

    def __call__(self, lags):
        lags = np.abs(np.asarray(lags, dtype=np.int64))
        out = np.empty(lags.shape, dtype=np.float64)
        small = lags < self.direct_lags
        out[small] = self._head[lags[small]]
        big = ~small
        if np.any(big):
            x = lags[big].astype(np.float64)
            inv2 = 1.0 / (x * x)
            acc = np.full_like(x, self._coefs[-1])
            for c in self._coefs[-2::-1]:
                acc = acc * inv2 + c
            out[big] = acc * x ** self.decay_exponent
        return out if out.ndim else float(out)


def rho(M: int, m: int, H: float, lag: int) -> float:
    """Normalized lag-``lag`` autocorrelation of ``Delta_h^M J^m B^H``."""
    return CorrelationTable(M, m, H)(lag)


def _check_summable(k, M, s):
    if not s < M - 1.0 / (2 * k):
        raise InvalidParameterError(
            f"sum of |rho|^{k} diverges: need s < M - 1/(2k) (= {M - 1 / (2 * k):.6g}), "
            f"got s={s:.6g}")


def rho_sq(k: int, M: int, m: int, H: float, tol: float = 1e-12,
           max_lag: int = 2 ** 22, table: CorrelationTable = None) -> float:
    """``k! * sum_{lag in Z} rho(lag)**k``.

    The one-sided sum is extended in doubling blocks until the integral tail
    bound ``C L**(1-p) / (p-1)`` with ``p = 2k(M-s)`` and
    ``C = 2 |rho(L)|**k L**p`` falls below ``tol``.  If ``max_lag`` is reached
    first, the remaining tail is added from the leading asymptotic term
    through the Hurwitz zeta function.
    """
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"k must be a positive integer, got {k}")
    table = table or CorrelationTable(M, m, H)
    s = table.s
    if table.finite_support:
        vals = table(np.arange(1, table.direct_lags))
        return factorial(k) * (1.0 + 2.0 * math.fsum(vals ** k))
    _check_summable(k, table.M, s)

    p = 2 * k * (table.M - s)
    L = 1024
    vals = table(np.arange(1, L + 1)) ** k
    while True:
        bound = 2.0 * abs(vals[-1]) * L / (p - 1.0)
        if bound < tol or L >= max_lag:
            break
        more = table(np.arange(L + 1, 2 * L + 1)) ** k
        vals = np.concatenate([vals, more])
        L *= 2
    total = math.fsum(vals)
    if bound >= tol:
        total += table.asymptotic_coefficient ** k * float(special.zeta(p, L + 1))
    return factorial(k) * (1.0 + 2.0 * total)


def sigma_sq(q: int, M: int, m: int, H: float, table: CorrelationTable = None) -> float:
    """Asymptotic variance factor ``sigma^2_{q,M,s}`` for even ``q``.

    Uses the Hermite expansion ``x**q = sum_k C(q,k) E[Z**(q-k)] He_k(x)``,
    in which only even ``k`` survive:
    ``sigma^2 = sum_{k even, 2..q} C(q,k)**2 E[Z**(q-k)]**2 rho_sq(k)``.
    """
    if int(q) != q or q < 2 or q % 2:
        raise InvalidParameterError(f"closed-form variance needs an even q >= 2, got {q}")
    table = table or CorrelationTable(M, m, H)
    total = 0.0
    for k in range(2, q + 1, 2):
        total += comb(q, k) ** 2 * normal_moment(q - k) ** 2 * rho_sq(k, M, m, H, table=table)
    return total


def _nu_literal(H):
    # direct -(2/pi) Gamma(-2H) cos(pi H); singular at H = 1/2
    return -(2.0 / math.pi) * special.gamma(-2.0 * H) * math.cos(math.pi * H)


def nu(H: float) -> float:
    """Constant ``nu_H = -(2/pi) Gamma(-2H) cos(pi H)``, equal to 1 at ``H = 1/2``.

    With the reflection ``Gamma(-2H) = -pi / (sin(2 pi H) Gamma(1 + 2H))`` the
    cosine cancels and ``nu_H = 1 / (Gamma(1 + 2H) sin(pi H))``, which is
    regular on all of (0, 1).
    """
    _check_hurst(H)
    if abs(H - 0.5) < _HALF_TOL:
        return 1.0
    return 1.0 / (math.exp(math.lgamma(1.0 + 2.0 * H)) * math.sin(math.pi * H))


def c_alpha_gamma_m(alpha: float, gamma: float, m: int, epsabs: float = 1e-13) -> float:
    """Scale ``c_{alpha,gamma,m}``, the square root of
    ``(2 pi)**-1 int_R (1 - cos x) |x|**(2m - 4 gamma - alpha) dx``.

    The integrand is even.  On ``[0, 1]`` it is written with
    ``1 - cos x = 2 sin(x/2)**2`` to avoid cancellation; on ``[1, inf)`` the
    algebraic part is integrated exactly and the oscillatory part by QUADPACK's
    Fourier-integral routine.
    """
    H = (alpha + 4.0 * gamma - 1.0) / 2.0 - m
    if not 0.0 < H < 1.0:
        raise InvalidParameterError(
            f"need 0 < (alpha + 4 gamma - 1)/2 - m < 1, got {H:.6g}")
    e = 2 * m - 4.0 * gamma - alpha  # = -1 - 2H
    inner, err1 = integrate.quad(lambda x: 2.0 * np.sin(0.5 * x) ** 2 * x ** e, 0.0, 1.0,
                                 epsabs=epsabs, epsrel=1e-13, limit=200)
    osc, err2 = integrate.quad(lambda x: x ** e, 1.0, np.inf, weight="cos", wvar=1.0,
                               epsabs=epsabs, limlst=200)
    outer = 1.0 / (2.0 * H) - osc
    if not (np.isfinite(inner) and np.isfinite(outer)):
        raise NumericalError("quadrature for c_{alpha,gamma,m} failed")
    c_sq = 2.0 * (inner + outer) / (2.0 * math.pi)
    return math.sqrt(c_sq)


@dataclass(frozen=True)
class CltConstants:
    """Bundle of the constants used by the variation CLT and the estimators."""

    q: int
    M: int
    m: int
    H: float
    tau_q: float
    mu: float
    rho: CorrelationTable = field(repr=False)
    rho_sq_k: tuple
    sigma_sq: float = None

    @property
    def s(self):
        return self.m + self.H

    def to_dict(self, n_rho=20):
        return {
            "q": self.q, "M": self.M, "m": self.m, "H": self.H,
            "tau_q": self.tau_q, "mu": self.mu,
            "rho_first_20": [float(x) for x in self.rho(np.arange(n_rho))],
            "rho_sq_k": list(self.rho_sq_k), "sigma_sq": self.sigma_sq,
        }


def clt_constants(q: int, M: int, m: int, H: float) -> CltConstants:
    """Compute every constant of the variation CLT for ``(q, M, m + H)``.

    ``rho_sq_k[k-1]`` is ``None`` when the lag sum of ``|rho|**k`` diverges;
    ``sigma_sq`` is ``None`` for odd ``q``.
    """
    table = CorrelationTable(M, m, H)
    rsq = []
    for k in range(1, q + 1):
        try:
            rsq.append(rho_sq(k, M, m, H, table=table))
        except InvalidParameterError:
            rsq.append(None)
    sig = sigma_sq(q, M, m, H, table=table) if q % 2 == 0 else None
    return CltConstants(q=q, M=M, m=m, H=H, tau_q=tau(q), mu=table.mu, rho=table,
                        rho_sq_k=tuple(rsq), sigma_sq=sig)
