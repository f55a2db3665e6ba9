"""Finite differences, Delta-power variations and grid functions.

A :class:`GridFunction` stores ``n`` samples on a uniform grid of ``[a, b]``.
Throughout the package the number of grid *intervals* ``N = n - 1`` is the
resolution parameter, so ``h = (b - a) / N``.
"""

import csv
import math
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import InvalidParameterError

UNIFORMITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples of a function on the uniform grid ``a + k h``."""

    values: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 2:
            raise InvalidParameterError("a grid function needs at least two samples")
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("grid function values must be finite")
        if not float(self.b) > float(self.a):
            raise InvalidParameterError(f"need b > a, got a={self.a}, b={self.b}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def n_intervals(self) -> int:
        return self.values.size - 1

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_intervals

    @property
    def t(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.values.size)

    def __len__(self):
        return self.values.size

    @classmethod
    def from_callable(cls, func, a, b, n_intervals):
        t = a + (b - a) / n_intervals * np.arange(n_intervals + 1)
        return cls(np.asarray(func(t), dtype=np.float64), a, b)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return GridFunction(self.values + other.values, self.a, self.b)
        return GridFunction(self.values + other, self.a, self.b)

    def __mul__(self, c):
        return GridFunction(self.values * c, self.a, self.b)

    __rmul__ = __mul__


def _check_same_grid(f, g):
    if len(f) != len(g) or not (math.isclose(f.a, g.a) and math.isclose(f.b, g.b)):
        raise InvalidParameterError("grid functions live on different grids")


@dataclass(frozen=True)
class VariationParams:
    """Power ``q``, difference order ``M`` and regularity exponent ``s``."""

    q: int
    M: int
    s: float

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise InvalidParameterError(f"q must be a positive integer, got {self.q}")
        if int(self.M) != self.M or self.M < 1:
            raise InvalidParameterError(f"M must be a positive integer, got {self.M}")
        if not self.s > 0:
            raise InvalidParameterError(f"s must be positive, got {self.s}")
        if not self.M > self.s:
            raise InvalidParameterError(f"need M > s, got M={self.M}, s={self.s}")


def difference_weights(M):
    """Binomial weights ``(-1)**(M-j) * C(M, j)`` for ``j = 0..M``."""
    return np.array([(-1) ** (M - j) * comb(M, j) for j in range(M + 1)], dtype=np.float64)


def forward_differences(values, M, stride=1):
    """All ``M``-th forward differences of a sample vector with step ``stride``.

    The accumulation runs over ``j = 0..M`` in ascending order so the result is
    bitwise identical to :func:`forward_difference` at every index.
    Works along the last axis, so a batch of paths can be differenced at once.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[-1]
    length = n - M * stride
    if length <= 0:
        raise InvalidParameterError(f"difference of order {M} with stride {stride} "
                                    f"needs more than {M * stride} samples, got {n}")
    w = difference_weights(M)
    acc = w[0] * values[..., 0:length]
    for j in range(1, M + 1):
        acc = acc + w[j] * values[..., j * stride:j * stride + length]
    return acc


def forward_difference(f: GridFunction, M: int, k: int) -> float:
    """``M``-th forward difference of ``f`` at grid index ``k``."""
    n = len(f)
    if int(M) != M or M < 1:
        raise InvalidParameterError(f"M must be a positive integer, got {M}")
    if M >= n:
        raise InvalidParameterError(f"difference order {M} needs more than {M} samples")
    if not 0 <= k <= n - 1 - M:
        raise IndexError(f"index {k} outside [0, {n - 1 - M}] for order {M}")
    w = difference_weights(M)
    acc = w[0] * f.values[k]
    for j in range(1, M + 1):
        acc = acc + w[j] * f.values[k + j]
    return float(acc)


def delta_power_variation(f: GridFunction, p: VariationParams) -> float:
    """Delta-power variation ``V_{q,M,s,N}`` of a grid function.

    ``V = (b - a)**-1 * sum_{k=0}^{N-M} h * |Delta_h^M f(t_k) / h**s|**q``
    with ``N = len(f) - 1``.  The sum has ``N - M + 1`` terms but is normalized
    by ``b - a = N h``; that convention is kept on purpose.  The terms are
    added with :func:`math.fsum`.
    """
    N = f.n_intervals
    if N <= p.M:
        raise InvalidParameterError(f"need N > M, got N={N}, M={p.M}")
    h = f.h
    d = forward_differences(f.values, p.M)
    terms = np.abs(d / h ** p.s) ** p.q
    return h * math.fsum(terms) / (f.b - f.a)


def delta_power_variation_batch(values, h, q, M, s):
    """Vectorized ``V`` for paths stacked along the first axis.

    Uses ordinary pairwise summation; intended for Monte Carlo loops where the
    compensated single-path routine would be a bottleneck.
    """
    values = np.asarray(values, dtype=np.float64)
    N = values.shape[-1] - 1
    d = forward_differences(values, M)
    return np.sum(np.abs(d / h ** s) ** q, axis=-1) / N


def hz_seminorm_estimate(f: GridFunction, s: float, M: int) -> float:
    """Discrete lower bound for the Hoelder-Zygmund seminorm ``|f|_s^{(0,M)}``.

    Takes the maximum of ``h'**-s * max_k |Delta_{h'}^M f(t_k)|`` over the
    dyadic steps ``h' = h 2**j`` with ``M h' <= b - a``.
    """
    if int(M) != M or M < 1 or not s > 0 or not M > s:
        raise InvalidParameterError(f"need integer M > s > 0, got M={M}, s={s}")
    n = len(f)
    if n < 2 * M + 1:
        raise InvalidParameterError(f"need at least {2 * M + 1} samples, got {n}")
    N = n - 1
    best = 0.0
    j = 0
    while M * 2 ** j <= N:
        stride = 2 ** j
        d = forward_differences(f.values, M, stride)
        best = max(best, float(np.max(np.abs(d))) / (f.h * stride) ** s)
        j += 1
    return best


def difference_grid(f: GridFunction, M: int = 1) -> GridFunction:
    """``Delta_h^M f`` as a grid function on ``[a, b - M h]``."""
    d = forward_differences(f.values, M)
    return GridFunction(d, f.a, f.b - M * f.h)


def cumulative_integral(f: GridFunction) -> GridFunction:
    """Trapezoidal antiderivative ``t -> int_a^t f``, zero at ``a``."""
    return GridFunction(cumulative_trapezoid(f.values, dx=f.h, initial=0.0), f.a, f.b)


def write_csv(path, f: GridFunction):
    """Write ``f`` as a two-column ``t,value`` CSV with a header line.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, f)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, f)


def _write_rows(fh, f):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "value"])
    for t, v in zip(f.t, f.values):
        writer.writerow([repr(float(t)), repr(float(v))])


def read_csv(path) -> GridFunction:
    """Read a ``t,value`` CSV, checking that the abscissae are uniform."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["t", "value"]:
            raise InvalidParameterError(f"{path}: expected header 't,value'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise InvalidParameterError(f"{path}: need at least two rows")
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    a, b = t[0], t[-1]
    grid = a + (b - a) / (t.size - 1) * np.arange(t.size)
    if np.max(np.abs(t - grid)) > UNIFORMITY_TOL * max(1.0, abs(b - a)):
        raise InvalidParameterError(f"{path}: abscissae are not uniform")
    return GridFunction(v, a, b)
