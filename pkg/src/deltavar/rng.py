"""Portable Gaussian random numbers.

Every stream is a Philox4x64-10 counter-based generator whose 128-bit key is
the 64-bit seed (high word zero) and whose counter starts at zero.  Uniforms
are built from the top 53 bits of each 64-bit output as
``(bits + 0.5) * 2**-53``, which lies strictly inside (0, 1).  Normals are
obtained by inversion with Wichura's AS241 (PPND16) rational approximation,
the same algorithm as :meth:`statistics.NormalDist.inv_cdf`.

The whole chain only uses integer arithmetic and a fixed sequence of IEEE
operations, so a seed reproduces the same draws on any platform that
implements Philox4x64-10.
"""

import numpy as np

from .errors import InvalidParameterError

_TWO_M53 = 2.0 ** -53

# AS241 PPND16 coefficients (Wichura 1988).
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
      5226.4952788528545610)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494,
      0.68976733498510000455, 0.14810397642748007459, 0.0151986665636164571966,
      5.475938084995344946e-4, 1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4,
      1.8463183175100546818e-5, 1.4215117583164458887e-7,
      2.04426310338993978564e-15)


def _horner(coeffs, x):
    # coefficients in ascending order, evaluated highest first
    acc = np.full_like(x, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def ndtri_as241(p):
    """Inverse standard normal CDF by Wichura's AS241 algorithm.

    ``p`` must lie in the open interval (0, 1); accuracy is about 1e-16.
    """
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _horner(_E, rf) / _horner(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


class NormalStream:
    """Sequential standard-normal draws from one seeded Philox stream."""

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._bitgen = np.random.Philox(key=seed)

    def uniform(self, size):
        bits = self._bitgen.random_raw(size) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * _TWO_M53

    def normal(self, size):
        return ndtri_as241(self.uniform(size))


def standard_normal(seed, size):
    """Draw ``size`` standard normals from a fresh stream keyed by ``seed``."""
    return NormalStream(seed).normal(size)
