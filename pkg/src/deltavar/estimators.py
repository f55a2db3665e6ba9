"""Bias-corrected estimators of ``sigma`` and ``theta`` from one spatial slice.

All estimators invert the law of large numbers
``V_{q,M,s*,N}(X_t) -> tau_q * (scale)**(q/2)`` where the scale is
``sigma**2 nu_H mu_{M,s*} / (2 theta)`` on the Dirichlet interval and
``c_{alpha,gamma,m}**2 mu_{M,s*} sigma**2 / theta`` on the whole line.
Standard errors plug the estimate into the asymptotic variance.
"""

import math
from dataclasses import dataclass, field

from .constants import (CltConstants, c_alpha_gamma_m, clt_constants, decompose, mu, nu)
from .errors import DegenerateInputError, InvalidParameterError
from .findiff import GridFunction, VariationParams, delta_power_variation

Z_95 = 1.959963984540054
_TOL = 1e-9


@dataclass(frozen=True)
class KnownTheta:
    value: float
    kind = "theta"


@dataclass(frozen=True)
class KnownSigma:
    value: float
    kind = "sigma"


@dataclass(frozen=True)
class DirichletGeometry:
    kind = "dirichlet01"


@dataclass(frozen=True)
class WholeLineGeometry:
    alpha: float
    gamma: float
    m: int
    kind = "whole_line"

    @property
    def s_star(self):
        return 2.0 * self.gamma + self.alpha / 2.0 - 0.5


def parse_known(text: str):
    """``theta=1.0`` or ``sigma=0.5``."""
    name, _, val = text.partition("=")
    try:
        value = float(val)
    except ValueError as exc:
        raise InvalidParameterError(f"bad known parameter {text!r}") from exc
    if not value > 0:
        raise InvalidParameterError(f"known parameter must be positive, got {value}")
    if name.strip() == "theta":
        return KnownTheta(value)
    if name.strip() == "sigma":
        return KnownSigma(value)
    raise InvalidParameterError(f"known parameter must be theta or sigma, got {name!r}")


def parse_geometry(text: str):
    """``dirichlet`` or ``whole-line:alpha,gamma,m``."""
    text = text.strip()
    if text in ("dirichlet", "dirichlet01"):
        return DirichletGeometry()
    for prefix in ("whole-line:", "whole_line:"):
        if text.startswith(prefix):
            try:
                a, g, m = text[len(prefix):].split(",")
                return WholeLineGeometry(float(a), float(g), int(m))
            except ValueError as exc:
                raise InvalidParameterError(f"bad geometry {text!r}") from exc
    raise InvalidParameterError(f"unknown geometry {text!r}")


@dataclass(frozen=True)
class EstimationInput:
    observations: GridFunction
    q: int
    M: int
    s_star: float
    known: object
    geometry: object = DirichletGeometry()

    def __post_init__(self):
        VariationParams(self.q, self.M, self.s_star)
        check_hypotheses(self.M, self.s_star)
        if not self.known.value > 0:
            raise InvalidParameterError("known parameter must be positive")
        g = self.geometry
        if isinstance(g, WholeLineGeometry):
            if abs(g.s_star - self.s_star) > _TOL:
                raise InvalidParameterError(
                    f"s_star={self.s_star} does not match 2 gamma + alpha/2 - 1/2 = {g.s_star}")
            if decompose(self.s_star).m != g.m:
                raise InvalidParameterError(
                    f"m={g.m} is not the integer part of s_star={self.s_star}")
        elif not isinstance(g, DirichletGeometry):
            raise InvalidParameterError(f"unknown geometry {g!r}")

    @property
    def n_intervals(self):
        return self.observations.n_intervals


@dataclass(frozen=True)
class EstimationResult:
    estimate: float
    target: str
    std_error: float
    ci_95: tuple
    v_stat: float
    constants_used: CltConstants = field(repr=False)
    clt_valid: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "estimate": self.estimate, "target": self.target, "std_error": self.std_error,
            "ci_95": list(self.ci_95) if self.ci_95 is not None else None,
            "v_stat": self.v_stat, "clt_valid": self.clt_valid,
            "constants_used": self.constants_used.to_dict(),
            "diagnostics": dict(self.diagnostics),
        }


def check_hypotheses(M, s_star):
    """Require ``M = m+1`` with ``H < 1/2`` or ``M >= m+2`` for ``s* = m + H``."""
    d = decompose(s_star)
    if M == d.m + 1 and d.H < 0.5:
        return d
    if M >= d.m + 2:
        return d
    raise InvalidParameterError(
        f"M={M} with s*={s_star} (m={d.m}, H={d.H:.6g}): need M = m+1 with H < 1/2, or M >= m+2")


def select_M(s_star: float) -> int:
    """Default difference order ``ceil(s*) + 2``."""
    if not s_star > 0:
        raise InvalidParameterError(f"s* must be positive, got {s_star}")
    if abs(s_star - round(s_star)) < _TOL:
        raise InvalidParameterError(f"s* = {s_star} must not be an integer")
    return math.ceil(s_star) + 2


def naive_bias_factor(q, M, m, H):
    """``(mu_{M,m+H} / mu_{M-m,H})**(q/2)``: the error of treating ``h^-m Delta^m`` as ``D^m``."""
    return (mu(M, m, H) / mu(M - m, 0, H)) ** (q / 2.0)


def _prepare(inp, constants):
    d = decompose(inp.s_star)
    if constants is None:
        constants = clt_constants(inp.q, inp.M, d.m, d.H)
    elif (constants.q, constants.M, constants.m) != (inp.q, inp.M, d.m) or \
            abs(constants.H - d.H) > _TOL:
        raise InvalidParameterError("precomputed constants do not match the input")
    V = delta_power_variation(inp.observations, VariationParams(inp.q, inp.M, inp.s_star))
    if not V > 0:
        raise DegenerateInputError("Delta-power variation vanishes; estimator undefined")
    return d, constants, V


def _finish(est, target, spread, inp, constants, V, clt_valid, extra=None):
    N = inp.n_intervals
    diag = {"n_intervals": N, "h": inp.observations.h, "s_star": inp.s_star}
    if extra:
        diag.update(extra)
    if clt_valid and constants.sigma_sq is not None:
        se = spread * math.sqrt(constants.sigma_sq) / (constants.tau_q * math.sqrt(N))
        ci = (est - Z_95 * se, est + Z_95 * se)
    else:
        clt_valid = False
        se, ci = None, None
        diag["rate"] = "o_P(N^(-1/2+eps))"
    if not (math.isfinite(est) and est > 0):
        raise DegenerateInputError(f"estimate is not finite and positive: {est}")
    return EstimationResult(est, target, se, ci, V, constants, clt_valid, diag)


def _dirichlet_clt(s_star, q):
    return q % 2 == 0 and abs((s_star - 0.5) - round(s_star - 0.5)) < _TOL


def _require(inp, known_cls, geom_cls):
    if not isinstance(inp.known, known_cls):
        raise InvalidParameterError(f"this estimator needs {known_cls.kind} known")
    if not isinstance(inp.geometry, geom_cls):
        raise InvalidParameterError(f"this estimator needs {geom_cls.kind} geometry")


def estimate_sigma_q_bounded(inp: EstimationInput, constants=None) -> EstimationResult:
    """``tau_q**-1 (2 theta / (nu_H mu))**(q/2) V`` for ``sigma**q``, theta known."""
    _require(inp, KnownTheta, DirichletGeometry)
    d, c, V = _prepare(inp, constants)
    nu_h = nu(d.H)
    est = (2.0 * inp.known.value / (nu_h * c.mu)) ** (inp.q / 2.0) * V / c.tau_q
    return _finish(est, "sigma_pow_q", est, inp, c, V, _dirichlet_clt(inp.s_star, inp.q),
                   {"nu_H": nu_h})


def estimate_theta_bounded(inp: EstimationInput, constants=None) -> EstimationResult:
    """``tau_q**(2/q) nu_H mu sigma**2 / (2 V**(2/q))``, sigma known."""
    _require(inp, KnownSigma, DirichletGeometry)
    d, c, V = _prepare(inp, constants)
    nu_h = nu(d.H)
    q = inp.q
    est = c.tau_q ** (2.0 / q) * nu_h * c.mu * inp.known.value ** 2 / (2.0 * V ** (2.0 / q))
    return _finish(est, "theta", 2.0 * est / q, inp, c, V, _dirichlet_clt(inp.s_star, q),
                   {"nu_H": nu_h})


def estimate_sigma_whole_line(inp: EstimationInput, constants=None, c_agm=None) -> EstimationResult:
    """``c**-1 tau_q**(-1/q) mu**(-1/2) sqrt(theta) V**(1/q)``, theta known."""
    _require(inp, KnownTheta, WholeLineGeometry)
    g = inp.geometry
    d, c, V = _prepare(inp, constants)
    cst = c_agm if c_agm is not None else c_alpha_gamma_m(g.alpha, g.gamma, g.m)
    q = inp.q
    est = math.sqrt(inp.known.value) * V ** (1.0 / q) / (cst * c.tau_q ** (1.0 / q) * math.sqrt(c.mu))
    return _finish(est, "sigma", est / q, inp, c, V, c.sigma_sq is not None, {"c": cst})


def estimate_theta_whole_line(inp: EstimationInput, constants=None, c_agm=None) -> EstimationResult:
    """``c**2 tau_q**(2/q) mu sigma**2 V**(-2/q)``, sigma known."""
    _require(inp, KnownSigma, WholeLineGeometry)
    g = inp.geometry
    d, c, V = _prepare(inp, constants)
    cst = c_agm if c_agm is not None else c_alpha_gamma_m(g.alpha, g.gamma, g.m)
    q = inp.q
    est = cst ** 2 * c.tau_q ** (2.0 / q) * c.mu * inp.known.value ** 2 * V ** (-2.0 / q)
    return _finish(est, "theta", 2.0 * est / q, inp, c, V, c.sigma_sq is not None, {"c": cst})


def estimate(inp: EstimationInput, constants=None) -> EstimationResult:
    """Dispatch on the known parameter and the geometry."""
    whole = isinstance(inp.geometry, WholeLineGeometry)
    if isinstance(inp.known, KnownTheta):
        f = estimate_sigma_whole_line if whole else estimate_sigma_q_bounded
    else:
        f = estimate_theta_whole_line if whole else estimate_theta_bounded
    return f(inp, constants)
