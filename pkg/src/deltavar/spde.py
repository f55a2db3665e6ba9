"""Spatial slices of fractional stochastic heat equations.

Two geometries are supported.

``dirichlet01``
    ``dX = (-theta (-Lap)^{alpha/2} X + F(X)) dt + sigma (-Lap)^{-gamma} dW`` on
    (0, 1) with Dirichlet boundary, expanded in ``Phi_k = sqrt(2) sin(k pi x)``
    with eigenvalues ``lambda_k = (k pi)**2``.  Without nonlinearity every mode
    is an Ornstein-Uhlenbeck process and is sampled exactly at the observation
    time; otherwise an exponential Euler scheme is used.

``whole_line``
    The linear equation on the real line with Riesz-type noise of Fourier
    multiplier ``|xi|**(-4 gamma)``.  At fixed time the solution is stationary in
    space with spectral density
    ``f_t(xi) = sigma**2 / (2 pi) |xi|**(-4 gamma) (1 - exp(-2 theta t |xi|**alpha)) / (2 theta |xi|**alpha)``
    and is drawn by random-phase spectral synthesis.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Tuple, Union

import numpy as np
import scipy.fft

from .errors import InvalidParameterError, SimulationDivergedError
from .findiff import GridFunction
from .rng import NormalStream

DEFAULT_N_MODES = 2 ** 16
DIRICHLET = "dirichlet01"
WHOLE_LINE = "whole_line"
_MAX_DST_SIZE = 2 ** 24
_INT_TOL = 1e-9


# ---------------------------------------------------------------------------
# model description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroNonlinearity:
    kind = "zero"

    def __str__(self):
        return "zero"


@dataclass(frozen=True)
class Polynomial:
    """Reaction term ``F(u) = sum_i coefficients[i] * u**i``."""

    coefficients: Tuple[float, ...]
    kind = "polynomial"

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise InvalidParameterError("polynomial nonlinearity needs coefficients")
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, u):
        acc = np.full_like(u, self.coefficients[-1])
        for c in self.coefficients[-2::-1]:
            acc = acc * u + c
        return acc

    def __str__(self):
        return "poly:" + ",".join(repr(c) for c in self.coefficients)


@dataclass(frozen=True)
class Advection:
    """Transport term ``F(u) = v(x) * du/dx``; ``velocity`` is a constant or a callable of ``x``."""

    velocity: Union[float, Callable] = 1.0
    kind = "advection"

    def speed(self, x):
        if callable(self.velocity):
            return np.asarray(self.velocity(x), dtype=np.float64)
        return np.full_like(x, float(self.velocity))

    def __str__(self):
        return "advection"


ZERO = ZeroNonlinearity()


def parse_nonlinearity(text: str):
    """Parse ``zero``, ``poly:c0,c1,...`` or ``advection[:v]``."""
    text = text.strip()
    if text == "zero":
        return ZERO
    if text.startswith("poly:"):
        try:
            return Polynomial(tuple(float(c) for c in text[5:].split(",")))
        except ValueError as exc:
            raise InvalidParameterError(f"bad polynomial coefficients in {text!r}") from exc
    if text == "advection":
        return Advection()
    if text.startswith("advection:"):
        return Advection(float(text[10:]))
    raise InvalidParameterError(f"unknown nonlinearity {text!r}")


@dataclass(frozen=True)
class SpdeModel:
    """Equation parameters; ``s_star = 2 gamma + alpha/2 - 1/2`` is the spatial regularity."""

    theta: float = 1.0
    sigma: float = 1.0
    alpha: float = 2.0
    gamma: float = 0.5
    nonlinearity: object = ZERO
    domain: str = DIRICHLET

    def __post_init__(self):
        for name in ("theta", "sigma", "alpha"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.gamma >= 0:
            raise InvalidParameterError(f"gamma must be non-negative, got {self.gamma}")
        s = self.s_star
        if not s > 0:
            raise InvalidParameterError(f"need s* = 2 gamma + alpha/2 - 1/2 > 0, got {s:.6g}")
        if abs(s - round(s)) < _INT_TOL:
            raise InvalidParameterError(f"s* = {s:.6g} must not be an integer")
        linear = isinstance(self.nonlinearity, ZeroNonlinearity)
        if self.domain == DIRICHLET:
            if not linear and not self.gamma > 0.25:
                raise InvalidParameterError("a nonlinearity requires gamma > 1/4")
        elif self.domain == WHOLE_LINE:
            if not 0.0 < self.gamma < 0.25:
                raise InvalidParameterError(
                    f"whole-line noise needs gamma in (0, 1/4), got {self.gamma}")
            if not linear:
                raise InvalidParameterError("the whole-line equation must be linear")
        else:
            raise InvalidParameterError(f"unknown domain {self.domain!r}")

    @property
    def s_star(self) -> float:
        return 2.0 * self.gamma + self.alpha / 2.0 - 0.5

    @property
    def is_linear(self) -> bool:
        return isinstance(self.nonlinearity, ZeroNonlinearity)


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Coefficients of ``X_t`` against ``Phi_k``, ``k = 1..n_modes``."""

    modes: np.ndarray
    t: float
    model: SpdeModel = None

    def __post_init__(self):
        modes = np.array(self.modes, dtype=np.float64)
        if modes.ndim != 1 or modes.size < 1:
            raise InvalidParameterError("modes must be a non-empty vector")
        if not np.all(np.isfinite(modes)):
            raise InvalidParameterError("modes must be finite")
        modes.setflags(write=False)
        object.__setattr__(self, "modes", modes)

    @property
    def n_modes(self) -> int:
        return self.modes.size


@dataclass(frozen=True, eq=False)
class SpdeField:
    model: SpdeModel
    t: float
    values: GridFunction
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Dirichlet problem
# ---------------------------------------------------------------------------

def _eigen(n_modes):
    k = np.arange(1, n_modes + 1, dtype=np.float64)
    return (k * math.pi) ** 2


def _check_dirichlet(model, t, n_modes):
    if model.domain != DIRICHLET:
        raise InvalidParameterError("model domain must be dirichlet01")
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidParameterError(f"n_modes must be a positive integer, got {n_modes}")
    if not t > 0:
        raise InvalidParameterError(f"observation time must be positive, got {t}")


def linear_mode_variance(model: SpdeModel, t: float, n_modes: int) -> np.ndarray:
    """Exact variance of each mode of the linear equation at time ``t``."""
    lam = _eigen(n_modes)
    rate = model.theta * lam ** (model.alpha / 2.0)
    return model.sigma ** 2 * lam ** (-2.0 * model.gamma) * -np.expm1(-2.0 * rate * t) / (2.0 * rate)


def simulate_linear_dirichlet(model: SpdeModel, t: float, n_modes: int = DEFAULT_N_MODES,
                              seed: int = 0) -> SpectralState:
    """Sample the linear Dirichlet solution at time ``t`` exactly, mode by mode."""
    _check_dirichlet(model, t, n_modes)
    if not model.is_linear:
        raise InvalidParameterError("simulate_linear_dirichlet needs a zero nonlinearity")
    sd = np.sqrt(linear_mode_variance(model, t, n_modes))
    return SpectralState(sd * NormalStream(seed).normal(n_modes), t, model)


class _PseudoSpectral:
    """Transforms between the first ``n`` sine modes and ``P - 1 = 2n - 1`` interior points."""

    def __init__(self, n_modes):
        self.n = n_modes
        self.P = 2 * n_modes
        self.x = np.arange(1, self.P) / self.P
        self.k_pi = np.arange(1, n_modes + 1) * math.pi

    def to_grid(self, c):
        pad = np.zeros(self.P - 1)
        pad[:self.n] = c
        return (math.sqrt(2.0) / 2.0) * scipy.fft.dst(pad, type=1)

    def derivative_to_grid(self, c):
        pad = np.zeros(self.P + 1)
        pad[1:self.n + 1] = c * self.k_pi
        return ((math.sqrt(2.0) / 2.0) * scipy.fft.dct(pad, type=1))[1:self.P]

    def project(self, values):
        # trapezoid rule for int_0^1 f Phi_k with f vanishing at the endpoints
        return (math.sqrt(2.0) / (2.0 * self.P)) * scipy.fft.dst(values, type=1)[:self.n]


def simulate_semilinear_dirichlet(model: SpdeModel, t: float, n_modes: int,
                                  n_time_steps: int, seed: int = 0,
                                  noise_substeps: int = 1) -> SpectralState:
    """Exponential Euler integration of the Dirichlet problem up to time ``t``.

    Each step applies the exact linear propagator, the frozen nonlinearity
    ``F(X_n)`` weighted by ``(1 - exp(-r_k dt)) / r_k`` with
    ``r_k = theta lambda_k**(alpha/2)``, and the exact Ornstein-Uhlenbeck noise
    increment of the step.  The noise of one step is assembled from
    ``noise_substeps`` finer exact increments, drawn in order from a single
    stream, so runs with equal ``n_time_steps * noise_substeps`` are driven by
    the same Brownian path.
    """
    _check_dirichlet(model, t, n_modes)
    if int(n_time_steps) != n_time_steps or n_time_steps < 1:
        raise InvalidParameterError(f"n_time_steps must be a positive integer, got {n_time_steps}")
    if int(noise_substeps) != noise_substeps or noise_substeps < 1:
        raise InvalidParameterError("noise_substeps must be a positive integer")
    dt = t / n_time_steps
    sub = dt / noise_substeps
    lam = _eigen(n_modes)
    rate = model.theta * lam ** (model.alpha / 2.0)
    prop = np.exp(-rate * dt)
    weight = -np.expm1(-rate * dt) / rate
    prop_sub = np.exp(-rate * sub)
    sd_sub = model.sigma * lam ** (-model.gamma) * np.sqrt(-np.expm1(-2.0 * rate * sub) / (2.0 * rate))

    nl = model.nonlinearity
    grid = None if model.is_linear else _PseudoSpectral(n_modes)
    speed = nl.speed(grid.x) if isinstance(nl, Advection) else None
    stream = NormalStream(seed)
    c = np.zeros(n_modes)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_time_steps):
            noise = np.zeros(n_modes)
            for _ in range(noise_substeps):
                noise = prop_sub * noise + sd_sub * stream.normal(n_modes)
            if grid is None:
                drift = 0.0
            elif isinstance(nl, Advection):
                drift = weight * grid.project(speed * grid.derivative_to_grid(c))
            else:
                drift = weight * grid.project(nl(grid.to_grid(c)))
            c = prop * c + drift + noise
            if not np.all(np.isfinite(c)):
                raise SimulationDivergedError(
                    f"solution became non-finite at step {step + 1} of {n_time_steps}", step + 1)
    return SpectralState(c, t, model)


def _commensurate_size(a, b, n_points):
    """Smallest ``P`` with every grid point an integer multiple of ``1/P``, or ``None``."""
    try:
        fa = Fraction(a).limit_denominator(1 << 20)
        fb = Fraction(b).limit_denominator(1 << 20)
    except (OverflowError, ValueError):
        return None
    if abs(float(fa) - a) > 1e-15 or abs(float(fb) - b) > 1e-15:
        return None
    fh = (fb - fa) / (n_points - 1)
    P = math.lcm(fa.denominator, fh.denominator)
    return P if P <= _MAX_DST_SIZE else None


def _evaluate_dst(modes, a, n_points, h_units, a_units, P):
    n = modes.size
    k = np.arange(1, n + 1)
    r = k % (2 * P)
    sign = np.where(r > P, -1.0, 1.0)
    r = np.where(r > P, 2 * P - r, r)
    keep = (r > 0) & (r < P)
    folded = np.bincount(r[keep], weights=(sign * modes)[keep], minlength=P)[1:P]
    interior = (math.sqrt(2.0) / 2.0) * scipy.fft.dst(folded, type=1)
    full = np.concatenate([[0.0], interior, [0.0]])
    idx = a_units + h_units * np.arange(n_points)
    return full[idx]


def _evaluate_direct(modes, x, block=256):
    k_pi = np.arange(1, modes.size + 1) * math.pi
    out = np.empty(x.size)
    for i in range(0, x.size, block):
        xs = x[i:i + block]
        out[i:i + block] = np.sin(np.outer(xs, k_pi)) @ modes
    return math.sqrt(2.0) * out


def evaluate_field(state: SpectralState, a: float = 0.0, b: float = 1.0,
                   n_points: int = 4097) -> SpdeField:
    """Evaluate ``sum_k modes[k] Phi_k`` at ``n_points`` uniform points of ``[a, b]``.

    When the grid consists of multiples of ``1/P`` for a moderate integer ``P``
    (true for decimal windows such as [0.2, 0.8] with power-of-two
    resolutions), the modes are aliased onto ``k mod 2P`` and the sum becomes
    one type-I discrete sine transform.  Otherwise a blocked direct sum is used.
    """
    if not 0.0 <= a < b <= 1.0:
        raise InvalidParameterError(f"need 0 <= a < b <= 1, got a={a}, b={b}")
    if int(n_points) != n_points or n_points < 2:
        raise InvalidParameterError(f"n_points must be an integer >= 2, got {n_points}")
    P = _commensurate_size(a, b, n_points)
    if P is not None:
        fa = Fraction(a).limit_denominator(1 << 20)
        fh = (Fraction(b).limit_denominator(1 << 20) - fa) / (n_points - 1)
        vals = _evaluate_dst(state.modes, a, n_points, int(fh * P), int(fa * P), P)
    else:
        x = a + (b - a) / (n_points - 1) * np.arange(n_points)
        vals = _evaluate_direct(state.modes, x)
    return SpdeField(state.model, state.t, GridFunction(vals, a, b),
                     {"evaluation": "dst" if P is not None else "direct"})


# ---------------------------------------------------------------------------
# whole line
# ---------------------------------------------------------------------------

def spectral_density(model: SpdeModel, t: float, xi):
    """``f_t(xi)`` of the whole-line solution; finite limit used as ``xi -> 0``."""
    xi = np.abs(np.asarray(xi, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = 2.0 * model.theta * t * xi ** model.alpha
        ratio = np.where(u > 0, -np.expm1(-u) / np.where(u > 0, u, 1.0), 1.0)
        out = model.sigma ** 2 / (2.0 * math.pi) * t * ratio * xi ** (-4.0 * model.gamma)
    return out


class WholeLineSampler:
    """Reusable random-phase sampler of the whole-line slice on a uniform window.

    The frequency grid is ``xi_k = k dxi``, ``k = 1..K`` with ``K dxi >= xi_cut``,
    where ``dxi = 2 pi / (P h)`` for an integer period ``P >= n_points`` chosen so
    that ``dxi`` does not exceed ``xi_cut / n_xi``.  On the sampling grid all
    frequencies congruent modulo ``P`` coincide, so their weights
    ``2 f(xi_k) dxi`` are summed and one FFT of length ``P`` produces a draw
    with exactly the law of the full random-phase sum.
    """

    def __init__(self, model: SpdeModel, t: float, window=(0.0, 1.0), n_points: int = 4097,
                 xi_cut: float = None, n_xi: int = None):
        if model.domain != WHOLE_LINE:
            raise InvalidParameterError("model domain must be whole_line")
        if not 0.0 < model.gamma < 0.25:
            raise InvalidParameterError(f"gamma must lie in (0, 1/4), got {model.gamma}")
        if not t > 0:
            raise InvalidParameterError(f"observation time must be positive, got {t}")
        x_min, x_max = map(float, window)
        if not x_max > x_min:
            raise InvalidParameterError("window must satisfy x_min < x_max")
        if int(n_points) != n_points or n_points < 2:
            raise InvalidParameterError("n_points must be an integer >= 2")
        self.model, self.t = model, float(t)
        self.window, self.n_points = (x_min, x_max), int(n_points)
        h = (x_max - x_min) / (n_points - 1)
        self.h = h
        if xi_cut is None:
            xi_cut = 1024.0 * math.pi / h
        if not xi_cut > 0:
            raise InvalidParameterError("xi_cut must be positive")
        if n_xi is None:
            P = 4 * (n_points - 1)
        else:
            if int(n_xi) != n_xi or n_xi < 1:
                raise InvalidParameterError("n_xi must be a positive integer")
            P = max(n_points, math.ceil(2.0 * math.pi * n_xi / (xi_cut * h)))
        self.P = P
        self.dxi = 2.0 * math.pi / (P * h)
        self.n_xi = math.ceil(xi_cut / self.dxi)
        self.xi_cut = self.n_xi * self.dxi

        W = np.zeros(P)
        chunk = 64 * P
        for start in range(1, self.n_xi + 1, chunk):
            k = np.arange(start, min(start + chunk, self.n_xi + 1))
            w = 2.0 * spectral_density(model, t, k * self.dxi) * self.dxi
            W += np.bincount(k % P, weights=w, minlength=P)
        self.variance = float(math.fsum(W))
        self._amp = np.sqrt(W)
        self._amp.setflags(write=False)
        e = model.alpha + 4.0 * model.gamma - 1.0
        self.tail_bound = (model.sigma ** 2 / (2.0 * math.pi * model.theta)
                           * self.xi_cut ** (-e) / e)

    @property
    def metadata(self):
        return {
            "variance": self.variance,
            "tail_bound": self.tail_bound,
            "tail_warning": bool(self.tail_bound > 1e-6 * self.variance),
            "delta_xi": self.dxi,
            "xi_cut": self.xi_cut,
            "n_xi": self.n_xi,
            "period_points": self.P,
        }

    def increment_variance(self, lag_points: int) -> float:
        """Exact variance of ``X(x + lag h) - X(x)`` under the discretized spectrum."""
        r = np.arange(self.P)
        return float(np.sum(self._amp ** 2 * 2.0 * (1.0 - np.cos(2.0 * math.pi * r * lag_points / self.P))))

    def sample(self, seed: int) -> SpdeField:
        z = NormalStream(seed).normal(2 * self.P)
        coef = self._amp * (z[:self.P] - 1j * z[self.P:])
        vals = np.real(self.P * scipy.fft.ifft(coef))[:self.n_points]
        return SpdeField(self.model, self.t, GridFunction(vals, *self.window), self.metadata)


def simulate_whole_line(model: SpdeModel, t: float, window=(0.0, 1.0), n_points: int = 4097,
                        quadrature=None, seed: int = 0) -> SpdeField:
    """One draw of the whole-line slice; ``quadrature = (xi_cut, n_xi)`` or ``None`` for defaults."""
    xi_cut, n_xi = quadrature if quadrature is not None else (None, None)
    return WholeLineSampler(model, t, window, n_points, xi_cut, n_xi).sample(seed)
