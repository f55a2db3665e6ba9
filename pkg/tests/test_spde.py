import math

import numpy as np
import pytest
from scipy import integrate, stats

from deltavar import constants as C
from deltavar.errors import InvalidParameterError, SimulationDivergedError
from deltavar.estimators import select_M
from deltavar.findiff import VariationParams, delta_power_variation
from deltavar.spde import (DIRICHLET, WHOLE_LINE, ZERO, Advection, Polynomial, SpdeModel,
                           SpectralState, WholeLineSampler, _evaluate_direct, _PseudoSpectral,
                           evaluate_field, linear_mode_variance, parse_nonlinearity,
                           simulate_linear_dirichlet, simulate_semilinear_dirichlet,
                           simulate_whole_line, spectral_density)


# ---- model ----------------------------------------------------------------

def test_model_validation():
    assert SpdeModel(alpha=2, gamma=0.5).s_star == 1.5
    with pytest.raises(InvalidParameterError):
        SpdeModel(alpha=2, gamma=0.75)  # s* = 2
    with pytest.raises(InvalidParameterError):
        SpdeModel(theta=0.0)
    with pytest.raises(InvalidParameterError):
        SpdeModel(gamma=0.2, nonlinearity=Polynomial((1.0,)))
    with pytest.raises(InvalidParameterError):
        SpdeModel(alpha=1.4, gamma=0.3, domain=WHOLE_LINE)
    with pytest.raises(InvalidParameterError):
        SpdeModel(alpha=1.4, gamma=0.0, domain=WHOLE_LINE)
    with pytest.raises(InvalidParameterError):
        SpdeModel(alpha=1.4, gamma=0.2, domain="torus")


def test_parse_nonlinearity():
    assert parse_nonlinearity("zero") is ZERO
    assert parse_nonlinearity("poly:1,0,-1").coefficients == (1.0, 0.0, -1.0)
    assert parse_nonlinearity("advection:2").velocity == 2.0
    assert parse_nonlinearity(str(Polynomial((0.5, 2.0)))) == Polynomial((0.5, 2.0))
    for bad in ("cubic", "poly:a,b"):
        with pytest.raises(InvalidParameterError):
            parse_nonlinearity(bad)


def test_polynomial_horner():
    u = np.linspace(-2, 2, 9)
    assert np.allclose(Polynomial((1.0, -2.0, 0.0, 3.0))(u), 1 - 2 * u + 3 * u ** 3)


# ---- linear Dirichlet modes -----------------------------------------------

def test_mode_variance_stationary_limit():
    v = linear_mode_variance(SpdeModel(alpha=2, gamma=0.0), 50.0, 3)
    assert v[0] == pytest.approx(1 / (2 * math.pi ** 2), rel=1e-14)
    assert v[2] == pytest.approx(1 / (2 * 9 * math.pi ** 2), rel=1e-14)


@pytest.fixture(scope="module")
def linear_modes():
    model = SpdeModel(alpha=2, gamma=0.5)
    draws = np.array([simulate_linear_dirichlet(model, 1.0, 128, seed).modes for seed in range(10_000)])
    return model, draws


@pytest.mark.parametrize("k", [1, 10, 100])
def test_mode_moments(linear_modes, k):
    model, draws = linear_modes
    x = draws[:, k - 1]
    var = linear_mode_variance(model, 1.0, k)[-1]
    n = x.size
    assert abs(x.mean()) < 4 * math.sqrt(var / n)
    assert abs(np.mean(x ** 2) - var) < 4 * np.std(x ** 2, ddof=1) / math.sqrt(n)


def test_mode_independence(linear_modes):
    _, draws = linear_modes
    assert abs(np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]) < 4 / math.sqrt(draws.shape[0])


def test_linear_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        simulate_linear_dirichlet(SpdeModel(), 1.0, 0)
    with pytest.raises(InvalidParameterError):
        simulate_linear_dirichlet(SpdeModel(), 0.0, 8)
    with pytest.raises(InvalidParameterError):
        simulate_linear_dirichlet(SpdeModel(nonlinearity=Polynomial((1.0,))), 1.0, 8)


# ---- semilinear solver ----------------------------------------------------

def test_pseudo_spectral_round_trip_and_derivative():
    ps = _PseudoSpectral(32)
    c = np.zeros(32)
    c[[0, 4, 31]] = [1.0, -0.5, 0.25]
    assert np.allclose(ps.project(ps.to_grid(c)), c, atol=1e-13)
    expected = sum(ck * math.sqrt(2) * (k + 1) * math.pi * np.cos((k + 1) * math.pi * ps.x)
                   for k, ck in enumerate(c))
    assert np.allclose(ps.derivative_to_grid(c), expected, atol=1e-11)


def test_zero_nonlinearity_matches_linear_law():
    model = SpdeModel(alpha=2, gamma=0.5)
    x = np.array([simulate_semilinear_dirichlet(model, 1.0, 8, 10, seed).modes[0]
                  for seed in range(2000)])
    sd = math.sqrt(linear_mode_variance(model, 1.0, 1)[0])
    assert stats.kstest(x / sd, "norm").pvalue > 0.01


def test_constant_forcing():
    c0, n, P = 3.0, 64, 128
    model = SpdeModel(sigma=1e-12, alpha=2, gamma=0.5, nonlinearity=Polynomial((c0,)))
    modes = simulate_semilinear_dirichlet(model, 0.7, n, 40, seed=1).modes
    k = np.arange(1, n + 1)
    rate = (k * math.pi) ** 2
    growth = -np.expm1(-rate * 0.7) / rate
    disc = np.where(k % 2 == 1, math.sqrt(2) / P / np.tan(k * math.pi / (2 * P)), 0.0)
    assert np.allclose(modes, c0 * disc * growth, rtol=1e-9, atol=1e-10)
    exact = np.where(k % 2 == 1, 2 * math.sqrt(2) / (k * math.pi), 0.0)
    low = slice(0, 5)
    rel = np.abs(modes[low] - c0 * exact[low] * growth[low]) / (c0 * growth[low] * exact[low]).clip(1e-300)
    assert np.all(rel[::2] < (k[low][::2] * math.pi / (2 * P)) ** 2)


def test_time_step_convergence_order():
    model = SpdeModel(alpha=2, gamma=0.5, nonlinearity=Polynomial((0.0, 1.0, 0.0, -1.0)))
    levels = (32, 64, 128, 256)
    sq = np.zeros(3)
    for seed in range(40):
        runs = [simulate_semilinear_dirichlet(model, 1.0, 64, L, seed, noise_substeps=256 // L).modes
                for L in levels]
        sq += [np.sum((a - b) ** 2) for a, b in zip(runs, runs[1:])]
    rms = np.sqrt(sq / 40)
    order = -np.polyfit(np.log(levels[:-1]), np.log(rms), 1)[0]
    assert order >= 1.0
    assert np.all(rms[:-1] / rms[1:] > 1.8)


def test_noise_substeps_share_brownian_path():
    model = SpdeModel(alpha=2, gamma=0.5)
    a = simulate_semilinear_dirichlet(model, 1.0, 16, 4, seed=3, noise_substeps=8).modes
    b = simulate_semilinear_dirichlet(model, 1.0, 16, 32, seed=3).modes
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_divergence_reports_step():
    model = SpdeModel(alpha=2, gamma=0.5, nonlinearity=Polynomial((50.0, 0.0, 100.0)))
    with pytest.raises(SimulationDivergedError) as info:
        simulate_semilinear_dirichlet(model, 5.0, 16, 200, seed=0)
    assert 1 <= info.value.step <= 200


def test_advection():
    base = SpdeModel(alpha=2, gamma=0.5)
    still = simulate_semilinear_dirichlet(base, 1.0, 32, 50, seed=4).modes
    zero_v = SpdeModel(alpha=2, gamma=0.5, nonlinearity=Advection(0.0))
    assert np.array_equal(simulate_semilinear_dirichlet(zero_v, 1.0, 32, 50, seed=4).modes, still)
    moving = SpdeModel(alpha=2, gamma=0.5, nonlinearity=Advection(lambda x: np.sin(np.pi * x)))
    out = simulate_semilinear_dirichlet(moving, 1.0, 32, 50, seed=4).modes
    assert np.all(np.isfinite(out)) and not np.allclose(out, still)


# ---- field evaluation -----------------------------------------------------

def test_zero_and_single_mode():
    f = evaluate_field(SpectralState(np.zeros(10), 1.0), 0, 1, 33)
    assert np.all(f.values.values == 0.0)
    g = evaluate_field(SpectralState([1.0], 1.0), 0, 1, 33).values
    assert np.allclose(g.values, math.sqrt(2) * np.sin(math.pi * g.t), atol=1e-15)
    assert g.values[0] == 0.0 and g.values[-1] == 0.0


def test_parseval():
    modes = np.exp(-0.3 * np.arange(40)) * np.cos(np.arange(40))
    f = evaluate_field(SpectralState(modes, 1.0), 0, 1, 4097).values
    mean_sq = f.h * math.fsum(f.values ** 2)
    assert mean_sq == pytest.approx(math.fsum(modes ** 2), rel=1e-6)


@pytest.mark.parametrize("a,b,n", [(0.2, 0.8, 513), (0.0, 1.0, 100), (0.25, 0.5, 65)])
def test_dst_matches_direct_sum(a, b, n):
    modes = np.random.default_rng(0).standard_normal(3000) / np.arange(1, 3001)
    f = evaluate_field(SpectralState(modes, 1.0), a, b, n)
    x = a + (b - a) / (n - 1) * np.arange(n)
    assert np.allclose(f.values.values, _evaluate_direct(modes, x), atol=1e-10)


def test_incommensurate_grid_uses_direct_sum():
    f = evaluate_field(SpectralState([0.0, 1.0], 1.0), 0.1 * math.pi / 4, 0.9, 11)
    assert f.metadata["evaluation"] == "direct"
    assert np.allclose(f.values.values, math.sqrt(2) * np.sin(2 * math.pi * f.values.t))


def test_evaluate_validation():
    s = SpectralState([1.0], 1.0)
    with pytest.raises(InvalidParameterError):
        evaluate_field(s, 0.5, 0.5, 10)
    with pytest.raises(InvalidParameterError):
        evaluate_field(s, 0.0, 1.2, 10)


def _window_V(model, seed, n_modes, q=2, M=None, N=4096):
    M = M or select_M(model.s_star)
    state = simulate_linear_dirichlet(model, 1.0, n_modes, seed)
    f = evaluate_field(state, 0.2, 0.8, N + 1).values
    return delta_power_variation(f, VariationParams(q, M, model.s_star))


def test_mode_truncation_adequate():
    model = SpdeModel(alpha=2, gamma=0.5)
    for seed in range(3):
        v1 = _window_V(model, seed, 2 ** 16)
        v2 = _window_V(model, seed, 2 ** 17)
        assert abs(v2 / v1 - 1) < 0.01


@pytest.mark.parametrize("gamma", [0.375, 0.5, 0.625])
def test_linear_field_variation_mean(gamma):
    model = SpdeModel(alpha=2, gamma=gamma)
    d = C.decompose(model.s_star)
    M = select_M(model.s_star)
    target = C.mu(M, d.m, d.H) * C.nu(d.H) / 2
    v = np.array([_window_V(model, seed, 2 ** 16) for seed in range(100)])
    assert abs(v.mean() - target) < 3 * v.std(ddof=1) / 10


# ---- whole line -----------------------------------------------------------

WL = SpdeModel(alpha=1.4, gamma=0.2, domain=WHOLE_LINE)


def _oracle_increment_variance(model, t, delta):
    f = lambda xi: 4 * spectral_density(model, t, xi) * (1 - math.cos(xi * delta))
    # integrable singularity at 0 and oscillation: split at a few periods
    edge = 20 * math.pi / delta
    head = integrate.quad(f, 0, edge, limit=2000, epsabs=0, epsrel=1e-10)[0]
    g = lambda xi: 4 * spectral_density(model, t, xi)
    tail_smooth = integrate.quad(g, edge, np.inf, epsabs=0, epsrel=1e-10)[0]
    tail_osc = integrate.quad(g, edge, np.inf, weight="cos", wvar=delta)[0]
    return head + tail_smooth - tail_osc


def test_density_small_frequency_limit():
    xi = 1e-9
    expected = WL.sigma ** 2 * 1.0 / (2 * math.pi) * xi ** (-4 * WL.gamma)
    assert spectral_density(WL, 1.0, xi) == pytest.approx(expected, rel=1e-8)
    big = spectral_density(WL, 1.0, 50.0)
    assert big == pytest.approx(50.0 ** -0.8 * (1 - math.exp(-2 * 50 ** 1.4)) / (2 * 50 ** 1.4) / (2 * math.pi))


@pytest.fixture(scope="module")
def wl_draws():
    sampler = WholeLineSampler(WL, 1.0, (0.0, 1.0), 257)
    return sampler, np.array([sampler.sample(seed).values.values for seed in range(2000)])


def test_whole_line_pointwise_variance(wl_draws):
    sampler, X = wl_draws
    x2 = X[:, 100] ** 2
    assert abs(x2.mean() - sampler.variance) < 4 * x2.std(ddof=1) / math.sqrt(x2.size)


@pytest.mark.parametrize("lag", [1, 8, 64])
def test_whole_line_increment_variance(wl_draws, lag):
    sampler, X = wl_draws
    d2 = (X[:, 100 + lag] - X[:, 100]) ** 2
    oracle = _oracle_increment_variance(WL, 1.0, lag * sampler.h)
    assert abs(d2.mean() - oracle) < 4 * d2.std(ddof=1) / math.sqrt(d2.size)


def test_discretized_spectrum_converges():
    # the frequency spacing 2 pi / (P h) biases long lags; refining the period removes it
    h = 1 / 256
    xi_cut = 1024 * math.pi / h
    errs = {}
    for lag in (1, 64):
        oracle = _oracle_increment_variance(WL, 1.0, lag * h)
        errs[lag] = []
        for P in (1024, 4096, 16384):
            s = WholeLineSampler(WL, 1.0, (0.0, 1.0), 257, xi_cut=xi_cut,
                                 n_xi=round(P * xi_cut * h / (2 * math.pi)))
            assert s.P == P
            errs[lag].append(abs(s.increment_variance(lag) / oracle - 1))
    assert errs[1][0] < 2e-3
    assert all(b < a for a, b in zip(errs[64], errs[64][1:]))
    assert errs[64][-1] < 2e-4


def test_whole_line_variogram_slope():
    sampler = WholeLineSampler(WL, 1.0, (0.0, 1.0), 4097)
    lags = [1, 2, 4, 8, 16, 32]
    gamma = np.zeros(len(lags))
    for seed in range(100):
        x = sampler.sample(seed).values.values
        gamma += [np.mean((x[lag:] - x[:-lag]) ** 2) for lag in lags]
    slope = np.polyfit(np.log(lags), np.log(gamma), 1)[0]
    assert abs(slope / 2 - WL.s_star) < 0.05


def test_whole_line_metadata_and_determinism():
    f = simulate_whole_line(WL, 1.0, (0.0, 2.0), 129, seed=5)
    g = simulate_whole_line(WL, 1.0, (0.0, 2.0), 129, seed=5)
    assert np.array_equal(f.values.values, g.values.values)
    md = f.metadata
    assert md["tail_warning"] is False
    e = WL.alpha + 4 * WL.gamma - 1
    assert md["tail_bound"] == pytest.approx(md["xi_cut"] ** -e / (e * 2 * math.pi))
    true_tail = integrate.quad(lambda xi: 2 * spectral_density(WL, 1.0, xi), md["xi_cut"], np.inf)[0]
    assert true_tail <= md["tail_bound"]
    coarse = simulate_whole_line(WL, 1.0, (0.0, 2.0), 129, quadrature=(5.0, 64), seed=5)
    assert coarse.metadata["tail_warning"] is True


def test_whole_line_validation():
    with pytest.raises(InvalidParameterError):
        WholeLineSampler(SpdeModel(), 1.0)
    with pytest.raises(InvalidParameterError):
        WholeLineSampler(WL, 1.0, (1.0, 0.0))
    with pytest.raises(InvalidParameterError):
        WholeLineSampler(WL, 1.0, n_points=100, xi_cut=10.0, n_xi=0)
    assert DIRICHLET != WHOLE_LINE
