"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from deltavar import constants as C
from deltavar.estimators import (EstimationInput, KnownSigma, KnownTheta, WholeLineGeometry,
                                 estimate_sigma_whole_line, estimate_theta_whole_line)
from deltavar.experiment import ExperimentConfig, run_clt_check, run_mc_experiment
from deltavar.fbm import FbmSpec, sample_iterated_fbm
from deltavar.findiff import GridFunction, VariationParams, delta_power_variation
from deltavar.spde import (WHOLE_LINE, SpdeModel, WholeLineSampler, evaluate_field,
                           simulate_linear_dirichlet)


def _check(criterion, k, passed, detail):
    criterion(k, bool(passed), detail)
    assert passed, detail


def test_criterion_1_mu_exact_values(criterion):
    t0 = time.perf_counter()
    errs = [abs(C.mu(1, 0, H) - 1.0) for H in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)]
    errs.append(abs(C.mu(2, 1, 0.25) - (math.sqrt(2) - 1) * 16 / 15))
    errs.append(abs(C.mu(2, 1, 0.5) - 2 / 3))
    dt = time.perf_counter() - t0
    _check(criterion, 1, max(errs) < 1e-10 and dt < 1.0,
           f"max |error| = {max(errs):.2e}, {dt:.2f} s")


def test_criterion_2_mu_matches_oracle(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for M in (1, 2, 3, 4):
        for m in range(M):
            for H in (0.1, 0.25, 0.5, 0.75, 0.9):
                ref = C.mu_oracle(M, m, H)
                worst = max(worst, abs(C.mu(M, m, H) - ref) / abs(ref))
    dt = time.perf_counter() - t0
    _check(criterion, 2, worst < 1e-10 and dt < 10.0,
           f"max relative error {worst:.2e} over 50 lattice points, {dt:.2f} s")


def test_criterion_3_fbm_covariance(criterion):
    t0 = time.perf_counter()
    n_seeds, worst, ok = 2000, 0.0, True
    for m, H in [(0, 0.25), (0, 0.5), (1, 0.25), (1, 0.5), (1, 0.75), (2, 0.5)]:
        spec = FbmSpec(m, H, 0.0, 1.0, 6)
        X = np.array([sample_iterated_fbm(spec.with_seed(s)).values.values for s in range(n_seeds)])
        K = C.iterated_fbm_cov_matrix(m, H, np.linspace(0.0, 1.0, 6))
        prod = X[:, :, None] * X[:, None, :]
        se = prod.std(axis=0, ddof=1) / math.sqrt(n_seeds)
        dev = np.abs(prod.mean(axis=0) - K)
        ok &= bool(np.all(dev <= 4 * se))
        live = se > 0
        worst = max(worst, float(np.max(dev[live] / se[live])))
    dt = time.perf_counter() - t0
    _check(criterion, 3, ok and dt < 120, f"largest deviation {worst:.2f} SE, {dt:.1f} s")


@pytest.mark.slow
def test_criterion_4_clt_reproduction(criterion):
    t0 = time.perf_counter()
    bm = run_clt_check(0, 0.5, 1, 2, 2 ** 12, 1000, seed_base=0)
    ib = run_clt_check(1, 0.5, 3, 2, 2 ** 12, 500, seed_base=0)
    dt = time.perf_counter() - t0
    passed = (bm.ks_pvalue > 0.01 and 0.85 <= bm.variance_ratio <= 1.15
              and abs(bm.sigma_sq - 2.0) < 1e-12
              and 0.8 <= ib.variance_ratio <= 1.2 and dt < 600)
    _check(criterion, 4, passed,
           f"BM: KS p={bm.ks_pvalue:.3f}, ratio={bm.variance_ratio:.3f}; "
           f"J^1 B^1/2 (M=3): sigma^2={ib.sigma_sq:.6f}, ratio={ib.variance_ratio:.3f}; {dt:.0f} s")


@pytest.mark.slow
def test_criterion_5_dirichlet_bias_constant(criterion):
    t0 = time.perf_counter()
    model = SpdeModel(1.0, 1.0, 2.0, 0.5)
    p = VariationParams(2, 3, 1.5)
    v = []
    for seed in range(100):
        state = simulate_linear_dirichlet(model, 1.0, seed=seed)
        v.append(delta_power_variation(evaluate_field(state, 0.2, 0.8, 4097).values, p))
    v = np.array(v)
    target = C.tau(2) * C.nu(0.5) * C.mu(3, 1, 0.5) / 2.0
    se = v.std(ddof=1) / 10
    dt = time.perf_counter() - t0
    z = (v.mean() - target) / se
    _check(criterion, 5, abs(z) < 3 and dt < 300,
           f"mean V={v.mean():.5f} vs {target:.5f} ({z:+.2f} SE), {dt:.1f} s")


@pytest.fixture(scope="module")
def rate_experiments(tmp_path_factory):
    out = {}
    t0 = time.perf_counter()
    for gamma in (0.375, 0.5, 0.625):
        d = tmp_path_factory.mktemp(f"mc_{gamma}")
        cfg = ExperimentConfig(gamma=gamma, resolutions=(512, 1024, 2048, 4096), n_replications=50,
                               seed_base=0, output_dir=str(d))
        out[gamma] = (cfg, run_mc_experiment(cfg), d / "summary.json")
    return out, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_6_estimator_rates(criterion, rate_experiments):
    runs, dt = rate_experiments
    ok, parts = dt < 1800, []
    for gamma, (_, res, _) in runs.items():
        for key, summ in res.summaries.items():
            finest = summ.resolutions[-1].mean_estimate
            slope = summ.rate_fit.slope
            ok &= abs(finest - 1.0) <= 0.05 and 0.35 <= slope <= 0.65
            parts.append(f"g={gamma} {key}: mean={finest:.4f} slope={slope:.3f}")
    _check(criterion, 6, ok, "; ".join(parts) + f"; {dt:.0f} s")


@pytest.mark.slow
def test_criterion_7_whole_line_consistency(criterion):
    t0 = time.perf_counter()
    model = SpdeModel(1.0, 1.0, 1.4, 0.2, domain=WHOLE_LINE)
    g = WholeLineGeometry(1.4, 0.2, 0)
    s = model.s_star
    sampler = WholeLineSampler(model, 1.0, (0.0, 1.0), 4097)
    cc = C.clt_constants(2, 2, 0, s)
    c = C.c_alpha_gamma_m(1.4, 0.2, 0)
    sig, th = [], []
    for seed in range(100):
        f = sampler.sample(seed).values
        sig.append(estimate_sigma_whole_line(EstimationInput(f, 2, 2, s, KnownTheta(1.0), g),
                                             cc, c).estimate)
        th.append(estimate_theta_whole_line(EstimationInput(f, 2, 2, s, KnownSigma(1.0), g),
                                            cc, c).estimate)
    z = [(np.mean(e) - 1.0) / (np.std(e, ddof=1) / 10) for e in (sig, th)]
    dt = time.perf_counter() - t0
    _check(criterion, 7, max(map(abs, z)) < 3 and dt < 600,
           f"sigma~ mean={np.mean(sig):.4f} ({z[0]:+.2f} SE), "
           f"theta~ mean={np.mean(th):.4f} ({z[1]:+.2f} SE), {dt:.1f} s")


def test_criterion_8_perturbation_invariance(criterion):
    t0 = time.perf_counter()
    p = VariationParams(2, 3, 1.5)
    path = sample_iterated_fbm(FbmSpec(1, 0.5, 0.0, 1.0, 2 ** 12 + 1, seed=0)).values
    gaps = []
    for N in (2 ** 9, 2 ** 10, 2 ** 11, 2 ** 12):
        x = GridFunction(path.values[::2 ** 12 // N], 0.0, 1.0)
        y = GridFunction.from_callable(lambda t: np.sin(2 * np.pi * t), 0.0, 1.0, N)
        gaps.append(abs(delta_power_variation(x + y, p) - delta_power_variation(x, p)))
    dt = time.perf_counter() - t0
    bound = 5 / math.sqrt(2 ** 12)
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    _check(criterion, 8, gaps[-1] < bound and monotone and dt < 60,
           "gaps " + ", ".join(f"{g:.2e}" for g in gaps) + f" (bound {bound:.2e}), {dt:.1f} s")


@pytest.mark.slow
def test_criterion_9_determinism(criterion, rate_experiments, tmp_path):
    runs, _ = rate_experiments
    same = True
    for gamma, (cfg, _, first) in runs.items():
        again = tmp_path / str(gamma)
        run_mc_experiment(cfg.replace(output_dir=str(again)), threads=3)
        same &= first.read_bytes() == (again / "summary.json").read_bytes()
    _check(criterion, 9, same, "summary.json byte-identical on rerun for all three configurations")
