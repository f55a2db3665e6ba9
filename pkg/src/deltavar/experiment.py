"""Monte Carlo harness: estimator experiments, CLT checks and plot data."""

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import jsonschema
import numpy as np
from scipy import stats

from . import jsonio, spde
from .constants import c_alpha_gamma_m, clt_constants, decompose, mu, sigma_sq, tau
from .errors import DeltaVarError, ExperimentFailedError, InvalidParameterError
from .estimators import (DirichletGeometry, EstimationInput, KnownSigma, KnownTheta,
                         WholeLineGeometry, check_hypotheses, estimate,
                         estimate_sigma_whole_line, estimate_theta_whole_line, select_M)
from .fbm import FbmSpec, sample_iterated_fbm
from .findiff import GridFunction, VariationParams, delta_power_variation

CONFIG_VERSION = 1
FAILURE_LIMIT = 0.10

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "deltavar experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["version"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "theta": {"type": "number", "exclusiveMinimum": 0},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "minimum": 0},
        "nonlinearity": {"type": "string"},
        "domain": {"enum": [spde.DIRICHLET, spde.WHOLE_LINE]},
        "t_obs": {"type": "number", "exclusiveMinimum": 0},
        "window_a": {"type": "number"},
        "window_b": {"type": "number"},
        "resolutions": {"type": "array", "minItems": 1,
                        "items": {"type": "integer", "minimum": 2}},
        "q": {"type": "integer", "minimum": 1},
        "M": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "auto"}]},
        "n_replications": {"type": "integer", "minimum": 1},
        "seed_base": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "n_modes": {"type": "integer", "minimum": 1},
        "n_time_steps": {"type": "integer", "minimum": 1},
        "xi_cut": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "n_xi": {"type": ["integer", "null"], "minimum": 1},
        "output_dir": {"type": ["string", "null"]},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    theta: float = 1.0
    sigma: float = 1.0
    alpha: float = 2.0
    gamma: float = 0.5
    nonlinearity: str = "zero"
    domain: str = spde.DIRICHLET
    t_obs: float = 1.0
    window_a: float = 0.2
    window_b: float = 0.8
    resolutions: tuple = (512, 1024, 2048, 4096)
    q: int = 2
    M: object = "auto"
    n_replications: int = 50
    seed_base: int = 0
    n_modes: int = spde.DEFAULT_N_MODES
    n_time_steps: int = 1000
    xi_cut: Optional[float] = None
    n_xi: Optional[int] = None
    output_dir: Optional[str] = None
    version: int = CONFIG_VERSION

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(int(n) for n in self.resolutions))
        res = self.resolutions
        if any(b <= a for a, b in zip(res, res[1:])):
            raise InvalidParameterError(f"resolutions must be strictly increasing, got {res}")
        if self.domain == spde.DIRICHLET and not 0.0 < self.window_a < self.window_b < 1.0:
            raise InvalidParameterError("the observation window must satisfy 0 < a < b < 1")
        if not self.window_b > self.window_a:
            raise InvalidParameterError("the observation window must satisfy a < b")
        if self.domain == spde.WHOLE_LINE and any(res[-1] % n for n in res):
            raise InvalidParameterError(
                "whole-line resolutions must divide the finest one (nested subsampling)")
        model = self.model()
        if self.M_value <= model.s_star:
            raise InvalidParameterError(f"need M > s* = {model.s_star}")
        if self.M_value >= res[0]:
            raise InvalidParameterError("coarsest resolution must exceed M")
        check_hypotheses(self.M_value, model.s_star)

    @classmethod
    def from_dict(cls, data: dict):
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise InvalidParameterError(f"invalid configuration: {exc.message}") from exc
        return cls(**data)

    def to_dict(self):
        d = asdict(self)
        d["resolutions"] = list(self.resolutions)
        return d

    def replace(self, **changes):
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**d)

    def model(self) -> spde.SpdeModel:
        return spde.SpdeModel(self.theta, self.sigma, self.alpha, self.gamma,
                              spde.parse_nonlinearity(self.nonlinearity), self.domain)

    @property
    def M_value(self) -> int:
        return select_M(self.model().s_star) if self.M == "auto" else int(self.M)


@dataclass(frozen=True)
class ResolutionStats:
    n_intervals: int
    h: float
    n_ok: int
    mean_estimate: float
    rmse: float
    empirical_sd: float
    mean_std_error: Optional[float]
    coverage_95: Optional[float]


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class McSummary:
    target: str
    true_value: float
    resolutions: List[ResolutionStats]
    rate_fit: Optional[RateFit]

    def to_dict(self):
        return {
            "target": self.target, "true_value": self.true_value,
            "resolutions": [asdict(r) for r in self.resolutions],
            "rate_fit": asdict(self.rate_fit) if self.rate_fit else None,
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    M: int
    summaries: dict
    records: list
    failures: list = field(default_factory=list)

    def to_dict(self):
        cfg = self.config.to_dict()
        cfg.pop("output_dir")
        return {
            "version": CONFIG_VERSION,
            "config": cfg,
            "M": self.M,
            "s_star": self.config.model().s_star,
            "n_replications": self.config.n_replications,
            "n_failed": len(self.failures),
            "failures": self.failures,
            "summaries": {k: v.to_dict() for k, v in self.summaries.items()},
        }


# ---------------------------------------------------------------------------
# Monte Carlo estimator experiment
# ---------------------------------------------------------------------------

class _Setup:
    """Objects shared read-only by all replications."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.model = cfg.model()
        self.M = cfg.M_value
        s = self.model.s_star
        d = decompose(s)
        self.constants = clt_constants(cfg.q, self.M, d.m, d.H)
        if cfg.domain == spde.WHOLE_LINE:
            self.geometry = WholeLineGeometry(cfg.alpha, cfg.gamma, d.m)
            self.c_agm = c_alpha_gamma_m(cfg.alpha, cfg.gamma, d.m)
            self.sampler = spde.WholeLineSampler(
                self.model, cfg.t_obs, (cfg.window_a, cfg.window_b), cfg.resolutions[-1] + 1,
                cfg.xi_cut, cfg.n_xi)
            self.sigma_target, self.sigma_true = "sigma", cfg.sigma
        else:
            self.geometry = DirichletGeometry()
            self.c_agm = None
            self.sigma_target, self.sigma_true = "sigma_pow_q", cfg.sigma ** cfg.q

    def fields(self, seed):
        cfg = self.cfg
        if cfg.domain == spde.WHOLE_LINE:
            fine = self.sampler.sample(seed).values
            n_fine = cfg.resolutions[-1]
            return [GridFunction(fine.values[::n_fine // n], fine.a, fine.b)
                    for n in cfg.resolutions]
        if self.model.is_linear:
            state = spde.simulate_linear_dirichlet(self.model, cfg.t_obs, cfg.n_modes, seed)
        else:
            state = spde.simulate_semilinear_dirichlet(self.model, cfg.t_obs, cfg.n_modes,
                                                       cfg.n_time_steps, seed)
        return [spde.evaluate_field(state, cfg.window_a, cfg.window_b, n + 1).values
                for n in cfg.resolutions]

    def run(self, index):
        cfg = self.cfg
        seed = cfg.seed_base + index
        if not seed < 2 ** 64:
            raise InvalidParameterError("seed_base + replication index overflows 64 bits")
        try:
            rows = []
            for f in self.fields(seed):
                s_star = self.model.s_star
                r_sig = self._estimate(f, s_star, KnownTheta(cfg.theta))
                r_th = self._estimate(f, s_star, KnownSigma(cfg.sigma))
                rows.append({
                    "N": f.n_intervals, "h": f.h, "v_stat": r_th.v_stat,
                    "theta_estimate": r_th.estimate, "theta_std_error": r_th.std_error,
                    "sigma_estimate": r_sig.estimate, "sigma_std_error": r_sig.std_error,
                    "theta_ci": r_th.ci_95, "sigma_ci": r_sig.ci_95,
                })
            return {"index": index, "seed": seed, "rows": rows, "error": None}
        except (DeltaVarError, FloatingPointError) as exc:
            return {"index": index, "seed": seed, "rows": None,
                    "error": f"{type(exc).__name__}: {exc}"}

    def _estimate(self, f, s_star, known):
        inp = EstimationInput(f, self.cfg.q, self.M, s_star, known, self.geometry)
        if self.c_agm is None:
            return estimate(inp, self.constants)
        fn = estimate_sigma_whole_line if isinstance(known, KnownTheta) else estimate_theta_whole_line
        return fn(inp, self.constants, self.c_agm)


def _rate_fit(h, rmse):
    h, rmse = np.asarray(h, float), np.asarray(rmse, float)
    if h.size < 2 or not np.all(rmse > 0):
        return None
    x, y = np.log(h), np.log(rmse)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)


def _summarize(target, truth, key, records, resolutions, window):
    ok = [r for r in records if r["error"] is None]
    stats_list = []
    for j, n in enumerate(resolutions):
        est = np.array([r["rows"][j][f"{key}_estimate"] for r in ok])
        se = [r["rows"][j][f"{key}_std_error"] for r in ok]
        ci = [r["rows"][j][f"{key}_ci"] for r in ok]
        h = (window[1] - window[0]) / n
        if est.size == 0:
            stats_list.append(ResolutionStats(n, h, 0, None, None, None, None, None))
            continue
        err = est - truth
        have_se = all(x is not None for x in se)
        stats_list.append(ResolutionStats(
            n_intervals=n, h=h, n_ok=int(est.size),
            mean_estimate=float(np.mean(est)),
            rmse=float(math.sqrt(np.mean(err ** 2))),
            empirical_sd=float(np.std(est)),
            mean_std_error=float(np.mean(se)) if have_se else None,
            coverage_95=float(np.mean([lo <= truth <= hi for lo, hi in ci])) if have_se else None,
        ))
    valid = [s for s in stats_list if s.rmse is not None]
    fit = _rate_fit([s.h for s in valid], [s.rmse for s in valid])
    return McSummary(target, truth, stats_list, fit)


REPLICATION_COLUMNS = ["replication", "seed", "N", "h", "v_stat", "theta_estimate",
                       "theta_std_error", "sigma_estimate", "sigma_std_error", "status"]


def _write_replications(path, records):
    def num(x):
        return "" if x is None else format(x, ".17g")

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPLICATION_COLUMNS)
        for r in records:
            if r["error"] is not None:
                w.writerow([r["index"], r["seed"], "", "", "", "", "", "", "", r["error"]])
                continue
            for row in r["rows"]:
                w.writerow([r["index"], r["seed"], row["N"], num(row["h"]), num(row["v_stat"]),
                            num(row["theta_estimate"]), num(row["theta_std_error"]),
                            num(row["sigma_estimate"]), num(row["sigma_std_error"]), "ok"])


def _map(fn, items, threads):
    threads = max(1, int(threads or min(8, os.cpu_count() or 1)))
    if threads == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_mc_experiment(config: ExperimentConfig, threads: int = None,
                      output_dir: str = None) -> ExperimentResult:
    """Simulate, estimate and aggregate; writes ``replications.csv`` and ``summary.json``.

    Every replication draws one path (seed ``seed_base + index``) and evaluates
    it at all resolutions.  ``theta`` is estimated with sigma known and
    ``sigma`` (``sigma**q`` on the Dirichlet interval) with theta known, both
    from the same variation statistic.  Results are folded in index order, so
    the output does not depend on scheduling.
    """
    setup = _Setup(config)
    # results are sorted by index regardless of completion order
    records = sorted(_map(setup.run, range(config.n_replications), threads),
                     key=lambda r: r["index"])
    failures = [{"index": r["index"], "seed": r["seed"], "error": r["error"]}
                for r in records if r["error"] is not None]
    window = (config.window_a, config.window_b)
    summaries = {
        "theta": _summarize("theta", config.theta, "theta", records, config.resolutions, window),
        setup.sigma_target: _summarize(setup.sigma_target, setup.sigma_true, "sigma", records,
                                       config.resolutions, window),
    }
    result = ExperimentResult(config, setup.M, summaries, records, failures)
    out = output_dir or config.output_dir
    if out:
        os.makedirs(out, exist_ok=True)
        _write_replications(os.path.join(out, "replications.csv"), records)
        jsonio.dump(result.to_dict(), os.path.join(out, "summary.json"))
    if len(failures) > FAILURE_LIMIT * config.n_replications:
        raise ExperimentFailedError(
            f"{len(failures)} of {config.n_replications} replications failed; "
            f"first error: {failures[0]['error']}")
    return result


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidParameterError(f"{path}: configuration must be a JSON object")
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# CLT check for iterated fBm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CltReport:
    m: int
    H: float
    M: int
    q: int
    N: int
    n_replications: int
    seed_base: int
    sigma_sq: float
    mean: float
    variance: float
    variance_ratio: float
    ks_statistic: float
    ks_pvalue: float

    def to_dict(self):
        return asdict(self)


def check_clt_hypotheses(m, H, M):
    """Require ``M = m+1`` with ``H < 3/4`` or ``M >= m+2``."""
    if M == m + 1 and 0.0 < H < 0.75:
        return
    if M >= m + 2 and 0.0 < H < 1.0:
        return
    raise InvalidParameterError(
        f"CLT hypotheses fail for m={m}, H={H}, M={M}: need M = m+1 with H < 3/4, or M >= m+2")


def clt_statistics(m, H, M, q, N, n_replications, seed_base=0, threads=None):
    """Standardized ``sqrt(N) (V - tau_q mu**(q/2)) / (sigma_q mu**(q/2))`` per replication."""
    check_clt_hypotheses(m, H, M)
    if q % 2:
        raise InvalidParameterError("the CLT variance is available for even q only")
    if not N > M:
        raise InvalidParameterError(f"need N > M, got N={N}")
    s = m + H
    mu_ = mu(M, m, H)
    sig = sigma_sq(q, M, m, H)
    centre = tau(q) * mu_ ** (q / 2.0)
    scale = math.sqrt(sig) * mu_ ** (q / 2.0)
    p = VariationParams(q, M, s)
    base = FbmSpec(m, H, 0.0, 1.0, N + 1, seed_base)

    def one(i):
        path = sample_iterated_fbm(base.with_seed(seed_base + i))
        return math.sqrt(N) * (delta_power_variation(path.values, p) - centre) / scale

    return np.array(_map(one, range(n_replications), threads)), sig


def run_clt_check(m, H, M, q, N, n_replications, seed_base=0, threads=None) -> CltReport:
    """Compare the standardized variation statistic with N(0, 1)."""
    z, sig = clt_statistics(m, H, M, q, N, n_replications, seed_base, threads)
    ks = stats.kstest(z, "norm")
    var = float(np.var(z, ddof=1)) if z.size > 1 else float("nan")
    return CltReport(m, H, M, q, N, n_replications, seed_base, sig, float(np.mean(z)), var,
                     var, float(ks.statistic), float(ks.pvalue))


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

def emit_plot_data(summary: McSummary, out_dir, svg: bool = False):
    """Write ``<target>_mean.csv`` and ``<target>_rmse.csv`` (optionally an SVG).

    The reference line ``C h**(1/2)`` passes through the coarsest RMSE point.
    Returns the list of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = [r for r in summary.resolutions if r.rmse is not None]
    mean_path = os.path.join(out_dir, f"{summary.target}_mean.csv")
    rmse_path = os.path.join(out_dir, f"{summary.target}_rmse.csv")
    with open(mean_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "mean_estimate", "true_value"])
        for r in rows:
            w.writerow([format(r.h, ".17g"), format(r.mean_estimate, ".17g"),
                        format(summary.true_value, ".17g")])
    C = None
    if rows:
        coarse = max(rows, key=lambda r: r.h)
        C = coarse.rmse / math.sqrt(coarse.h)
    with open(rmse_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "rmse", "reference_sqrt_h"])
        for r in rows:
            w.writerow([format(r.h, ".17g"), format(r.rmse, ".17g"),
                        format(C * math.sqrt(r.h), ".17g")])
    written = [mean_path, rmse_path]
    if svg and rows:
        written.append(_render_svg(summary, rows, C, out_dir))
    return written


def _render_svg(summary, rows, C, out_dir):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    h = np.array([r.h for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(h, [r.rmse for r in rows], "o-", label="RMSE")
    ax.loglog(h, C * np.sqrt(h), "--", label="C h^(1/2)")
    ax.set_xlabel("h")
    ax.set_ylabel("RMSE")
    ax.set_title(summary.target)
    ax.legend()
    path = os.path.join(out_dir, f"{summary.target}_rmse.svg")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
